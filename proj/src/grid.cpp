#include "vvcguard/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <string>

#include "vvcguard/errors.hpp"

namespace vvcguard::grid {

namespace {

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string(what) + " must be positive");
  }
}

PerUnitTransformer transformer_to_pu(const TransformerSpec& t, double s_base) {
  require_positive(t.rating_mva, "transformer rating");
  PerUnitTransformer out;
  out.bus = t.bus;
  out.rating_mva = t.rating_mva;
  out.hv_kv = t.hv_kv;
  out.lv_kv = t.lv_kv;
  out.z = Complex(t.r_pu, t.x_pu) * (s_base / t.rating_mva);
  return out;
}

TransformerSpec transformer_from_pu(const PerUnitTransformer& t, double s_base) {
  const Complex own = t.z * (t.rating_mva / s_base);
  return TransformerSpec{t.bus, t.rating_mva, t.hv_kv, t.lv_kv, own.real(), own.imag()};
}

}  // namespace

void PerUnitBase::validate() const {
  require_positive(s_base_mva, "s_base");
  require_positive(v_base_mv_kv, "MV voltage base");
  require_positive(v_base_lv_kv, "LV voltage base");
}

PerUnitNetwork to_per_unit(const NetworkSpec& spec) {
  spec.base.validate();
  require_positive(spec.source.short_circuit_mva, "short-circuit level");
  require_positive(spec.source.x_over_r, "X/R ratio");
  require_positive(spec.source.nominal_voltage_pu, "source voltage");

  const double s_base = spec.base.s_base_mva;
  const double z_base = spec.base.z_base_mv();

  PerUnitNetwork pu;
  pu.name = spec.name;
  pu.base = spec.base;
  pu.buses = spec.buses;
  pu.substation_bus = spec.substation_bus;

  // |Z| = s_base / S_sc, split by the X/R ratio.
  const double z_mag = s_base / spec.source.short_circuit_mva;
  const double r = z_mag / std::sqrt(1.0 + spec.source.x_over_r * spec.source.x_over_r);
  pu.z_source = Complex(r, r * spec.source.x_over_r);
  pu.v_source = spec.source.nominal_voltage_pu;
  pu.substation_transformer = transformer_to_pu(spec.substation_transformer, s_base);

  for (const auto& line : spec.lines) {
    if (line.r_ohm_per_km < 0.0 || line.x_ohm_per_km < 0.0) {
      throw DomainError("line impedance must be non-negative");
    }
    require_positive(line.length_km, "line length");
    pu.lines.push_back(PerUnitLine{line.from_bus, line.to_bus,
                                   Complex(line.r_ohm_per_km, line.x_ohm_per_km) / z_base,
                                   line.length_km});
  }
  for (const auto& t : spec.interface_transformers) {
    pu.interface_transformers.push_back(transformer_to_pu(t, s_base));
  }
  for (const auto& load : spec.loads) {
    pu.loads.push_back(PerUnitLoad{load.bus, Complex(load.p_mw, load.q_mvar) / s_base, load.scale});
  }
  pu.dg_buses = spec.dg_buses;
  for (double rating : spec.dg_rating_mva) {
    require_positive(rating, "DG rating");
    pu.dg_rating.push_back(rating / s_base);
  }
  return pu;
}

NetworkSpec from_per_unit(const PerUnitNetwork& pu) {
  pu.base.validate();
  const double s_base = pu.base.s_base_mva;
  const double z_base = pu.base.z_base_mv();

  NetworkSpec spec;
  spec.name = pu.name;
  spec.base = pu.base;
  spec.buses = pu.buses;
  spec.substation_bus = pu.substation_bus;

  const double z_mag = std::abs(pu.z_source);
  if (!(z_mag > 0.0)) throw DomainError("source impedance must be non-zero");
  spec.source.short_circuit_mva = s_base / z_mag;
  spec.source.x_over_r = pu.z_source.imag() / pu.z_source.real();
  spec.source.nominal_voltage_pu = pu.v_source;
  spec.substation_transformer = transformer_from_pu(pu.substation_transformer, s_base);

  for (const auto& line : pu.lines) {
    const Complex ohm = line.z_per_km * z_base;
    spec.lines.push_back(LineSpec{line.from_bus, line.to_bus, ohm.real(), ohm.imag(), line.length_km});
  }
  for (const auto& t : pu.interface_transformers) {
    spec.interface_transformers.push_back(transformer_from_pu(t, s_base));
  }
  for (const auto& load : pu.loads) {
    const Complex s = load.s * s_base;
    spec.loads.push_back(LoadSpec{load.bus, s.real(), s.imag(), load.scale});
  }
  spec.dg_buses = pu.dg_buses;
  for (double rating : pu.dg_rating) spec.dg_rating_mva.push_back(rating * s_base);
  return spec;
}

NetworkModel::NetworkModel(NetworkSpec spec) : spec_(std::move(spec)), pu_(to_per_unit(spec_)) {
  const std::size_t n = pu_.buses.size();
  if (n == 0) throw TopologyError("network has no buses");
  {
    std::set<BusId> unique(pu_.buses.begin(), pu_.buses.end());
    if (unique.size() != n) throw TopologyError("duplicate bus id");
  }
  if (!has_bus(pu_.substation_bus)) throw ReferenceError("substation bus is not a network bus");
  if (pu_.lines.size() != n - 1) {
    throw TopologyError("radial network needs exactly " + std::to_string(n - 1) + " lines, got " +
                        std::to_string(pu_.lines.size()));
  }

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency(n);  // (neighbor, line)
  for (std::size_t k = 0; k < pu_.lines.size(); ++k) {
    const auto& line = pu_.lines[k];
    if (line.from_bus == line.to_bus) throw TopologyError("line connects a bus to itself");
    if (!has_bus(line.from_bus) || !has_bus(line.to_bus)) {
      throw ReferenceError("line references an unknown bus");
    }
    const std::size_t a = index_of(line.from_bus);
    const std::size_t b = index_of(line.to_bus);
    adjacency[a].emplace_back(b, k);
    adjacency[b].emplace_back(a, k);
  }

  parent_.assign(n, -2);
  depth_.assign(n, 0);
  branch_z_.assign(n, Complex{});
  const std::size_t root = index_of(pu_.substation_bus);
  parent_[root] = -1;
  branch_z_[root] = pu_.z_source;
  std::queue<std::size_t> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    order_.push_back(u);
    for (auto [v, k] : adjacency[u]) {
      if (static_cast<int>(v) == parent_[u]) continue;
      if (parent_[v] != -2) throw TopologyError("network contains a cycle");
      parent_[v] = static_cast<int>(u);
      depth_[v] = depth_[u] + 1;
      branch_z_[v] = pu_.lines[k].z();
      frontier.push(v);
    }
  }
  if (order_.size() != n) throw TopologyError("network is not connected");

  if (pu_.dg_rating.size() != pu_.dg_buses.size()) {
    throw DomainError("one rating per DG is required");
  }
  if (pu_.interface_transformers.size() != pu_.dg_buses.size()) {
    throw DomainError("one interface transformer per DG is required");
  }
  for (std::size_t d = 0; d < pu_.dg_buses.size(); ++d) {
    if (!has_bus(pu_.dg_buses[d])) throw ReferenceError("DG placed at an unknown bus");
    if (pu_.interface_transformers[d].bus != pu_.dg_buses[d]) {
      throw DomainError("interface transformers must be listed in DG order");
    }
  }
  {
    std::set<BusId> unique(pu_.dg_buses.begin(), pu_.dg_buses.end());
    if (unique.size() != pu_.dg_buses.size()) throw DomainError("two DGs on one bus");
  }

  demand_.assign(n, Complex{});
  for (const auto& load : pu_.loads) {
    if (!has_bus(load.bus)) throw ReferenceError("load at unknown bus " + std::to_string(load.bus));
    if (load.s.real() < 0.0) throw DomainError("load active power must be non-negative");
    require_positive(load.scale, "load scale");
    demand_[index_of(load.bus)] += load.demand();
  }
}

std::size_t NetworkModel::index_of(BusId bus) const {
  const auto it = std::find(pu_.buses.begin(), pu_.buses.end(), bus);
  if (it == pu_.buses.end()) throw ReferenceError("unknown bus " + std::to_string(bus));
  return static_cast<std::size_t>(it - pu_.buses.begin());
}

bool NetworkModel::has_bus(BusId bus) const {
  return std::find(pu_.buses.begin(), pu_.buses.end(), bus) != pu_.buses.end();
}

std::optional<std::size_t> NetworkModel::dg_index(BusId bus) const {
  const auto it = std::find(pu_.dg_buses.begin(), pu_.dg_buses.end(), bus);
  if (it == pu_.dg_buses.end()) return std::nullopt;
  return static_cast<std::size_t>(it - pu_.dg_buses.begin());
}

std::size_t NetworkModel::require_dg(BusId bus) const {
  const auto d = dg_index(bus);
  if (!d) throw ReferenceError("no DG at bus " + std::to_string(bus));
  return *d;
}

NetworkModel NetworkModel::with_load_scale(double factor) const {
  NetworkSpec scaled = spec_;
  for (auto& load : scaled.loads) load.scale *= factor;
  return NetworkModel(std::move(scaled));
}

NetworkModel NetworkModel::with_load_scales(std::span<const double> factors) const {
  if (factors.size() != spec_.loads.size()) {
    throw DomainError("one scale factor per load is required");
  }
  NetworkSpec scaled = spec_;
  for (std::size_t k = 0; k < factors.size(); ++k) scaled.loads[k].scale *= factors[k];
  return NetworkModel(std::move(scaled));
}

Complex thevenin_impedance(const NetworkModel& model, BusId bus) {
  Complex z{};
  for (int i = static_cast<int>(model.index_of(bus)); i >= 0; i = model.parent(static_cast<std::size_t>(i))) {
    z += model.branch_impedance(static_cast<std::size_t>(i));
  }
  return z;
}

Complex pcc_thevenin_impedance(const NetworkModel& model, BusId dg_bus) {
  const std::size_t d = model.require_dg(dg_bus);
  return thevenin_impedance(model, dg_bus) + model.interface_impedance(d);
}

std::vector<LoadSpec> uniform_load_profile(double p_mw, double pf) {
  if (!(pf > 0.0 && pf <= 1.0)) throw DomainError("power factor must lie in (0, 1]");
  const double q = p_mw * std::tan(std::acos(pf));
  std::vector<LoadSpec> loads;
  for (BusId bus = 2; bus <= 9; ++bus) loads.push_back(LoadSpec{bus, p_mw, q, 1.0});
  return loads;
}

std::vector<LoadSpec> calibration_load_profile() {
  // Output of calibrate_load_scale() for the default inverter settings,
  // frozen here and in data/benchmark_9bus.json.
  constexpr double kCalibratedMw = 1.4481400985977242;
  return uniform_load_profile(kCalibratedMw);
}

NetworkSpec benchmark_spec(std::span<const LoadSpec> load_profile,
                           std::span<const double> line_lengths_km) {
  NetworkSpec spec;
  spec.name = "canadian-urban-9bus";
  spec.base = PerUnitBase{};
  spec.buses = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  spec.substation_bus = 1;
  spec.source = SourceSpec{500.0, 6.0, 1.03};
  spec.substation_transformer = TransformerSpec{1, 20.0, 115.0, 12.47, 0.0, 0.0};

  const std::pair<BusId, BusId> topology[] = {{1, 2}, {2, 3}, {3, 4}, {4, 5},
                                              {1, 6}, {6, 7}, {7, 8}, {8, 9}};
  if (!line_lengths_km.empty() && line_lengths_km.size() != std::size(topology)) {
    throw DomainError("expected one length per benchmark line segment");
  }
  for (std::size_t k = 0; k < std::size(topology); ++k) {
    const double length = line_lengths_km.empty() ? 1.0 : line_lengths_km[k];
    spec.lines.push_back(LineSpec{topology[k].first, topology[k].second, kLineR, kLineX, length});
  }

  spec.dg_buses = {4, 5, 6, 9};
  for (BusId bus : spec.dg_buses) {
    spec.interface_transformers.push_back(TransformerSpec{bus, 2.0, 12.47, 0.6, 0.006, 0.10});
    spec.dg_rating_mva.push_back(2.0);
  }
  spec.loads.assign(load_profile.begin(), load_profile.end());
  return spec;
}

NetworkModel build_benchmark_network(std::span<const LoadSpec> load_profile,
                                     std::span<const double> line_lengths_km) {
  return NetworkModel(benchmark_spec(load_profile, line_lengths_km));
}

NetworkModel default_benchmark_network() {
  const auto loads = calibration_load_profile();
  return build_benchmark_network(loads);
}

}  // namespace vvcguard::grid
