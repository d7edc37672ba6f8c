#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vvcguard::grid {

using BusId = int;
using Complex = std::complex<double>;

struct PerUnitBase {
  double s_base_mva = 20.0;
  double v_base_mv_kv = 12.47;  // line-to-line, feeder side
  double v_base_lv_kv = 0.6;    // line-to-line, DG terminal side

  double z_base_mv() const { return v_base_mv_kv * v_base_mv_kv / s_base_mva; }
  double z_base_lv() const { return v_base_lv_kv * v_base_lv_kv / s_base_mva; }
  void validate() const;
};

struct LineSpec {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double r_ohm_per_km = 0.0;
  double x_ohm_per_km = 0.0;
  double length_km = 1.0;
};

/// Utility equivalent seen from the substation bus. Its short-circuit level
/// already includes the substation transformer.
struct SourceSpec {
  double short_circuit_mva = 500.0;
  double x_over_r = 6.0;
  double nominal_voltage_pu = 1.0;
};

/// Two-winding transformer; impedance is on its own rating.
struct TransformerSpec {
  BusId bus = 0;  // MV-side bus (substation bus for the station transformer)
  double rating_mva = 0.0;
  double hv_kv = 0.0;
  double lv_kv = 0.0;
  double r_pu = 0.0;
  double x_pu = 0.0;
};

struct LoadSpec {
  BusId bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  double scale = 1.0;
};

/// Physical description of a radial feeder, as read from a config file.
struct NetworkSpec {
  std::string name;
  std::vector<BusId> buses;
  BusId substation_bus = 1;
  std::vector<LineSpec> lines;
  SourceSpec source;
  TransformerSpec substation_transformer;
  /// One interface transformer per DG; `bus` names the DG bus.
  std::vector<TransformerSpec> interface_transformers;
  std::vector<LoadSpec> loads;
  std::vector<BusId> dg_buses;
  std::vector<double> dg_rating_mva;
  PerUnitBase base;
};

struct PerUnitLine {
  BusId from_bus = 0;
  BusId to_bus = 0;
  Complex z_per_km;
  double length_km = 1.0;

  Complex z() const { return z_per_km * length_km; }
};

struct PerUnitLoad {
  BusId bus = 0;
  Complex s;  // at scale 1, consumption positive
  double scale = 1.0;

  Complex demand() const { return s * scale; }
};

struct PerUnitTransformer {
  BusId bus = 0;
  double rating_mva = 0.0;
  double hv_kv = 0.0;
  double lv_kv = 0.0;
  Complex z;  // on the system base
};

/// The same network with every quantity on the common per-unit base.
struct PerUnitNetwork {
  std::string name;
  PerUnitBase base;
  std::vector<BusId> buses;
  BusId substation_bus = 1;
  Complex z_source;
  double v_source = 1.0;
  PerUnitTransformer substation_transformer;
  std::vector<PerUnitLine> lines;
  std::vector<PerUnitTransformer> interface_transformers;
  std::vector<PerUnitLoad> loads;
  std::vector<BusId> dg_buses;
  std::vector<double> dg_rating;  // pu
};

PerUnitNetwork to_per_unit(const NetworkSpec& spec);
NetworkSpec from_per_unit(const PerUnitNetwork& pu);

/// Validated, immutable radial network with precomputed topology.
///
/// Buses are indexed 0..bus_count()-1 in the order they are listed. Each DG
/// additionally owns a terminal node (its point of common coupling) behind
/// its interface transformer.
class NetworkModel {
 public:
  explicit NetworkModel(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const PerUnitNetwork& per_unit() const { return pu_; }

  std::size_t bus_count() const { return pu_.buses.size(); }
  std::size_t dg_count() const { return pu_.dg_buses.size(); }
  BusId bus_id(std::size_t index) const { return pu_.buses[index]; }
  std::size_t index_of(BusId bus) const;
  bool has_bus(BusId bus) const;
  std::optional<std::size_t> dg_index(BusId bus) const;
  std::size_t require_dg(BusId bus) const;

  /// Parent bus index on the path to the source; -1 for the substation bus.
  int parent(std::size_t index) const { return parent_[index]; }
  /// Bus indices ordered outward from the substation.
  const std::vector<std::size_t>& sweep_order() const { return order_; }
  /// Series impedance between a bus and its parent (source impedance for the
  /// substation bus).
  Complex branch_impedance(std::size_t index) const { return branch_z_[index]; }
  Complex interface_impedance(std::size_t dg) const { return pu_.interface_transformers[dg].z; }
  double dg_rating(std::size_t dg) const { return pu_.dg_rating[dg]; }
  double source_voltage() const { return pu_.v_source; }
  /// Net load at each bus (pu, consumption positive).
  const std::vector<Complex>& bus_demand() const { return demand_; }
  /// Hops from the substation bus.
  int depth(std::size_t index) const { return depth_[index]; }

  NetworkModel with_load_scale(double factor) const;
  NetworkModel with_load_scales(std::span<const double> factors) const;

 private:
  NetworkSpec spec_;
  PerUnitNetwork pu_;
  std::vector<int> parent_;
  std::vector<int> depth_;
  std::vector<std::size_t> order_;
  std::vector<Complex> branch_z_;
  std::vector<Complex> demand_;
};

/// Driving-point impedance at a feeder bus: source plus the series line path.
Complex thevenin_impedance(const NetworkModel& model, BusId bus);
/// Driving-point impedance at a DG's point of common coupling (the feeder
/// path plus the DG interface transformer).
Complex pcc_thevenin_impedance(const NetworkModel& model, BusId dg_bus);

// Benchmark feeder -----------------------------------------------------------

inline constexpr double kLineR = 0.1529;  // ohm/km
inline constexpr double kLineX = 0.1406;  // ohm/km

/// Uniform profile: `p_mw` at every non-substation bus, at power factor `pf`.
std::vector<LoadSpec> uniform_load_profile(double p_mw, double pf = 0.95);

/// Load profile whose no-attack PCC voltage at DG1 is 1.011 pu with the
/// default inverter settings (frozen output of the calibration routine).
std::vector<LoadSpec> calibration_load_profile();

/// Nine-bus urban benchmark: substation bus 1, feeders 1-2-3-4-5 and
/// 1-6-7-8-9, DGs at buses 4, 5, 6, 9. `line_lengths_km` is indexed like the
/// line list (empty means 1 km everywhere).
NetworkSpec benchmark_spec(std::span<const LoadSpec> load_profile,
                           std::span<const double> line_lengths_km = {});
NetworkModel build_benchmark_network(std::span<const LoadSpec> load_profile,
                                     std::span<const double> line_lengths_km = {});
NetworkModel default_benchmark_network();

// Config files ---------------------------------------------------------------

NetworkSpec load_network_config(const std::string& path);
void save_network_config(const std::string& path, const NetworkSpec& spec);
std::string network_config_to_string(const NetworkSpec& spec);
NetworkSpec network_config_from_string(const std::string& text);
/// Path of the bundled benchmark config.
std::string bundled_network_config();

}  // namespace vvcguard::grid
