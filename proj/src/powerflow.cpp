#include "vvcguard/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vvcguard/errors.hpp"

namespace vvcguard::powerflow {

namespace {

constexpr double kCollapseVoltage = 0.5;

// Net demand per node (buses, then DG terminals); consumption positive.
std::vector<Complex> node_demand(const grid::NetworkModel& model,
                                 std::span<const Injection> injections) {
  const std::size_t nb = model.bus_count();
  std::vector<Complex> demand(nb + model.dg_count(), Complex{});
  std::copy(model.bus_demand().begin(), model.bus_demand().end(), demand.begin());
  for (const auto& inj : injections) {
    const Complex s(inj.p, inj.q);
    if (const auto d = model.dg_index(inj.bus)) {
      demand[nb + *d] -= s;
    } else {
      demand[model.index_of(inj.bus)] -= s;
    }
  }
  return demand;
}

}  // namespace

BusVoltages solve(const grid::NetworkModel& model, std::span<const Injection> injections,
                  const SolveOptions& options, const BusVoltages* warm_start) {
  if (!(options.tol > 0.0)) throw DomainError("power-flow tolerance must be positive");
  if (options.max_iter < 1) throw DomainError("power-flow max_iter must be at least 1");

  const std::size_t nb = model.bus_count();
  const std::size_t nd = model.dg_count();
  const auto demand = node_demand(model, injections);
  const Complex vs(model.source_voltage(), 0.0);

  BusVoltages out;
  out.source = vs;
  if (warm_start && warm_start->bus.size() == nb && warm_start->pcc.size() == nd) {
    out.bus = warm_start->bus;
    out.pcc = warm_start->pcc;
  } else {
    out.bus.assign(nb, vs);
    out.pcc.assign(nd, vs);
  }

  const auto& order = model.sweep_order();
  std::vector<Complex> load_current(nb + nd);
  std::vector<Complex> flow(nb);  // into each bus from its parent

  double mismatch = 0.0;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    for (std::size_t i = 0; i < nb; ++i) load_current[i] = std::conj(demand[i] / out.bus[i]);
    for (std::size_t d = 0; d < nd; ++d) load_current[nb + d] = std::conj(demand[nb + d] / out.pcc[d]);

    // Backward sweep: accumulate currents toward the source.
    std::fill(flow.begin(), flow.end(), Complex{});
    for (std::size_t d = 0; d < nd; ++d) {
      flow[model.index_of(model.per_unit().dg_buses[d])] += load_current[nb + d];
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::size_t i = *it;
      flow[i] += load_current[i];
      if (const int p = model.parent(i); p >= 0) flow[static_cast<std::size_t>(p)] += flow[i];
    }

    // Forward sweep: update voltages outward.
    for (std::size_t i : order) {
      const int p = model.parent(i);
      const Complex upstream = p < 0 ? vs : out.bus[static_cast<std::size_t>(p)];
      out.bus[i] = upstream - model.branch_impedance(i) * flow[i];
    }
    for (std::size_t d = 0; d < nd; ++d) {
      const Complex feeder = out.bus[model.index_of(model.per_unit().dg_buses[d])];
      out.pcc[d] = feeder - model.interface_impedance(d) * load_current[nb + d];
    }

    mismatch = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
      if (std::abs(out.bus[i]) < kCollapseVoltage) {
        throw InfeasibleError("voltage collapse at bus " + std::to_string(model.bus_id(i)));
      }
      mismatch = std::max(mismatch, std::abs(out.bus[i] * std::conj(load_current[i]) - demand[i]));
    }
    for (std::size_t d = 0; d < nd; ++d) {
      if (std::abs(out.pcc[d]) < kCollapseVoltage) {
        throw InfeasibleError("voltage collapse at DG terminal " +
                              std::to_string(model.per_unit().dg_buses[d]));
      }
      mismatch = std::max(mismatch, std::abs(out.pcc[d] * std::conj(load_current[nb + d]) - demand[nb + d]));
    }
    if (!std::isfinite(mismatch)) throw InfeasibleError("power flow diverged");
    if (mismatch < options.tol) {
      out.iterations = iter;
      out.mismatch = mismatch;
      return out;
    }
  }
  throw ConvergenceError("power flow did not converge in " + std::to_string(options.max_iter) +
                             " iterations",
                         mismatch);
}

BranchCurrents branch_currents(const grid::NetworkModel& model, const BusVoltages& v) {
  const std::size_t nb = model.bus_count();
  BranchCurrents out;
  out.bus.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const int p = model.parent(i);
    const Complex upstream = p < 0 ? v.source : v.bus[static_cast<std::size_t>(p)];
    out.bus[i] = (upstream - v.bus[i]) / model.branch_impedance(i);
  }
  for (std::size_t d = 0; d < model.dg_count(); ++d) {
    const Complex feeder = v.bus[model.index_of(model.per_unit().dg_buses[d])];
    out.interface.push_back((feeder - v.pcc[d]) / model.interface_impedance(d));
  }
  return out;
}

double power_mismatch(const grid::NetworkModel& model, std::span<const Injection> injections,
                      const BusVoltages& v) {
  const std::size_t nb = model.bus_count();
  const auto demand = node_demand(model, injections);
  const auto currents = branch_currents(model, v);

  // Net current drawn at each node = inflow - outflow.
  std::vector<Complex> drawn(currents.bus);
  for (std::size_t i = 0; i < nb; ++i) {
    if (const int p = model.parent(i); p >= 0) drawn[static_cast<std::size_t>(p)] -= currents.bus[i];
  }
  double worst = 0.0;
  for (std::size_t d = 0; d < model.dg_count(); ++d) {
    drawn[model.index_of(model.per_unit().dg_buses[d])] -= currents.interface[d];
    worst = std::max(worst, std::abs(v.pcc[d] * std::conj(currents.interface[d]) - demand[nb + d]));
  }
  for (std::size_t i = 0; i < nb; ++i) {
    worst = std::max(worst, std::abs(v.bus[i] * std::conj(drawn[i]) - demand[i]));
  }
  return worst;
}

PowerBalance power_balance(const grid::NetworkModel& model, std::span<const Injection> injections,
                           const BusVoltages& v) {
  const auto demand = node_demand(model, injections);
  const auto currents = branch_currents(model, v);
  PowerBalance balance;
  const std::size_t root = model.index_of(model.per_unit().substation_bus);
  balance.source = v.source * std::conj(currents.bus[root]);
  for (const auto& s : demand) balance.demand += s;
  for (std::size_t i = 0; i < model.bus_count(); ++i) {
    balance.losses += model.branch_impedance(i) * std::norm(currents.bus[i]);
  }
  for (std::size_t d = 0; d < model.dg_count(); ++d) {
    balance.losses += model.interface_impedance(d) * std::norm(currents.interface[d]);
  }
  return balance;
}

Complex injection_current(Complex v, double p, double q) {
  if (std::abs(v) == 0.0) throw SingularityError("current undefined at zero voltage");
  return std::conj(Complex(p, q) / v);
}

Complex pcc_current(const grid::NetworkModel& model, const BusVoltages& voltages,
                    const Injection& injection) {
  const Complex v = model.dg_index(injection.bus) ? voltages.pcc_at(model, injection.bus)
                                                  : voltages.at(model, injection.bus);
  return injection_current(v, injection.p, injection.q);
}

}  // namespace vvcguard::powerflow
