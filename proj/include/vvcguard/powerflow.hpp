#pragma once

#include <complex>
#include <span>
#include <vector>

#include "vvcguard/grid.hpp"

namespace vvcguard::powerflow {

using grid::BusId;
using grid::Complex;

/// Power injected into the grid (pu). At a DG bus the injection enters at the
/// DG terminal, behind the interface transformer.
struct Injection {
  BusId bus = 0;
  double p = 0.0;
  double q = 0.0;
};

struct SolveOptions {
  double tol = 1e-8;  // per-node complex power mismatch, pu
  int max_iter = 50;
};

struct BusVoltages {
  Complex source;               // EMF behind the source impedance
  std::vector<Complex> bus;     // indexed like NetworkModel buses
  std::vector<Complex> pcc;     // DG terminals, indexed like dg_buses
  int iterations = 0;
  double mismatch = 0.0;

  Complex at(const grid::NetworkModel& model, BusId id) const { return bus[model.index_of(id)]; }
  Complex pcc_at(const grid::NetworkModel& model, BusId dg_bus) const {
    return pcc[model.require_dg(dg_bus)];
  }
};

/// Backward/forward sweep for the radial feeder with constant-PQ loads.
/// `warm_start`, when given, seeds the iteration.
BusVoltages solve(const grid::NetworkModel& model, std::span<const Injection> injections,
                  const SolveOptions& options = {}, const BusVoltages* warm_start = nullptr);

/// Branch currents implied by a voltage solution: current flowing from each
/// bus's parent into the bus (the source branch for the substation bus), and
/// into each DG terminal from its feeder bus.
struct BranchCurrents {
  std::vector<Complex> bus;
  std::vector<Complex> interface;
};
BranchCurrents branch_currents(const grid::NetworkModel& model, const BusVoltages& v);

/// Largest |S_calc - S_spec| over all nodes, computed from the voltages alone.
double power_mismatch(const grid::NetworkModel& model, std::span<const Injection> injections,
                      const BusVoltages& v);

struct PowerBalance {
  Complex source;   // delivered by the source EMF
  Complex demand;   // loads minus injections
  Complex losses;   // series losses, source impedance included
  double residual() const { return std::abs(source - demand - losses); }
};
PowerBalance power_balance(const grid::NetworkModel& model, std::span<const Injection> injections,
                           const BusVoltages& v);

/// I = conj(S / V) for power `S = p + jq` injected at voltage `v`.
Complex injection_current(Complex v, double p, double q);
Complex pcc_current(const grid::NetworkModel& model, const BusVoltages& voltages,
                    const Injection& injection);

}  // namespace vvcguard::powerflow
