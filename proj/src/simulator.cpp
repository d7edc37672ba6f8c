#include "vvcguard/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "vvcguard/errors.hpp"

namespace vvcguard::sim {

namespace {

constexpr double kSettleDamping = 0.3;
constexpr double kSettleTol = 1e-12;

std::vector<powerflow::Injection> injections_for(std::span<const DgSetup> fleet,
                                                 std::span<const double> q) {
  std::vector<powerflow::Injection> out;
  out.reserve(fleet.size());
  for (std::size_t j = 0; j < fleet.size(); ++j) {
    out.push_back(powerflow::Injection{fleet[j].bus, fleet[j].params.p_ref, q[j]});
  }
  return out;
}

std::size_t steps_per(double period, double dt) {
  const auto n = static_cast<long>(std::llround(period / dt));
  return static_cast<std::size_t>(std::max(1L, n));
}

}  // namespace

void ClosedLoopConfig::validate() const {
  if (!(dt > 0.0)) throw DomainError("simulation step must be positive");
  if (!(dt <= attack_time && attack_time < duration)) {
    throw DomainError("closed-loop config requires 0 < dt <= attack_time < duration");
  }
  if (!(record_pre >= 0.0 && record_pre <= attack_time)) {
    throw DomainError("pre-update window must fit before the update");
  }
  if (!(measurement_noise >= 0.0)) throw DomainError("measurement noise must be non-negative");
}

std::size_t ClosedLoopConfig::step_count() const {
  return static_cast<std::size_t>(std::llround(duration / dt)) + 1;
}

std::size_t ClosedLoopConfig::step_of(double t) const {
  return static_cast<std::size_t>(std::llround(t / dt));
}

std::vector<DgSetup> default_background(const grid::NetworkModel& model, BusId dg_under_test) {
  std::vector<DgSetup> out;
  for (std::size_t d = 0; d < model.dg_count(); ++d) {
    const BusId bus = model.per_unit().dg_buses[d];
    if (bus == dg_under_test) continue;
    vvc::InverterParams params;
    params.s_max = model.dg_rating(d);
    params.p_ref = 0.6 * params.s_max;
    out.push_back(DgSetup{bus, params, kBackgroundCurve});
  }
  return out;
}

std::size_t SimTrace::index_at(double t) const {
  const double k = std::round(t / dt);
  if (k < 0.0 || k >= static_cast<double>(rows.size())) {
    throw RangeError("time " + std::to_string(t) + " s lies outside the trace");
  }
  return static_cast<std::size_t>(k);
}

DqValues dq_at_step(const TraceRow& row, double theta_ref) {
  const double dv = row.v_angle - theta_ref;
  const double di = row.i_angle - theta_ref;
  const double vm = row.v_mag[0];
  const double im = row.i_mag[0];
  return DqValues{vm * std::cos(dv), vm * std::sin(dv), im * std::cos(di), im * std::sin(di)};
}

std::pair<TraceWindow, TraceWindow> extract_window(const SimTrace& trace, double center,
                                                   double before, double after) {
  if (!(before > 0.0) || !(after >= 0.0)) throw RangeError("window lengths must be positive");
  const double k_lo = std::round((center - before) / trace.dt);
  const double k_mid = std::round(center / trace.dt);
  const double k_hi = std::round((center + after) / trace.dt);
  if (k_lo < 0.0 || k_hi >= static_cast<double>(trace.rows.size())) {
    throw RangeError("window does not fit inside the trace");
  }
  const auto lo = static_cast<std::size_t>(k_lo);
  const auto mid = static_cast<std::size_t>(k_mid);
  const auto hi = static_cast<std::size_t>(k_hi);
  std::span<const TraceRow> all(trace.rows);
  TraceWindow pre{all.subspan(lo, mid - lo), trace.rows[lo].v_angle};
  TraceWindow post{all.subspan(mid, hi - mid + 1), trace.rows[mid].v_angle};
  return {pre, post};
}

SettledState settle(const grid::NetworkModel& model, std::span<const DgSetup> fleet,
                    const powerflow::SolveOptions& solver, int max_iter) {
  SettledState state;
  state.q.assign(fleet.size(), 0.0);
  std::vector<double> q_max(fleet.size());
  for (std::size_t j = 0; j < fleet.size(); ++j) q_max[j] = vvc::q_max(fleet[j].params);

  const powerflow::BusVoltages* warm = nullptr;
  for (int iter = 0; iter < max_iter; ++iter) {
    const auto inj = injections_for(fleet, state.q);
    state.voltages = powerflow::solve(model, inj, solver, warm);
    warm = &state.voltages;
    double worst = 0.0;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
      const double v = std::abs(state.voltages.pcc_at(model, fleet[j].bus));
      const double target = fleet[j].vvc_enabled ? vvc::droop_qref(fleet[j].curve, v, q_max[j]) : 0.0;
      worst = std::max(worst, std::abs(target - state.q[j]));
      state.q[j] += kSettleDamping * (target - state.q[j]);
    }
    if (worst < kSettleTol) {
      state.converged = true;
      break;
    }
  }
  state.voltages = powerflow::solve(model, injections_for(fleet, state.q), solver, &state.voltages);
  return state;
}

SimTrace run_closed_loop(const grid::NetworkModel& model, BusId dg, const vvc::InverterParams& params,
                         const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                         const ClosedLoopConfig& cfg, std::span<const DgSetup> background) {
  cfg.validate();
  params.validate();
  vvc::validate(old_curve);
  vvc::validate(new_curve);
  model.require_dg(dg);
  if (cfg.dt > params.tau) throw DomainError("simulation step must not exceed tau");

  std::vector<DgSetup> fleet;
  fleet.push_back(DgSetup{dg, params, old_curve});
  for (const auto& other : background) {
    if (other.bus == dg) throw DomainError("background DG duplicates the DG under test");
    fleet.push_back(other);
  }
  const std::size_t n = fleet.size();

  SettledState start = settle(model, fleet, cfg.solver);
  std::vector<double> q = start.q;
  std::vector<double> q_cmd = start.q;
  std::vector<double> q_max(n);
  std::vector<std::size_t> period(n);
  for (std::size_t j = 0; j < n; ++j) {
    q_max[j] = vvc::q_max(fleet[j].params);
    period[j] = steps_per(fleet[j].params.dt, cfg.dt);
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto measure = [&](double v) { return cfg.measurement_noise > 0.0 ? v + cfg.measurement_noise * noise(rng) : v; };

  std::vector<double> v_meas(n);
  for (std::size_t j = 0; j < n; ++j) v_meas[j] = measure(std::abs(start.voltages.pcc_at(model, fleet[j].bus)));

  const std::size_t steps = cfg.step_count();
  const std::size_t k_attack = cfg.step_of(cfg.attack_time);

  SimTrace trace;
  trace.dt = cfg.dt;
  trace.attack_time = cfg.attack_time;
  trace.rows.reserve(steps);

  powerflow::BusVoltages voltages = start.voltages;
  std::vector<powerflow::Injection> inj = injections_for(fleet, q);
  for (std::size_t k = 0; k < steps; ++k) {
    const bool switched = k >= k_attack;
    fleet[0].curve = switched ? new_curve : old_curve;

    for (std::size_t j = 0; j < n; ++j) {
      if (k % period[j] == 0 || (j == 0 && k == k_attack)) {
        q_cmd[j] = vvc::droop_qref(fleet[j].curve, v_meas[j], q_max[j]);
      }
      q[j] += (cfg.dt / fleet[j].params.tau) * (q_cmd[j] - q[j]);
      inj[j].q = q[j];
    }

    try {
      voltages = powerflow::solve(model, inj, cfg.solver, &voltages);
    } catch (const InfeasibleError& e) {
      throw SimulationError(std::string("network collapsed: ") + e.what(), k);
    } catch (const ConvergenceError& e) {
      throw SimulationError(std::string("power flow diverged: ") + e.what(), k);
    }

    for (std::size_t j = 0; j < n; ++j) v_meas[j] = measure(std::abs(voltages.pcc_at(model, fleet[j].bus)));

    const grid::Complex v = voltages.pcc_at(model, dg);
    const grid::Complex i = powerflow::injection_current(v, params.p_ref, q[0]);
    TraceRow row;
    row.t = static_cast<double>(k) * cfg.dt;
    row.v_mag.fill(v_meas[0]);
    row.i_mag.fill(std::abs(i));
    row.v_angle = std::arg(v);
    row.i_angle = std::arg(i);
    row.q = q[0];
    row.curve_id = switched ? 1 : 0;
    trace.rows.push_back(row);
  }

  trace.theta_ref = trace.rows[std::min(k_attack, steps - 1)].v_angle;
  for (auto& row : trace.rows) {
    const DqValues dq = dq_at_step(row, trace.theta_ref);
    row.vd = dq.vd;
    row.vq = dq.vq;
    row.id = dq.id;
    row.iq = dq.iq;
  }
  return trace;
}

SimTrace run_closed_loop(const grid::NetworkModel& model, BusId dg, const vvc::InverterParams& params,
                         const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                         const ClosedLoopConfig& cfg) {
  const auto background = default_background(model, dg);
  return run_closed_loop(model, dg, params, old_curve, new_curve, cfg, background);
}

double settled_pcc_voltage(const grid::NetworkModel& model, BusId dg,
                           const vvc::InverterParams& params, const vvc::DroopCurve& curve) {
  std::vector<DgSetup> fleet{DgSetup{dg, params, curve}};
  for (const auto& other : default_background(model, dg)) fleet.push_back(other);
  const auto state = settle(model, fleet);
  return std::abs(state.voltages.pcc_at(model, dg));
}

double calibrate_load_scale(const grid::NetworkSpec& spec, BusId dg, const vvc::InverterParams& params,
                            const vvc::DroopCurve& curve, double target_v, double tol) {
  const grid::NetworkModel base(spec);
  auto voltage_at = [&](double scale) {
    return settled_pcc_voltage(base.with_load_scale(scale), dg, params, curve);
  };
  double lo = 1e-6;
  double hi = 8.0;
  if (voltage_at(lo) < target_v || voltage_at(hi) > target_v) {
    throw DomainError("target voltage is not reachable by scaling the load profile");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (voltage_at(mid) > target_v ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace vvcguard::sim
