#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vvcguard/grid.hpp"
#include "vvcguard/powerflow.hpp"
#include "vvcguard/vvc.hpp"

namespace vvcguard::sim {

using grid::BusId;

struct ClosedLoopConfig {
  double duration = 13.0;     // s
  double dt = 0.01;           // s, simulation step
  double attack_time = 3.0;   // s, the new curve becomes active here
  double record_pre = 2.0;    // s of pre-update window kept for features
  std::uint64_t seed = 0;
  double measurement_noise = 1e-5;  // pu, std-dev of voltage measurement noise
  powerflow::SolveOptions solver;

  void validate() const;
  std::size_t step_count() const;  // rows in a trace (both ends included)
  std::size_t step_of(double t) const;
};

/// A DG other than the one under test; it keeps its curve for the whole run.
struct DgSetup {
  BusId bus = 0;
  vvc::InverterParams params;
  vvc::DroopCurve curve;
  bool vvc_enabled = true;  // false holds Q at zero
};

/// Flat stabilizing curve run by the DGs that are not under test.
inline constexpr vvc::DroopCurve kBackgroundCurve{0.82, 0.97, 1.03, 1.18, +1};
std::vector<DgSetup> default_background(const grid::NetworkModel& model, BusId dg_under_test);

struct TraceRow {
  double t = 0.0;
  std::array<double, 3> v_mag{};  // per-phase |V|, pu
  std::array<double, 3> i_mag{};  // per-phase |I|, pu
  double v_angle = 0.0;           // rad, positive sequence
  double i_angle = 0.0;
  double vd = 0.0, vq = 0.0, id = 0.0, iq = 0.0;  // frame of the update instant
  double q = 0.0;                 // injected reactive power, pu
  int curve_id = 0;               // 0 = old curve, 1 = new curve
};

struct SimTrace {
  double dt = 0.01;
  double attack_time = 0.0;
  double theta_ref = 0.0;  // voltage angle at the update instant
  std::vector<TraceRow> rows;

  std::size_t index_at(double t) const;
  double end_time() const { return rows.empty() ? 0.0 : rows.back().t; }
};

/// A contiguous run of trace rows with the dq frame anchored at its first row.
struct TraceWindow {
  std::span<const TraceRow> rows;
  double theta_ref = 0.0;
};

struct DqValues {
  double vd = 0.0, vq = 0.0, id = 0.0, iq = 0.0;
};

/// Rotates the row's phasors into the frame whose d-axis sits at `theta_ref`.
DqValues dq_at_step(const TraceRow& row, double theta_ref);

/// [center - before, center) and [center, center + after].
std::pair<TraceWindow, TraceWindow> extract_window(const SimTrace& trace, double center,
                                                   double before, double after);

/// Damped fixed-point iteration of every DG's droop against the static
/// network. Returns the reactive power of each DG (same order as `fleet`).
struct SettledState {
  std::vector<double> q;
  powerflow::BusVoltages voltages;
  bool converged = false;
};
SettledState settle(const grid::NetworkModel& model, std::span<const DgSetup> fleet,
                    const powerflow::SolveOptions& solver = {}, int max_iter = 2000);

/// Closed loop: sample |V| at the PCC, evaluate the droop every control
/// period, filter the command through the first-order lag, re-solve the
/// network. The DG under test switches from `old_curve` to `new_curve` at
/// `cfg.attack_time`.
SimTrace run_closed_loop(const grid::NetworkModel& model, BusId dg, const vvc::InverterParams& params,
                         const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                         const ClosedLoopConfig& cfg, std::span<const DgSetup> background);
SimTrace run_closed_loop(const grid::NetworkModel& model, BusId dg, const vvc::InverterParams& params,
                         const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                         const ClosedLoopConfig& cfg);

/// Settled PCC voltage of `dg` running `curve`, with default background DGs.
double settled_pcc_voltage(const grid::NetworkModel& model, BusId dg,
                           const vvc::InverterParams& params, const vvc::DroopCurve& curve);

/// Bisection on a uniform load multiplier until the settled PCC voltage of
/// `dg` equals `target_v` within `tol`.
double calibrate_load_scale(const grid::NetworkSpec& spec, BusId dg, const vvc::InverterParams& params,
                            const vvc::DroopCurve& curve, double target_v, double tol = 1e-9);

}  // namespace vvcguard::sim
