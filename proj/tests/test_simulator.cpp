#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "vvcguard/errors.hpp"
#include "vvcguard/simulator.hpp"
#include "vvcguard/trace_io.hpp"

#include <sstream>

using namespace vvcguard;
using namespace vvcguard::sim;

namespace {

const vvc::DroopCurve kAttack{0.95, 1.02, 1.04, 1.05, +1};

double peak_to_peak(const SimTrace& t, double from, double to) {
  double lo = 10.0, hi = -10.0;
  for (const auto& r : t.rows) {
    if (r.t >= from - 1e-9 && r.t <= to + 1e-9) {
      lo = std::min(lo, r.v_mag[0]);
      hi = std::max(hi, r.v_mag[0]);
    }
  }
  return hi - lo;
}

}  // namespace

TEST_CASE("legitimate curve settles at the calibrated voltage") {
  const auto model = grid::default_benchmark_network();
  const auto trace = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, vvc::kDefaultCurve, ClosedLoopConfig{});
  for (const auto& r : trace.rows) {
    if (r.t > 1.0) CHECK(std::abs(r.v_mag[0] - 1.011) < 1e-3);
  }
}

TEST_CASE("attack curve oscillates") {
  const auto model = grid::default_benchmark_network();
  const auto trace = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, ClosedLoopConfig{});
  CHECK(peak_to_peak(trace, 11.0, 13.0) > 0.002);
  CHECK(peak_to_peak(trace, 12.0, 13.0) >= 0.8 * peak_to_peak(trace, 11.0, 12.0));
  CHECK(peak_to_peak(trace, 1.0, 2.99) < 0.001);
}

TEST_CASE("zero control authority behaves like no VVC") {
  const auto model = grid::default_benchmark_network();
  vvc::InverterParams p;
  p.p_ref = p.s_max;
  ClosedLoopConfig cfg;
  cfg.measurement_noise = 0.0;
  const auto a = run_closed_loop(model, 4, p, vvc::kDefaultCurve, kAttack, cfg);
  const auto b = run_closed_loop(model, 4, p, vvc::kDefaultCurve, vvc::kDefaultCurve, cfg);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].q == 0.0);
    CHECK(a.rows[k].v_mag[0] == b.rows[k].v_mag[0]);
  }
  CHECK(peak_to_peak(a, 3.0, 13.0) == 0.0);
}

TEST_CASE("trace shape, symmetry and determinism") {
  const auto model = grid::default_benchmark_network();
  ClosedLoopConfig cfg;
  cfg.seed = 99;
  const auto a = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, cfg);
  const auto b = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, cfg);
  REQUIRE(a.rows.size() == cfg.step_count());
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    CHECK(a.rows[k].t == b.rows[k].t);
    CHECK(a.rows[k].v_mag == b.rows[k].v_mag);
    CHECK(a.rows[k].q == b.rows[k].q);
    CHECK(a.rows[k].v_mag[0] == a.rows[k].v_mag[1]);
    CHECK(a.rows[k].v_mag[1] == a.rows[k].v_mag[2]);
    CHECK(a.rows[k].i_mag[0] == a.rows[k].i_mag[2]);
    if (k > 0) CHECK(a.rows[k].t - a.rows[k - 1].t == doctest::Approx(cfg.dt));
    CHECK(a.rows[k].curve_id == (a.rows[k].t >= cfg.attack_time - 1e-9 ? 1 : 0));
  }
}

TEST_CASE("settled loop stays settled when the curve is resent") {
  const auto model = grid::default_benchmark_network();
  ClosedLoopConfig cfg;
  cfg.measurement_noise = 0.0;
  const auto t = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, vvc::kDefaultCurve, cfg);
  std::size_t still = 0;
  for (std::size_t k = 1; k < t.index_at(cfg.attack_time); ++k) {
    still = std::abs(t.rows[k].q - t.rows[k - 1].q) < 1e-9 ? still + 1 : 0;
  }
  REQUIRE(still >= 50);
  for (std::size_t k = t.index_at(cfg.attack_time); k < t.rows.size(); ++k) {
    CHECK(std::abs(t.rows[k].q - t.rows[k - 1].q) < 1e-9);
  }
}

TEST_CASE("dq rotation") {
  TraceRow row;
  row.v_mag = {1.02, 1.02, 1.02};
  row.i_mag = {0.05, 0.05, 0.05};
  row.v_angle = 0.3;
  row.i_angle = 0.3 - std::acos(-1.0) / 2.0;
  auto dq = dq_at_step(row, 0.3);
  CHECK(dq.vd == doctest::Approx(1.02));
  CHECK(std::abs(dq.vq) < 1e-15);
  CHECK(std::abs(dq.id) < 1e-15);
  CHECK(std::abs(dq.iq) == doctest::Approx(0.05));

  // Hand rotation of a logged replay step.
  const auto model = grid::default_benchmark_network();
  const auto trace = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, ClosedLoopConfig{});
  const auto& r = trace.rows[trace.index_at(7.5)];
  const double c = std::cos(trace.theta_ref), s = std::sin(trace.theta_ref);
  const double vx = r.v_mag[0] * std::cos(r.v_angle), vy = r.v_mag[0] * std::sin(r.v_angle);
  CHECK(r.vd == doctest::Approx(c * vx + s * vy).epsilon(1e-12));
  CHECK(r.vq == doctest::Approx(-s * vx + c * vy).epsilon(1e-12));
  const double ix = r.i_mag[0] * std::cos(r.i_angle), iy = r.i_mag[0] * std::sin(r.i_angle);
  CHECK(r.id == doctest::Approx(c * ix + s * iy).epsilon(1e-12));
  CHECK(r.iq == doctest::Approx(-s * ix + c * iy).epsilon(1e-12));
  CHECK(std::abs(trace.rows[trace.index_at(3.0)].vq) < 1e-15);
}

TEST_CASE("recorded current equals S/V at the logged snapshot") {
  const auto model = grid::default_benchmark_network();
  ClosedLoopConfig cfg;
  cfg.measurement_noise = 0.0;
  const vvc::InverterParams p;
  const auto trace = run_closed_loop(model, 4, p, vvc::kDefaultCurve, kAttack, cfg);
  const auto& r = trace.rows[trace.index_at(3.0)];
  const double s = std::hypot(p.p_ref, r.q);
  CHECK(r.i_mag[0] == doctest::Approx(s / r.v_mag[0]).epsilon(1e-12));
}

TEST_CASE("windows") {
  const auto model = grid::default_benchmark_network();
  const auto trace = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, ClosedLoopConfig{});
  const auto [pre, post] = extract_window(trace, 3.0, 2.0, 10.0);
  CHECK(pre.rows.size() == 200);
  CHECK(post.rows.size() == 1001);
  CHECK(pre.rows.front().t == doctest::Approx(1.0));
  CHECK(pre.rows.back().t < 3.0);
  CHECK(post.rows.front().t == doctest::Approx(3.0));
  CHECK(post.rows.back().t == doctest::Approx(13.0));
  CHECK(pre.theta_ref == pre.rows.front().v_angle);
  CHECK_THROWS_AS(extract_window(trace, 3.0, 4.0, 1.0), RangeError);
  CHECK_THROWS_AS(extract_window(trace, 3.0, 1.0, 11.0), RangeError);
}

TEST_CASE("config and input checks") {
  const auto model = grid::default_benchmark_network();
  ClosedLoopConfig cfg;
  cfg.attack_time = 20.0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
  CHECK_THROWS_AS(run_closed_loop(model, 2, vvc::InverterParams{}, vvc::kDefaultCurve, vvc::kDefaultCurve, ClosedLoopConfig{}),
                  ReferenceError);
  CHECK_THROWS_AS(run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve,
                                  vvc::DroopCurve{1.0, 0.9, 1.02, 1.05, +1}, ClosedLoopConfig{}),
                  MalformedCurveError);
}

TEST_CASE("collapse surfaces as a simulation error with the step") {
  const auto heavy = grid::default_benchmark_network().with_load_scale(60.0);
  try {
    run_closed_loop(heavy, 4, vvc::InverterParams{}, vvc::kDefaultCurve, vvc::kDefaultCurve, ClosedLoopConfig{});
    FAIL("expected a failure");
  } catch (const SimulationError&) {
  } catch (const InfeasibleError&) {
    // Collapse already during the initial settle.
  }
}

TEST_CASE("trace file round trip") {
  const auto model = grid::default_benchmark_network();
  const auto trace = run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, kAttack, ClosedLoopConfig{});
  std::stringstream buf;
  write_trace_csv(buf, trace);
  const auto back = read_trace_csv(buf);
  REQUIRE(back.rows.size() == trace.rows.size());
  CHECK(back.attack_time == doctest::Approx(3.0));
  CHECK(back.theta_ref == trace.theta_ref);
  for (std::size_t k = 0; k < trace.rows.size(); ++k) {
    CHECK(back.rows[k].v_mag == trace.rows[k].v_mag);
    CHECK(back.rows[k].vd == trace.rows[k].vd);
    CHECK(back.rows[k].curve_id == trace.rows[k].curve_id);
  }
  std::stringstream bad("t,V1\n0,1\n");
  CHECK_THROWS_AS(read_trace_csv(bad), FormatError);
}
