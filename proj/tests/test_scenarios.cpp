#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "vvcguard/errors.hpp"
#include "vvcguard/scenarios.hpp"

using namespace vvcguard;
using namespace vvcguard::scenarios;

namespace {

sim::SimTrace synthetic(double amplitude, double decay_per_s, double attack = 3.0, double duration = 13.0) {
  sim::SimTrace t;
  t.dt = 0.01;
  t.attack_time = attack;
  const auto n = static_cast<std::size_t>(std::llround(duration / t.dt)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    sim::TraceRow r;
    r.t = static_cast<double>(k) * t.dt;
    const double a = r.t < attack ? 0.0 : amplitude * std::exp(-decay_per_s * (r.t - attack));
    const double v = 1.01 + a * std::sin(2.0 * std::acos(-1.0) * r.t);
    r.v_mag = {v, v, v};
    t.rows.push_back(r);
  }
  return t;
}

OperatingCondition default_op() {
  const auto model = grid::default_benchmark_network();
  return operating_condition(model, 4, vvc::InverterParams{}, sim::default_background(model, 4));
}

}  // namespace

TEST_CASE("attack construction") {
  AttackDescriptor a;
  a.kind = AttackKind::shift;
  a.alpha = {0.01, 0.01, 0.01, 0.01};
  CHECK(apply_attack(vvc::kDefaultCurve, a) == vvc::translate(vvc::kDefaultCurve, 0.01));

  a.kind = AttackKind::stealth_chord;
  a.alpha = {0.0, 0.04, 0.02, 0.0};
  const auto stealth = apply_attack(vvc::kDefaultCurve, a);
  CHECK(stealth.vb == doctest::Approx(1.02));
  CHECK(stealth.vc == doctest::Approx(1.04));
  CHECK(vvc::chord_slope(stealth, 1.0) == doctest::Approx(vvc::chord_slope(vvc::kDefaultCurve, 1.0)));
  a.alpha = {0.01, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(apply_attack(vvc::kDefaultCurve, a), AttackConstructionError);

  a = AttackDescriptor{};
  a.kind = AttackKind::steepen;
  a.target_slopes = {0.0, 100.0};
  const auto steep = apply_attack(vvc::kDefaultCurve, a);
  CHECK(steep.vc == doctest::Approx(1.04));
  CHECK(steep.vd == 1.05);
  a.target_slopes = {0.0, 10.0};
  CHECK_THROWS_AS(apply_attack(vvc::kDefaultCurve, a), AttackConstructionError);
  a.target_slopes = {0.0, 0.0};
  CHECK_THROWS_AS(apply_attack(vvc::kDefaultCurve, a), AttackConstructionError);

  a = AttackDescriptor{};
  a.kind = AttackKind::invert;
  CHECK(apply_attack(vvc::kDefaultCurve, a).orientation == -1);

  a = AttackDescriptor{};
  a.kind = AttackKind::shift;
  a.alpha = {0.05, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(apply_attack(vvc::kDefaultCurve, a), AttackConstructionError);
  CHECK_THROWS_AS(apply_attack(vvc::DroopCurve{1.0, 0.9, 1.0, 1.1, 1}, AttackDescriptor{}), MalformedCurveError);
}

TEST_CASE("kind names") {
  for (auto k : {AttackKind::none, AttackKind::shift, AttackKind::steepen, AttackKind::stealth_chord,
                 AttackKind::invert}) {
    CHECK(parse_kind(kind_name(k)) == k);
  }
  CHECK(kind_name(AttackKind::stealth_chord) == "stealth-chord");
  CHECK_THROWS(parse_kind("bogus"));
}

TEST_CASE("oscillation oracle on synthetic traces") {
  CHECK(label_by_oscillation(synthetic(0.0, 0.0)) == Label::legitimate);
  CHECK(label_by_oscillation(synthetic(0.01, 0.0)) == Label::malicious);
  CHECK(label_by_oscillation(synthetic(0.01, 1.0)) == Label::legitimate);    // damped to nothing
  CHECK(label_by_oscillation(synthetic(0.05, 0.5)) == Label::legitimate);    // still large but decaying
  CHECK(label_by_oscillation(synthetic(0.0009, 0.0)) == Label::legitimate);  // below threshold
  CHECK(label_by_oscillation(synthetic(0.01, 0.0, 3.0, 6.0)) == Label::malicious);
  CHECK_THROWS_AS(label_by_oscillation(synthetic(0.01, 0.0, 3.0, 4.5)), RangeError);
}

TEST_CASE("analytic gain") {
  const auto op = default_op();
  CHECK(op.x_th == doctest::Approx(1.094).epsilon(0.01));
  CHECK(op.q_max == doctest::Approx(std::sqrt(0.0075)));
  const vvc::DroopCurve attack{0.95, 1.02, 1.04, 1.05, +1};
  const double v = equilibrium_voltage(attack, op);
  // The free voltage sits on the widened lower segment.
  CHECK(v > 0.95);
  CHECK(v < 1.02);
  CHECK(equilibrium_gain(attack, op) == doctest::Approx(op.q_max / 0.07 * op.x_th));
  CHECK(equilibrium_gain(attack, op) > 1.0);
  CHECK(predicts_oscillation(attack, op));
  CHECK_FALSE(predicts_oscillation(vvc::kDefaultCurve, op));
  vvc::DroopCurve inv = attack;
  inv.orientation = -1;
  CHECK_FALSE(predicts_oscillation(inv, op));

  // Fixed point of the linearized loop.
  const double vd = equilibrium_voltage(vvc::kDefaultCurve, op);
  CHECK(vd == doctest::Approx(op.v_free + op.x_th * vvc::droop_qref(vvc::kDefaultCurve, vd, op.q_max)).epsilon(1e-9));

  const auto model = grid::default_benchmark_network();
  CHECK(analytic_stability_check(model, 4, attack, 1.045) == doctest::Approx(op.x_th * op.q_max / 0.01).epsilon(0.02));
  CHECK(analytic_stability_check(model, 4, attack, 1.03) == 0.0);
  CHECK(loop_gain(attack, 1.045, op) == doctest::Approx(op.x_th * op.q_max / 0.01));
}

TEST_CASE("legitimate sampler") {
  const auto op = default_op();
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const auto c = sample_legitimate_curve(rng, 0.7, op);
    CHECK(vvc::is_well_formed(c));
    CHECK(c.orientation == 1);
    CHECK(equilibrium_gain(c, op) < 0.7);
  }
  CHECK_THROWS_AS(sample_legitimate_curve(rng, 0.0, op), SamplingError);
  CHECK_THROWS_AS(sample_legitimate_curve(rng, 1.2, op), DomainError);
}

TEST_CASE("split assignment") {
  std::vector<Scenario> data(100);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].id = i;
    data[i].label = i < 50 ? Label::legitimate : Label::malicious;
  }
  assign_split(data, 0.2, 3);
  std::size_t test0 = 0, test1 = 0;
  for (const auto& s : data) (s.label == Label::legitimate ? test0 : test1) += s.test ? 1 : 0;
  CHECK(test0 == 10);
  CHECK(test1 == 10);
  auto again = data;
  assign_split(again, 0.2, 3);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(again[i].test == data[i].test);
}

TEST_CASE("per-draw seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(5, i));
  CHECK(seen.size() == 10000);
  CHECK(derive_seed(5, 0) != derive_seed(6, 0));
}

TEST_CASE("small dataset") {
  const auto model = grid::default_benchmark_network();
  GeneratorConfig cfg;
  GenerationStats stats;
  const auto data = generate_dataset(model, 40, 40, 21, cfg, &stats);
  REQUIRE(data.size() == 80);

  std::size_t n0 = 0, n1 = 0;
  std::map<AttackKind, int> kinds;
  for (const auto& s : data) {
    CHECK_FALSE(s.collapsed);
    CHECK(s.features.size() == features::kMonitoredDim);
    CHECK(vvc::is_well_formed(s.new_curve));
    if (s.label == Label::legitimate) {
      ++n0;
      CHECK(s.attack.kind == AttackKind::none);
      CHECK(s.gain < cfg.margin);
    } else {
      ++n1;
      CHECK(s.attack.kind != AttackKind::none);
      ++kinds[s.attack.kind];
    }
    if (s.attack.kind == AttackKind::stealth_chord) {
      CHECK(s.label == Label::malicious);
      const double qm = vvc::q_max(cfg.params.s_max, s.p_ref);
      CHECK(vvc::chord_slope(s.new_curve, qm) == doctest::Approx(vvc::chord_slope(s.old_curve, qm)).epsilon(1e-9));
    }
  }
  CHECK(n0 == 40);
  CHECK(n1 == 40);
  CHECK(stats.draws >= 80);
  // Inverted curves saturate instead of oscillating, so they never survive labeling.
  CHECK(kinds[AttackKind::invert] == 0);
  for (auto k : {AttackKind::shift, AttackKind::steepen, AttackKind::stealth_chord}) CHECK(kinds[k] >= 6);

  // Same seed, same data.
  const auto again = generate_dataset(model, 40, 40, 21, cfg);
  REQUIRE(again.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(again[i].id == data[i].id);
    CHECK(again[i].features == data[i].features);
    CHECK(again[i].test == data[i].test);
  }

  // Re-simulating a stored scenario reproduces its label.
  for (std::size_t i = 0; i < data.size(); i += 8) {
    Scenario s = draw_scenario(model, data[i].id, data[i].seed, cfg, data[i].attack.kind);
    run_scenario(model, s, cfg);
    CHECK(s.label == data[i].label);
    CHECK(s.features == data[i].features);
  }
}

TEST_CASE("generation budget") {
  const auto model = grid::default_benchmark_network();
  GeneratorConfig cfg;
  cfg.weights = KindWeights{1.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_THROWS_AS(generate_dataset(model, 2, 2, 1, cfg), GenerationError);
}
