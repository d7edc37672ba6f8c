#include "vvcguard/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <execution>
#include <numeric>

#include "vvcguard/errors.hpp"

namespace vvcguard::scenarios {

namespace {

constexpr int kAttackRetries = 1000;
constexpr int kSlopeRedraws = 200;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double peak_to_peak(const sim::SimTrace& trace, double t0, double t1) {
  const std::size_t lo = trace.index_at(t0);
  const std::size_t hi = trace.index_at(t1);
  double mn = trace.rows[lo].v_mag[0];
  double mx = mn;
  for (std::size_t k = lo; k <= hi; ++k) {
    mn = std::min(mn, trace.rows[k].v_mag[0]);
    mx = std::max(mx, trace.rows[k].v_mag[0]);
  }
  return mx - mn;
}

AttackKind pick_kind(Rng& rng, const KindWeights& w, bool legit_open, bool malicious_open) {
  const double weights[] = {legit_open ? w.none : 0.0, malicious_open ? w.shift : 0.0,
                            malicious_open ? w.steepen : 0.0, malicious_open ? w.stealth_chord : 0.0,
                            malicious_open ? w.invert : 0.0};
  if (std::accumulate(std::begin(weights), std::end(weights), 0.0) <= 0.0) {
    throw GenerationError("no attack kind with positive weight is open");
  }
  std::discrete_distribution<int> pick(std::begin(weights), std::end(weights));
  return static_cast<AttackKind>(pick(rng));
}

AttackDescriptor sample_attack(Rng& rng, AttackKind kind, const vvc::DroopCurve& pre, double v_op) {
  AttackDescriptor a;
  a.kind = kind;
  a.seed = rng();
  switch (kind) {
    case AttackKind::none:
    case AttackKind::invert:
      break;
    case AttackKind::shift: {
      const double common = uniform(rng, -0.05, 0.05);
      for (double& x : a.alpha) x = common + uniform(rng, -0.015, 0.015);
      break;
    }
    case AttackKind::stealth_chord:
      a.alpha[1] = uniform(rng, -0.06, 0.06);
      a.alpha[2] = uniform(rng, -0.06, 0.06);
      break;
    case AttackKind::steepen: {
      // Segment under the operating point if any, else a random choice.
      int which = std::uniform_int_distribution<int>(0, 2)(rng);
      if (v_op >= pre.va && v_op < pre.vb) which = 0;
      if (v_op >= pre.vc && v_op < pre.vd) which = 1;
      if (which != 1) a.target_slopes[0] = 1.0 / ((pre.vb - pre.va) * uniform(rng, 0.05, 0.7));
      if (which != 0) a.target_slopes[1] = 1.0 / ((pre.vd - pre.vc) * uniform(rng, 0.05, 0.7));
      break;
    }
  }
  return a;
}

sim::ClosedLoopConfig sim_config_for(const Scenario& s, const GeneratorConfig& cfg) {
  sim::ClosedLoopConfig c = cfg.sim;
  c.seed = s.seed;
  return c;
}

vvc::InverterParams params_for(const Scenario& s, const GeneratorConfig& cfg) {
  vvc::InverterParams p = cfg.params;
  p.p_ref = s.p_ref;
  return p;
}

}  // namespace

std::string_view kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::shift: return "shift";
    case AttackKind::steepen: return "steepen";
    case AttackKind::stealth_chord: return "stealth-chord";
    case AttackKind::invert: return "invert";
  }
  return "none";
}

AttackKind parse_kind(std::string_view text) {
  for (auto k : {AttackKind::none, AttackKind::shift, AttackKind::steepen, AttackKind::stealth_chord,
                 AttackKind::invert}) {
    if (kind_name(k) == text) return k;
  }
  throw FormatError("unknown attack kind '" + std::string(text) + "'");
}

vvc::DroopCurve apply_attack(const vvc::DroopCurve& pre, const AttackDescriptor& attack) {
  vvc::validate(pre);
  vvc::DroopCurve out = pre;
  switch (attack.kind) {
    case AttackKind::none:
      break;
    case AttackKind::shift:
      out.va += attack.alpha[0];
      out.vb += attack.alpha[1];
      out.vc += attack.alpha[2];
      out.vd += attack.alpha[3];
      break;
    case AttackKind::stealth_chord:
      if (attack.alpha[0] != 0.0 || attack.alpha[3] != 0.0) {
        throw AttackConstructionError("a chord-preserving attack may only move vb and vc");
      }
      out.vb += attack.alpha[1];
      out.vc += attack.alpha[2];
      break;
    case AttackKind::steepen: {
      const auto [lower, upper] = attack.target_slopes;
      if (lower < 0.0 || upper < 0.0 || (lower == 0.0 && upper == 0.0)) {
        throw AttackConstructionError("steepen needs a positive target slope");
      }
      if (lower > 0.0) {
        const double vb = pre.va + 1.0 / lower;
        if (vb > pre.vb) throw AttackConstructionError("target lower slope is flatter than the curve");
        out.vb = vb;
      }
      if (upper > 0.0) {
        const double vc = pre.vd - 1.0 / upper;
        if (vc < pre.vc) throw AttackConstructionError("target upper slope is flatter than the curve");
        out.vc = vc;
      }
      break;
    }
    case AttackKind::invert:
      out.orientation = -pre.orientation;
      break;
  }
  if (auto defect = vvc::curve_defect(out)) {
    throw AttackConstructionError("attack yields a malformed curve: " + *defect);
  }
  return out;
}

Label label_by_oscillation(const sim::SimTrace& trace, const OracleConfig& cfg) {
  const double end = std::min(trace.attack_time + cfg.window, trace.end_time());
  if (end - trace.attack_time < cfg.tail - 1e-9 || cfg.tail < 2.0 - 1e-9) {
    throw RangeError("oracle needs at least 2 s of post-update trace");
  }
  const double tail = peak_to_peak(trace, end - cfg.tail, end);
  if (!(tail > cfg.eps)) return Label::legitimate;
  const double last = peak_to_peak(trace, end - 1.0, end);
  const double previous = peak_to_peak(trace, end - 2.0, end - 1.0);
  return last >= cfg.decay * previous ? Label::malicious : Label::legitimate;
}

OperatingCondition operating_condition(const grid::NetworkModel& model, BusId dg,
                                       const vvc::InverterParams& params,
                                       std::span<const sim::DgSetup> background) {
  std::vector<sim::DgSetup> fleet{sim::DgSetup{dg, params, vvc::kDefaultCurve, false}};
  fleet.insert(fleet.end(), background.begin(), background.end());
  const auto state = sim::settle(model, fleet);
  OperatingCondition op;
  op.v_free = std::abs(state.voltages.pcc_at(model, dg));
  op.x_th = grid::pcc_thevenin_impedance(model, dg).imag();
  op.q_max = vvc::q_max(params);
  return op;
}

double loop_gain(const vvc::DroopCurve& curve, double operating_v, const OperatingCondition& op) {
  return std::abs(vvc::local_slope(curve, operating_v, op.q_max)) * op.x_th;
}

double analytic_stability_check(const grid::NetworkModel& model, BusId dg,
                                const vvc::DroopCurve& curve, double operating_v,
                                const vvc::InverterParams& params) {
  vvc::validate(curve);
  const double x = grid::pcc_thevenin_impedance(model, dg).imag();
  return std::abs(vvc::local_slope(curve, operating_v, vvc::q_max(params))) * x;
}

double equilibrium_voltage(const vvc::DroopCurve& curve, const OperatingCondition& op) {
  auto f = [&](double v) { return vvc::droop_qref(curve, v, op.q_max); };
  if (curve.orientation > 0) {
    // v - v_free - X f(v) is strictly increasing.
    const double span = op.x_th * op.q_max + 0.1;
    double lo = op.v_free - span;
    double hi = op.v_free + span;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mid - op.v_free - op.x_th * f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Positive feedback: follow the monotone runaway from v_free.
  double q = 0.0;
  double v = op.v_free;
  for (int it = 0; it < 10000; ++it) {
    const double target = f(v);
    if (std::abs(target - q) < 1e-14) break;
    q += 0.5 * (target - q);
    v = op.v_free + op.x_th * q;
  }
  return v;
}

double equilibrium_gain(const vvc::DroopCurve& curve, const OperatingCondition& op) {
  return loop_gain(curve, equilibrium_voltage(curve, op), op);
}

bool predicts_oscillation(const vvc::DroopCurve& curve, const OperatingCondition& op) {
  return curve.orientation > 0 && equilibrium_gain(curve, op) > 1.0;
}

vvc::DroopCurve sample_legitimate_curve(Rng& rng, double margin, const OperatingCondition& op,
                                        const LegitSampler& s) {
  if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("margin must lie in [0, 1)");
  for (int draw = 0; draw < s.max_draws; ++draw) {
    vvc::DroopCurve c;
    c.va = uniform(rng, s.va_lo, s.va_hi);
    c.vd = uniform(rng, s.vd_lo, s.vd_hi);
    const double room = c.vd - c.va - 2.0 * s.min_segment;
    const double width = uniform(rng, s.min_deadband, room);
    c.vb = uniform(rng, c.va + s.min_segment, c.vd - s.min_segment - width);
    c.vc = c.vb + width;
    if (!vvc::is_well_formed(c)) continue;
    if (equilibrium_gain(c, op) < margin) return c;
  }
  throw SamplingError("no stabilizing curve found within " + std::to_string(s.max_draws) + " draws");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

Scenario draw_common(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                     const GeneratorConfig& cfg, Rng& rng) {
  Scenario s;
  s.id = id;
  s.seed = seed;
  s.dg = cfg.dg;
  s.load_scale = uniform(rng, cfg.load_lo, cfg.load_hi);
  s.load_scales.resize(base.spec().loads.size());
  for (double& x : s.load_scales) {
    x = s.load_scale * uniform(rng, 1.0 - cfg.load_jitter, 1.0 + cfg.load_jitter);
  }
  s.p_ref = uniform(rng, cfg.p_ref_lo, cfg.p_ref_hi);
  return s;
}

Scenario draw_with(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                   const GeneratorConfig& cfg, Rng& rng, std::optional<AttackKind> forced) {
  Scenario s = draw_common(base, id, seed, cfg, rng);
  const grid::NetworkModel model = base.with_load_scales(s.load_scales);
  const auto params = params_for(s, cfg);
  const auto background = sim::default_background(model, s.dg);
  const OperatingCondition op = operating_condition(model, s.dg, params, background);

  const AttackKind kind = forced ? *forced : pick_kind(rng, cfg.weights, true, true);
  s.old_curve = sample_legitimate_curve(rng, cfg.margin, op, cfg.sampler);
  if (kind == AttackKind::steepen) {
    // Steepening only matters on a sloped segment; prefer such a pre-curve.
    for (int k = 0; k < kSlopeRedraws && loop_gain(s.old_curve, equilibrium_voltage(s.old_curve, op), op) == 0.0; ++k) {
      s.old_curve = sample_legitimate_curve(rng, cfg.margin, op, cfg.sampler);
    }
  }
  const double v_op = equilibrium_voltage(s.old_curve, op);
  if (kind == AttackKind::none) {
    s.attack = AttackDescriptor{};
    s.attack.seed = rng();
    s.new_curve = sample_legitimate_curve(rng, cfg.margin, op, cfg.sampler);
  } else {
    bool built = false;
    for (int attempt = 0; attempt < kAttackRetries && !built; ++attempt) {
      s.attack = sample_attack(rng, kind, s.old_curve, v_op);
      try {
        s.new_curve = apply_attack(s.old_curve, s.attack);
        built = true;
      } catch (const AttackConstructionError&) {
      }
    }
    if (!built) throw GenerationError("could not construct a " + std::string(kind_name(kind)) + " attack");
  }
  s.gain = equilibrium_gain(s.new_curve, op);
  s.predicted = predicts_oscillation(s.new_curve, op);
  return s;
}

}  // namespace

Scenario draw_scenario(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                       const GeneratorConfig& cfg) {
  Rng rng(seed);
  return draw_with(base, id, seed, cfg, rng, std::nullopt);
}

Scenario draw_scenario(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                       const GeneratorConfig& cfg, AttackKind kind) {
  Rng rng(seed);
  rng.discard(1);  // the kind draw, so that a dataset id replays exactly
  return draw_with(base, id, seed, cfg, rng, kind);
}

sim::SimTrace simulate_scenario(const grid::NetworkModel& base, const Scenario& s,
                                const GeneratorConfig& cfg) {
  const grid::NetworkModel model = base.with_load_scales(s.load_scales);
  return sim::run_closed_loop(model, s.dg, params_for(s, cfg), s.old_curve, s.new_curve,
                              sim_config_for(s, cfg));
}

void run_scenario(const grid::NetworkModel& base, Scenario& s, const GeneratorConfig& cfg) {
  sim::SimTrace trace;
  try {
    trace = simulate_scenario(base, s, cfg);
  } catch (const SimulationError&) {
    s.collapsed = true;
    s.label = Label::malicious;
    s.features.clear();
    return;
  }
  s.collapsed = false;
  s.label = label_by_oscillation(trace, cfg.oracle);
  const double after = std::min(cfg.oracle.window, trace.end_time() - trace.attack_time);
  const auto [pre, post] = sim::extract_window(trace, trace.attack_time, cfg.sim.record_pre, after);
  s.features = features::assemble_features(pre, post, s.old_curve, s.new_curve, cfg.zeta);
}

std::vector<Scenario> generate_dataset(const grid::NetworkModel& base, std::size_t n_legit,
                                       std::size_t n_malicious, std::uint64_t seed,
                                       const GeneratorConfig& cfg, GenerationStats* stats) {
  if (n_legit < 1 || n_malicious < 1) throw DomainError("scenario counts must be at least 1");
  if (cfg.batch < 1) throw DomainError("batch size must be positive");
  const std::size_t budget = cfg.max_draws_factor * (n_legit + n_malicious);

  std::vector<Scenario> legit;
  std::vector<Scenario> malicious;
  GenerationStats local;
  std::uint64_t next = 0;

  while (legit.size() < n_legit || malicious.size() < n_malicious) {
    if (next >= budget) {
      throw GenerationError("class quotas not reached within " + std::to_string(budget) +
                            " draws (" + std::to_string(legit.size()) + " legitimate, " +
                            std::to_string(malicious.size()) + " malicious)");
    }
    const bool legit_open = legit.size() < n_legit;
    const bool malicious_open = malicious.size() < n_malicious;
    const std::size_t count = std::min<std::size_t>(cfg.batch, budget - next);

    std::vector<Scenario> batch(count);
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    std::for_each(std::execution::par, idx.begin(), idx.end(), [&](std::size_t k) {
      try {
        const std::uint64_t id = next + k;
        const std::uint64_t s_seed = derive_seed(seed, id);
        Rng rng(s_seed);
        const AttackKind kind = pick_kind(rng, cfg.weights, legit_open, malicious_open);
        Scenario s = draw_with(base, id, s_seed, cfg, rng, kind);
        run_scenario(base, s, cfg);
        batch[k] = std::move(s);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
    // Parallel algorithms terminate on escaping exceptions; rethrow the first in index order.
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    next += count;

    for (auto& s : batch) {
      ++local.draws;
      const bool intent_attack = s.attack.kind != AttackKind::none;
      if (s.collapsed) ++local.collapsed;
      if (s.collapsed || s.features.empty()) {
        ++local.discarded;
        continue;
      }
      if (!intent_attack && s.label == Label::legitimate && legit.size() < n_legit) {
        legit.push_back(std::move(s));
      } else if (intent_attack && s.label == Label::malicious && malicious.size() < n_malicious) {
        malicious.push_back(std::move(s));
      } else {
        ++local.discarded;
      }
    }
  }

  std::vector<Scenario> out;
  out.reserve(n_legit + n_malicious);
  std::merge(std::make_move_iterator(legit.begin()), std::make_move_iterator(legit.end()),
             std::make_move_iterator(malicious.begin()), std::make_move_iterator(malicious.end()),
             std::back_inserter(out), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
  assign_split(out, cfg.test_fraction, seed);
  if (stats) *stats = local;
  return out;
}

void assign_split(std::vector<Scenario>& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DomainError("test fraction must lie in (0, 1)");
  // Stratified: shuffle each class by a seeded permutation, take the leading fraction.
  for (Label cls : {Label::legitimate, Label::malicious}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].label == cls) members.push_back(i);
    }
    Rng rng(derive_seed(seed ^ 0x5b1175b1175ULL, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = members.size(); i > 1; --i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      std::swap(members[i - 1], members[j]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) data[members[k]].test = k < n_test;
  }
}

}  // namespace vvcguard::scenarios
