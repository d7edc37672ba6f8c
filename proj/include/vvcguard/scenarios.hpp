#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "vvcguard/features.hpp"
#include "vvcguard/grid.hpp"
#include "vvcguard/simulator.hpp"
#include "vvcguard/vvc.hpp"

namespace vvcguard::scenarios {

using grid::BusId;
using Rng = std::mt19937_64;

enum class AttackKind { none, shift, steepen, stealth_chord, invert };

std::string_view kind_name(AttackKind kind);
AttackKind parse_kind(std::string_view text);

struct AttackDescriptor {
  AttackKind kind = AttackKind::none;
  std::array<double, 4> alpha{};  // offsets added to (va, vb, vc, vd)
  // Normalized steepness (q_max per pu of voltage, i.e. 1 / segment width)
  // for the lower and upper segments; 0 leaves a segment alone.
  std::array<double, 2> target_slopes{};
  std::uint64_t seed = 0;
};

vvc::DroopCurve apply_attack(const vvc::DroopCurve& pre, const AttackDescriptor& attack);

struct OracleConfig {
  double eps = 0.002;    // pu, peak-to-peak threshold
  double tail = 2.0;     // s, evaluated at the end of the post window
  double window = 10.0;  // s of post-update recording
  double decay = 0.8;    // last second must keep this fraction of the previous one
};

enum class Label { legitimate = 0, malicious = 1 };

Label label_by_oscillation(const sim::SimTrace& trace, const OracleConfig& cfg = {});

/// Static view of the DG under test: its PCC voltage with zero reactive
/// output, and the Thevenin reactance seen from the PCC.
struct OperatingCondition {
  double v_free = 1.0;
  double x_th = 0.0;
  double q_max = 0.0;
};

OperatingCondition operating_condition(const grid::NetworkModel& model, BusId dg,
                                       const vvc::InverterParams& params,
                                       std::span<const sim::DgSetup> background);

/// |local droop slope at operating_v| * X_th(dg).
double analytic_stability_check(const grid::NetworkModel& model, BusId dg,
                                const vvc::DroopCurve& curve, double operating_v,
                                const vvc::InverterParams& params = {});
double loop_gain(const vvc::DroopCurve& curve, double operating_v, const OperatingCondition& op);

/// Equilibrium of v = v_free + X_th * q(v) on the linearized network.
double equilibrium_voltage(const vvc::DroopCurve& curve, const OperatingCondition& op);
double equilibrium_gain(const vvc::DroopCurve& curve, const OperatingCondition& op);
/// Oscillation is predicted for normal orientation with gain above one.
/// Inverted curves are positive feedback and saturate monotonically.
bool predicts_oscillation(const vvc::DroopCurve& curve, const OperatingCondition& op);

struct LegitSampler {
  double va_lo = 0.90, va_hi = 0.97;
  double vd_lo = 1.03, vd_hi = 1.10;
  double min_deadband = 0.01;
  double min_segment = 0.005;
  int max_draws = 10000;
};

/// Rejection sampler for stabilizing curves: gain at the equilibrium must not
/// exceed `margin`.
vvc::DroopCurve sample_legitimate_curve(Rng& rng, double margin, const OperatingCondition& op,
                                        const LegitSampler& sampler = {});

struct KindWeights {
  // Chosen so that each destabilizing kind makes up a sizeable share of the
  // malicious class; steepening succeeds far less often than shifting.
  double none = 0.40;
  double shift = 0.10;
  double steepen = 0.36;
  double stealth_chord = 0.12;
  double invert = 0.02;
};

struct GeneratorConfig {
  BusId dg = 4;
  vvc::InverterParams params;
  double margin = 0.7;
  double load_lo = 0.6, load_hi = 1.3;
  double load_jitter = 0.05;  // per-load multiplier spread around the common scale
  double p_ref_lo = 0.02, p_ref_hi = 0.09;
  double test_fraction = 0.2;
  std::size_t max_draws_factor = 20;  // draw budget = factor * (n_legit + n_malicious)
  std::size_t batch = 64;
  sim::ClosedLoopConfig sim;
  OracleConfig oracle;
  features::ZetaParams zeta;
  KindWeights weights;
  LegitSampler sampler;
};

struct Scenario {
  std::uint64_t id = 0;     // draw index
  std::uint64_t seed = 0;   // per-draw seed
  double load_scale = 1.0;  // common multiplier
  std::vector<double> load_scales;  // per load
  double p_ref = 0.0;
  BusId dg = 0;
  vvc::DroopCurve old_curve;
  vvc::DroopCurve new_curve;
  AttackDescriptor attack;
  Label label = Label::legitimate;
  bool collapsed = false;
  double gain = 0.0;  // analytic gain of the new curve at its equilibrium
  bool predicted = false;
  bool test = false;
  features::FeatureVector features;
};

/// Draws the scenario for `seed` (loads, curves, attack) without simulating.
Scenario draw_scenario(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                       const GeneratorConfig& cfg);
/// Scenario with a given intent; `kind = none` draws a fresh legitimate curve.
Scenario draw_scenario(const grid::NetworkModel& base, std::uint64_t id, std::uint64_t seed,
                       const GeneratorConfig& cfg, AttackKind kind);

/// Runs the closed loop for a drawn scenario and returns its trace.
sim::SimTrace simulate_scenario(const grid::NetworkModel& base, const Scenario& s,
                                const GeneratorConfig& cfg);
/// Simulate, label with the oracle and extract features in place.
void run_scenario(const grid::NetworkModel& base, Scenario& s, const GeneratorConfig& cfg);

struct GenerationStats {
  std::size_t draws = 0;
  std::size_t discarded = 0;  // attacks that did not destabilize, or legit curves that did
  std::size_t collapsed = 0;
};

/// Exactly n_legit label-0 scenarios drawn from the legitimate sampler and
/// n_malicious label-1 scenarios drawn from the attack kinds. Deterministic
/// given the seed regardless of thread count.
std::vector<Scenario> generate_dataset(const grid::NetworkModel& base, std::size_t n_legit,
                                       std::size_t n_malicious, std::uint64_t seed,
                                       const GeneratorConfig& cfg = {},
                                       GenerationStats* stats = nullptr);

/// Deterministic 80/20 split by scenario id.
void assign_split(std::vector<Scenario>& data, double test_fraction, std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace vvcguard::scenarios
