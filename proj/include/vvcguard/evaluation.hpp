#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vvcguard/features.hpp"
#include "vvcguard/mlp.hpp"
#include "vvcguard/simulator.hpp"
#include "vvcguard/training.hpp"
#include "vvcguard/vvc.hpp"

namespace vvcguard::eval {

/// Positive class = malicious.
struct Counts {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  long total() const { return tp + tn + fp + fn; }
  friend bool operator==(const Counts&, const Counts&) = default;
};

Counts confusion(std::span<const int> labels, std::span<const int> predictions);

/// Fields that would divide by zero are nullopt.
struct MetricsReport {
  Counts counts;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

MetricsReport metrics(const Counts& counts);
/// Metrics table followed by the row-normalized confusion matrix.
std::string format_report(const MetricsReport& report);

struct EvalResult {
  MetricsReport report;
  std::vector<double> probabilities;
  std::vector<int> predictions;
  std::vector<std::uint64_t> misclassified;
};

/// Throws DomainError if a test id also appears in `train_ids`.
EvalResult evaluate(const mlp::MlpModel& model, const mlp::Dataset& test,
                    std::span<const std::uint64_t> train_ids, double threshold = 0.5);

enum class Decision { permit, reject, malformed };
enum class FallbackPolicy { unity_power_factor, self_isolate, revert_last_stable, flattened_backup };

std::string_view decision_name(Decision d);
std::string_view policy_name(FallbackPolicy p);
FallbackPolicy parse_policy(std::string_view text);
/// CLI exit status: 0 permit, 2 reject, 3 malformed.
int exit_code(Decision d);

struct DetectionVerdict {
  Decision decision = Decision::permit;
  double probability = 0.0;
  std::optional<FallbackPolicy> fallback_applied;
  std::string reason;
};

struct GateConfig {
  FallbackPolicy policy = FallbackPolicy::revert_last_stable;
  double threshold = 0.5;
  features::FeatureMode mode = features::FeatureMode::monitored;
  features::ZetaParams zeta;
  vvc::DroopCurve flattened_curve{0.82, 0.97, 1.03, 1.18, +1};
};

using Classifier = std::function<double(const features::FeatureVector&)>;

/// Malformed curves never reach `classify`.
DetectionVerdict gate(const Classifier& classify, const vvc::DroopCurve& old_curve,
                      const vvc::DroopCurve& new_curve, const sim::TraceWindow& pre,
                      const sim::TraceWindow& post, const GateConfig& cfg);
DetectionVerdict gate(const mlp::MlpModel& model, const vvc::DroopCurve& old_curve,
                      const vvc::DroopCurve& new_curve, const sim::TraceWindow& pre,
                      const sim::TraceWindow& post, const GateConfig& cfg);

/// Inverter-side state: one active curve, one pending curve under review.
class GatedInverter {
 public:
  GatedInverter(vvc::DroopCurve initial, vvc::InverterParams params, GateConfig cfg);

  /// Provisionally installs `curve` (monitored mode observes it before the verdict).
  /// Malformed curves are rejected here and never become pending.
  std::optional<DetectionVerdict> receive(const vvc::DroopCurve& curve);
  /// Decides on the pending curve and applies the fallback on rejection.
  DetectionVerdict review(const Classifier& classify, const sim::TraceWindow& pre,
                          const sim::TraceWindow& post);

  const vvc::DroopCurve& active_curve() const { return active_; }
  const vvc::DroopCurve& last_stable() const { return last_stable_; }
  const std::optional<vvc::DroopCurve>& pending() const { return pending_; }
  /// q_max in effect (zero under unity power factor).
  double q_max() const;
  bool isolated() const { return isolated_; }
  bool unity_power_factor() const { return unity_pf_; }

 private:
  vvc::DroopCurve active_;
  vvc::DroopCurve last_stable_;
  std::optional<vvc::DroopCurve> pending_;
  vvc::InverterParams params_;
  GateConfig cfg_;
  bool isolated_ = false;
  bool unity_pf_ = false;
};

}  // namespace vvcguard::eval
