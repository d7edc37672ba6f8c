#include "vvcguard/evaluation.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "vvcguard/errors.hpp"

namespace vvcguard::eval {

namespace {

std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f%%", 100.0 * *v);
  return buf;
}

}  // namespace

Counts confusion(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) throw SchemaError("labels and predictions differ in length");
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) throw DomainError("labels must be 0 or 1");
    if (y == 1) (p == 1 ? c.tp : c.fn)++;
    else (p == 1 ? c.fp : c.tn)++;
  }
  return c;
}

MetricsReport metrics(const Counts& c) {
  MetricsReport r;
  r.counts = c;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
    r.f1 = 2.0 * (*r.precision * *r.recall) / (*r.precision + *r.recall);
  }
  return r;
}

std::string format_report(const MetricsReport& r) {
  std::ostringstream out;
  out << "metric     value\n";
  out << "accuracy   " << pct(r.accuracy) << '\n';
  out << "precision  " << pct(r.precision) << '\n';
  out << "recall     " << pct(r.recall) << '\n';
  out << "f1         " << pct(r.f1) << '\n';
  out << '\n';
  const Counts& c = r.counts;
  out << "actual \\ predicted   malicious    normal\n";
  out << "malicious            " << pct(ratio(c.tp, c.tp + c.fn)) << "   " << pct(ratio(c.fn, c.tp + c.fn)) << '\n';
  out << "normal               " << pct(ratio(c.fp, c.fp + c.tn)) << "   " << pct(ratio(c.tn, c.fp + c.tn)) << '\n';
  out << '\n';
  out << "tp " << c.tp << "  tn " << c.tn << "  fp " << c.fp << "  fn " << c.fn << '\n';
  return out.str();
}

EvalResult evaluate(const mlp::MlpModel& model, const mlp::Dataset& test,
                    std::span<const std::uint64_t> train_ids, double threshold) {
  const std::set<std::uint64_t> train(train_ids.begin(), train_ids.end());
  for (std::uint64_t id : test.ids) {
    if (train.count(id)) throw DomainError("scenario " + std::to_string(id) + " is in both train and test sets");
  }
  EvalResult out;
  const mlp::Vector p = mlp::forward_batch(model, test.x);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out.probabilities.push_back(p(i));
    out.predictions.push_back(p(i) >= threshold ? 1 : 0);
    labels.push_back(test.y(i) > 0.5 ? 1 : 0);
    if (out.predictions.back() != labels.back() && !test.ids.empty()) {
      out.misclassified.push_back(test.ids[static_cast<std::size_t>(i)]);
    }
  }
  out.report = metrics(confusion(labels, out.predictions));
  return out;
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::permit: return "permit";
    case Decision::reject: return "reject";
    case Decision::malformed: return "malformed";
  }
  return "permit";
}

std::string_view policy_name(FallbackPolicy p) {
  switch (p) {
    case FallbackPolicy::unity_power_factor: return "unity-power-factor";
    case FallbackPolicy::self_isolate: return "self-isolate";
    case FallbackPolicy::revert_last_stable: return "revert-last-stable";
    case FallbackPolicy::flattened_backup: return "flattened-backup";
  }
  return "revert-last-stable";
}

FallbackPolicy parse_policy(std::string_view text) {
  for (auto p : {FallbackPolicy::unity_power_factor, FallbackPolicy::self_isolate,
                 FallbackPolicy::revert_last_stable, FallbackPolicy::flattened_backup}) {
    if (policy_name(p) == text) return p;
  }
  throw FormatError("unknown fallback policy '" + std::string(text) + "'");
}

int exit_code(Decision d) {
  switch (d) {
    case Decision::permit: return 0;
    case Decision::reject: return 2;
    case Decision::malformed: return 3;
  }
  return 1;
}

DetectionVerdict gate(const Classifier& classify, const vvc::DroopCurve& old_curve,
                      const vvc::DroopCurve& new_curve, const sim::TraceWindow& pre,
                      const sim::TraceWindow& post, const GateConfig& cfg) {
  DetectionVerdict v;
  if (auto defect = vvc::curve_defect(new_curve)) {
    v.decision = Decision::malformed;
    v.reason = *defect;
    return v;
  }
  features::FeatureVector x;
  if (cfg.mode == features::FeatureMode::monitored) {
    x = features::assemble_features(pre, post, old_curve, new_curve, cfg.zeta);
  } else {
    const auto pre_part = features::snapshot(pre, old_curve, cfg.zeta);
    x = {new_curve.va, new_curve.vb, new_curve.vc, new_curve.vd};
    x.insert(x.end(), pre_part.begin() + 4, pre_part.end());
  }
  v.probability = classify(x);
  if (v.probability >= cfg.threshold) {
    v.decision = Decision::reject;
    v.fallback_applied = cfg.policy;
    v.reason = "classified as destabilizing";
  } else {
    v.decision = Decision::permit;
    v.reason = "classified as stabilizing";
  }
  return v;
}

DetectionVerdict gate(const mlp::MlpModel& model, const vvc::DroopCurve& old_curve,
                      const vvc::DroopCurve& new_curve, const sim::TraceWindow& pre,
                      const sim::TraceWindow& post, const GateConfig& cfg) {
  if (model.schema_hash != features::schema_hash(cfg.mode)) {
    throw SchemaError("model was trained on a different feature schema");
  }
  const Classifier classify = [&](const features::FeatureVector& x) { return mlp::forward(model, x); };
  return gate(classify, old_curve, new_curve, pre, post, cfg);
}

GatedInverter::GatedInverter(vvc::DroopCurve initial, vvc::InverterParams params, GateConfig cfg)
    : active_(initial), last_stable_(initial), params_(params), cfg_(std::move(cfg)) {
  vvc::validate(initial);
  params_.validate();
}

std::optional<DetectionVerdict> GatedInverter::receive(const vvc::DroopCurve& curve) {
  if (auto defect = vvc::curve_defect(curve)) {
    return DetectionVerdict{Decision::malformed, 0.0, std::nullopt, *defect};
  }
  pending_ = curve;
  if (cfg_.mode == features::FeatureMode::monitored) active_ = curve;
  return std::nullopt;
}

DetectionVerdict GatedInverter::review(const Classifier& classify, const sim::TraceWindow& pre,
                                       const sim::TraceWindow& post) {
  if (!pending_) throw DomainError("no curve is pending review");
  const vvc::DroopCurve candidate = *pending_;
  pending_.reset();
  DetectionVerdict v = gate(classify, last_stable_, candidate, pre, post, cfg_);
  if (v.decision == Decision::permit) {
    active_ = candidate;
    last_stable_ = candidate;
    return v;
  }
  switch (cfg_.policy) {
    case FallbackPolicy::revert_last_stable:
      active_ = last_stable_;
      break;
    case FallbackPolicy::flattened_backup:
      active_ = cfg_.flattened_curve;
      break;
    case FallbackPolicy::unity_power_factor:
      active_ = last_stable_;
      unity_pf_ = true;
      break;
    case FallbackPolicy::self_isolate:
      active_ = last_stable_;
      isolated_ = true;
      break;
  }
  return v;
}

double GatedInverter::q_max() const { return unity_pf_ || isolated_ ? 0.0 : vvc::q_max(params_); }

}  // namespace vvcguard::eval
