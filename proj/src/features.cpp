#include "vvcguard/features.hpp"

#include <cmath>
#include <cstdio>

#include "vvcguard/errors.hpp"

namespace vvcguard::features {

namespace {

const char* const kMeasurementNames[] = {"I1", "I2", "I3", "V1", "V2", "V3", "Id",
                                         "Iq", "Vd", "Vq", "zetaV1", "zetaV2", "zetaV3"};

std::vector<std::string> build_names(FeatureMode mode) {
  std::vector<std::string> names;
  auto add_snapshot = [&](const std::string& prefix) {
    for (const char* v : {"va", "vb", "vc", "vd"}) names.push_back(prefix + v);
    for (const char* m : kMeasurementNames) names.push_back(prefix + m);
  };
  if (mode == FeatureMode::monitored) {
    add_snapshot("pre_");
    add_snapshot("post_");
  } else {
    for (const char* v : {"va", "vb", "vc", "vd"}) names.push_back(std::string("new_") + v);
    for (const char* m : kMeasurementNames) names.push_back(std::string("pre_") + m);
  }
  return names;
}

double mean_v1(const sim::TraceWindow& w) {
  double s = 0.0;
  for (const auto& r : w.rows) s += r.v_mag[0];
  return s / static_cast<double>(w.rows.size());
}

}  // namespace

std::size_t dimension(FeatureMode mode) {
  return mode == FeatureMode::monitored ? kMonitoredDim : kPredictiveDim;
}

std::string_view mode_name(FeatureMode mode) {
  return mode == FeatureMode::monitored ? "monitored" : "predictive";
}

FeatureMode parse_mode(std::string_view text) {
  if (text == "monitored") return FeatureMode::monitored;
  if (text == "predictive") return FeatureMode::predictive;
  throw FormatError("unknown feature mode '" + std::string(text) + "'");
}

double zeta(double v_pcc, double v_n, double c, int p) {
  if (!(c > 0.0) || p <= 0) throw DomainError("zeta needs c > 0 and p > 0");
  return c * std::pow(std::abs(v_pcc - v_n), p);
}

double window_aggregate(const sim::TraceWindow& window, Column column, const ZetaParams& zp) {
  if (window.rows.empty()) throw RangeError("cannot aggregate an empty window");
  const auto col = static_cast<int>(column);
  const bool is_zeta = column >= Column::zeta1;
  const double v_n = is_zeta && zp.mean_reference ? mean_v1(window) : zp.v_nominal;

  double sum = 0.0;
  for (const auto& row : window.rows) {
    if (col <= 2) {
      sum += row.v_mag[col];
    } else if (col <= 5) {
      sum += row.i_mag[col - 3];
    } else if (!is_zeta) {
      const auto dq = sim::dq_at_step(row, window.theta_ref);
      const double vals[] = {dq.vd, dq.vq, dq.id, dq.iq};
      sum += vals[col - 6];
    } else {
      sum += zeta(row.v_mag[col - 10], v_n, zp.c, zp.p);
    }
  }
  return sum / static_cast<double>(window.rows.size());
}

FeatureVector snapshot(const sim::TraceWindow& window, const vvc::DroopCurve& curve,
                       const ZetaParams& zp) {
  using C = Column;
  FeatureVector out{curve.va, curve.vb, curve.vc, curve.vd};
  for (C c : {C::i1, C::i2, C::i3, C::v1, C::v2, C::v3, C::id, C::iq, C::vd, C::vq, C::zeta1,
              C::zeta2, C::zeta3}) {
    out.push_back(window_aggregate(window, c, zp));
  }
  return out;
}

FeatureVector assemble_features(const sim::TraceWindow& pre, const sim::TraceWindow& post,
                                const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                                const ZetaParams& zp) {
  FeatureVector out = snapshot(pre, old_curve, zp);
  const FeatureVector second = snapshot(post, new_curve, zp);
  out.insert(out.end(), second.begin(), second.end());
  for (double v : out) {
    if (!std::isfinite(v)) throw SchemaError("non-finite feature value");
  }
  return out;
}

FeatureVector project(const FeatureVector& monitored, FeatureMode mode) {
  if (monitored.size() != kMonitoredDim) {
    throw SchemaError("expected " + std::to_string(kMonitoredDim) + " features, got " +
                      std::to_string(monitored.size()));
  }
  if (mode == FeatureMode::monitored) return monitored;
  FeatureVector out(monitored.begin() + kSnapshotDim, monitored.begin() + kSnapshotDim + 4);
  out.insert(out.end(), monitored.begin() + 4, monitored.begin() + kSnapshotDim);
  return out;
}

const std::vector<std::string>& feature_names(FeatureMode mode) {
  static const std::vector<std::string> monitored = build_names(FeatureMode::monitored);
  static const std::vector<std::string> predictive = build_names(FeatureMode::predictive);
  return mode == FeatureMode::monitored ? monitored : predictive;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t schema_hash(FeatureMode mode) {
  std::string joined(mode_name(mode));
  for (const auto& name : feature_names(mode)) {
    joined += '|';
    joined += name;
  }
  return fnv1a(joined);
}

}  // namespace vvcguard::features
