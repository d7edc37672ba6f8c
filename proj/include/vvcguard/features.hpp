#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vvcguard/simulator.hpp"
#include "vvcguard/vvc.hpp"

namespace vvcguard::features {

/// monitored: pre and post snapshots (34 values).
/// predictive: new curve plus the pre-update measurements only (17 values).
enum class FeatureMode { monitored, predictive };

inline constexpr std::size_t kSnapshotDim = 17;
inline constexpr std::size_t kMonitoredDim = 2 * kSnapshotDim;
inline constexpr std::size_t kPredictiveDim = kSnapshotDim;

std::size_t dimension(FeatureMode mode);
std::string_view mode_name(FeatureMode mode);
FeatureMode parse_mode(std::string_view text);

struct ZetaParams {
  double c = 100.0;
  int p = 2;
  // true: v_n is the window mean of |V|; false: v_n = v_nominal.
  bool mean_reference = true;
  double v_nominal = 1.0;
};

/// c * |v_pcc - v_n|^p
double zeta(double v_pcc, double v_n, double c, int p);

enum class Column { v1, v2, v3, i1, i2, i3, vd, vq, id, iq, zeta1, zeta2, zeta3 };

/// Window mean of a column. dq values use the window's own frame.
double window_aggregate(const sim::TraceWindow& window, Column column, const ZetaParams& zp = {});

using FeatureVector = std::vector<double>;

/// Curve breakpoints followed by the 13 aggregated measurements.
FeatureVector snapshot(const sim::TraceWindow& window, const vvc::DroopCurve& curve,
                       const ZetaParams& zp = {});

/// [pre snapshot with old curve | post snapshot with new curve].
FeatureVector assemble_features(const sim::TraceWindow& pre, const sim::TraceWindow& post,
                                const vvc::DroopCurve& old_curve, const vvc::DroopCurve& new_curve,
                                const ZetaParams& zp = {});

/// Projects a 34-value monitored vector onto `mode`.
FeatureVector project(const FeatureVector& monitored, FeatureMode mode);

const std::vector<std::string>& feature_names(FeatureMode mode);
/// FNV-1a over the ordered column names and the mode.
std::uint64_t schema_hash(FeatureMode mode);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

}  // namespace vvcguard::features
