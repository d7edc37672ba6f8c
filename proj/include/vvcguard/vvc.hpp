#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace vvcguard::vvc {

/// Volt-VAr droop curve. With orientation +1 the inverter injects reactive
/// power below `va` and absorbs above `vd`; orientation -1 mirrors the output.
struct DroopCurve {
  double va = 0.95;
  double vb = 0.98;
  double vc = 1.02;
  double vd = 1.05;
  int orientation = +1;

  friend bool operator==(const DroopCurve&, const DroopCurve&) = default;
};

inline constexpr DroopCurve kDefaultCurve{0.95, 0.98, 1.02, 1.05, +1};

/// Why the curve is unusable, or nullopt when it is well formed.
std::optional<std::string> curve_defect(const DroopCurve& curve);
bool is_well_formed(const DroopCurve& curve);
/// Throws MalformedCurveError.
void validate(const DroopCurve& curve);

/// Parses `va,vb,vc,vd` with an optional trailing `,inverted`. Ordering is not
/// checked here, so that malformed curves can still be reported as such.
DroopCurve parse_curve(std::string_view text);
std::string format_curve(const DroopCurve& curve);

struct InverterParams {
  double s_max = 0.1;   // pu on the system base (2 MVA on 20 MVA)
  double p_ref = 0.05;  // pu
  double tau = 0.1;     // s, first-order response of the reactive power
  double dt = 0.5;      // s, VVC control (sampling) period

  void validate() const;
};

/// sqrt(s_max^2 - p_ref^2).
double q_max(const InverterParams& params);
double q_max(double s_max, double p_ref);

/// Reactive power command, positive = injected.
double droop_qref(const DroopCurve& curve, double v, double q_max);

/// Slope dQ/dv of the droop at `v` (zero on the flat parts).
double local_slope(const DroopCurve& curve, double v, double q_max);

/// (lower segment, upper segment) slopes, pu-Q per pu-V.
std::pair<double, double> segment_slopes(const DroopCurve& curve, double q_max);

/// Slope of the chord joining (va, +q_max) and (vd, -q_max).
double chord_slope(const DroopCurve& curve, double q_max);

DroopCurve translate(const DroopCurve& curve, double offset);

}  // namespace vvcguard::vvc
