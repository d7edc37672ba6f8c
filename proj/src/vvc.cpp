#include "vvcguard/vvc.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

#include "vvcguard/errors.hpp"

namespace vvcguard::vvc {

namespace {

constexpr double kWindowLow = 0.5;
constexpr double kWindowHigh = 1.5;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

std::optional<std::string> curve_defect(const DroopCurve& c) {
  for (double v : {c.va, c.vb, c.vc, c.vd}) {
    if (!std::isfinite(v)) return "breakpoint is not finite";
    if (!(v > kWindowLow && v < kWindowHigh)) return "breakpoint outside (0.5, 1.5) pu";
  }
  if (!(c.va < c.vb)) return "requires va < vb";
  if (!(c.vb <= c.vc)) return "requires vb <= vc";
  if (!(c.vc < c.vd)) return "requires vc < vd";
  if (c.orientation != 1 && c.orientation != -1) return "orientation must be +1 or -1";
  return std::nullopt;
}

bool is_well_formed(const DroopCurve& curve) { return !curve_defect(curve).has_value(); }

void validate(const DroopCurve& curve) {
  if (auto defect = curve_defect(curve)) {
    throw MalformedCurveError("malformed droop curve " + format_curve(curve) + ": " + *defect);
  }
}

DroopCurve parse_curve(std::string_view text) {
  std::vector<std::string_view> fields;
  while (true) {
    const auto comma = text.find(',');
    fields.push_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  DroopCurve curve;
  if (fields.size() == 5) {
    if (fields[4] != "inverted") {
      throw FormatError("unknown curve flag '" + std::string(fields[4]) + "'");
    }
    curve.orientation = -1;
    fields.pop_back();
  }
  if (fields.size() != 4) throw FormatError("a curve literal needs four breakpoints: va,vb,vc,vd");
  double* slots[] = {&curve.va, &curve.vb, &curve.vc, &curve.vd};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto f = fields[k];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), *slots[k]);
    if (ec != std::errc{} || ptr != f.data() + f.size()) {
      throw FormatError("bad breakpoint '" + std::string(f) + "'");
    }
  }
  return curve;
}

std::string format_curve(const DroopCurve& c) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g,%.6g%s", c.va, c.vb, c.vc, c.vd,
                c.orientation < 0 ? ",inverted" : "");
  return buf;
}

void InverterParams::validate() const {
  if (!(s_max > 0.0)) throw DomainError("s_max must be positive");
  if (!(p_ref >= 0.0 && p_ref <= s_max)) throw DomainError("p_ref must lie in [0, s_max]");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (!(dt > 0.0)) throw DomainError("control period must be positive");
}

double q_max(double s_max, double p_ref) {
  if (p_ref > s_max) throw DomainError("p_ref exceeds the inverter rating");
  return std::sqrt(s_max * s_max - p_ref * p_ref);
}

double q_max(const InverterParams& params) { return q_max(params.s_max, params.p_ref); }

double droop_qref(const DroopCurve& c, double v, double q_max) {
  double q = 0.0;
  if (v < c.va) {
    q = q_max;
  } else if (v < c.vb) {
    q = q_max * (c.vb - v) / (c.vb - c.va);
  } else if (v < c.vc) {
    q = 0.0;
  } else if (v < c.vd) {
    q = -q_max * (v - c.vc) / (c.vd - c.vc);
  } else {
    q = -q_max;
  }
  return c.orientation * q;
}

double local_slope(const DroopCurve& c, double v, double q_max) {
  double s = 0.0;
  if (v >= c.va && v < c.vb) {
    s = -q_max / (c.vb - c.va);
  } else if (v >= c.vc && v < c.vd) {
    s = -q_max / (c.vd - c.vc);
  }
  return c.orientation * s;
}

std::pair<double, double> segment_slopes(const DroopCurve& c, double q_max) {
  return {c.orientation * -q_max / (c.vb - c.va), c.orientation * -q_max / (c.vd - c.vc)};
}

double chord_slope(const DroopCurve& c, double q_max) {
  return c.orientation * -2.0 * q_max / (c.vd - c.va);
}

DroopCurve translate(const DroopCurve& c, double offset) {
  return DroopCurve{c.va + offset, c.vb + offset, c.vc + offset, c.vd + offset, c.orientation};
}

}  // namespace vvcguard::vvc
