#include <cmath>
#include <set>

#include "doctest.h"
#include "vvcguard/errors.hpp"
#include "vvcguard/features.hpp"

using namespace vvcguard;
using namespace vvcguard::features;

namespace {

const double kPi = std::acos(-1.0);

std::vector<sim::TraceRow> rows_from(const std::vector<double>& v) {
  std::vector<sim::TraceRow> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    sim::TraceRow r;
    r.t = 0.01 * static_cast<double>(k);
    r.v_mag = {v[k], v[k], v[k]};
    r.i_mag = {0.05, 0.05, 0.05};
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("zeta values") {
  CHECK(zeta(1.00, 1.00, 100.0, 2) == 0.0);
  CHECK(zeta(1.02, 1.00, 100.0, 2) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(zeta(0.98, 1.00, 100.0, 2) == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(zeta(1.03, 1.00, 10.0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(zeta(1.0, 1.0, 0.0, 2), DomainError);
  CHECK_THROWS_AS(zeta(1.0, 1.0, 1.0, 0), DomainError);
}

TEST_CASE("zeta of a sinusoid averages to c a^2 / 2") {
  const double a = 0.01;
  std::vector<double> v;
  for (int k = 0; k < 1000; ++k) v.push_back(1.0 + a * std::sin(2.0 * kPi * k / 100.0));
  const auto rows = rows_from(v);
  const sim::TraceWindow w{rows, 0.0};
  CHECK(window_aggregate(w, Column::zeta1) == doctest::Approx(100.0 * a * a / 2.0).epsilon(1e-9));
  CHECK(window_aggregate(w, Column::v1) == doctest::Approx(1.0).epsilon(1e-12));
  ZetaParams nominal;
  nominal.mean_reference = false;
  nominal.v_nominal = 0.99;
  CHECK(window_aggregate(w, Column::zeta1, nominal) ==
        doctest::Approx(100.0 * (a * a / 2.0 + 0.01 * 0.01)).epsilon(1e-9));
}

TEST_CASE("constant window") {
  const auto rows = rows_from(std::vector<double>(50, 1.011));
  const sim::TraceWindow w{rows, 0.0};
  CHECK(window_aggregate(w, Column::zeta2) < 1e-20);
  CHECK(window_aggregate(w, Column::v3) == doctest::Approx(1.011));
  CHECK(window_aggregate(w, Column::i2) == doctest::Approx(0.05));
  CHECK(window_aggregate(w, Column::vd) == doctest::Approx(1.011));
  CHECK(std::abs(window_aggregate(w, Column::vq)) < 1e-15);
  const sim::TraceWindow empty{};
  CHECK_THROWS_AS(window_aggregate(empty, Column::v1), RangeError);
}

TEST_CASE("dq aggregates use the window frame") {
  auto rows = rows_from(std::vector<double>(10, 1.0));
  for (auto& r : rows) r.v_angle = 0.4;
  const sim::TraceWindow w{rows, 0.4};
  CHECK(window_aggregate(w, Column::vd) == doctest::Approx(1.0));
  CHECK(std::abs(window_aggregate(w, Column::vq)) < 1e-15);
  const sim::TraceWindow skew{rows, 0.4 - kPi / 2.0};
  CHECK(std::abs(window_aggregate(skew, Column::vd)) < 1e-12);
  CHECK(window_aggregate(skew, Column::vq) == doctest::Approx(1.0));
}

TEST_CASE("feature vector layout") {
  const auto a = rows_from(std::vector<double>(200, 1.011));
  std::vector<double> osc;
  for (int k = 0; k < 1001; ++k) osc.push_back(1.04 + 0.006 * std::sin(2.0 * kPi * k / 100.0));
  const auto b = rows_from(osc);
  const vvc::DroopCurve attack{0.95, 1.02, 1.04, 1.05, +1};
  const auto f = assemble_features({a, 0.0}, {b, 0.0}, vvc::kDefaultCurve, attack);
  REQUIRE(f.size() == kMonitoredDim);
  CHECK(f[0] == 0.95);
  CHECK(f[3] == 1.05);
  CHECK(f[17] == 0.95);
  CHECK(f[18] == 1.02);
  CHECK(f[19] == 1.04);
  const auto& names = feature_names(FeatureMode::monitored);
  REQUIRE(names.size() == kMonitoredDim);
  CHECK(names[0] == "pre_va");
  CHECK(names[4] == "pre_I1");
  CHECK(names[14] == "pre_zetaV1");
  CHECK(names[31] == "post_zetaV1");
  CHECK(f[31] > f[14]);
  CHECK(f[14] < 1e-20);
  CHECK(f[31] == doctest::Approx(100.0 * 0.006 * 0.006 / 2.0).epsilon(1e-3));
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());

  const auto p = project(f, FeatureMode::predictive);
  REQUIRE(p.size() == kPredictiveDim);
  CHECK(p[1] == 1.02);
  CHECK(p[4] == f[4]);
  CHECK(feature_names(FeatureMode::predictive)[0] == "new_va");
  CHECK(feature_names(FeatureMode::predictive)[4] == "pre_I1");
  CHECK_THROWS_AS(project(p, FeatureMode::predictive), SchemaError);

  auto bad = b;
  bad[3].v_mag[0] = std::nan("");
  CHECK_THROWS_AS(assemble_features({a, 0.0}, {bad, 0.0}, vvc::kDefaultCurve, attack), SchemaError);
}

TEST_CASE("features from a simulated attack") {
  const auto model = grid::default_benchmark_network();
  const vvc::DroopCurve attack{0.95, 1.02, 1.04, 1.05, +1};
  const auto trace = sim::run_closed_loop(model, 4, vvc::InverterParams{}, vvc::kDefaultCurve, attack,
                                          sim::ClosedLoopConfig{});
  const auto [pre, post] = sim::extract_window(trace, 3.0, 2.0, 10.0);
  const auto f = assemble_features(pre, post, vvc::kDefaultCurve, attack);
  CHECK(f[14] < 1e-6);
  CHECK(f[31] > 10.0 * f[14]);
  for (std::size_t k : {7u, 8u, 9u}) CHECK(f[k] == doctest::Approx(1.011).epsilon(2e-3));  // V1..V3
  for (std::size_t k : {4u, 5u, 6u}) CHECK(f[k] == doctest::Approx(0.05 / 1.011).epsilon(0.2));
}

TEST_CASE("schema hash") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  CHECK(schema_hash(FeatureMode::monitored) == schema_hash(FeatureMode::monitored));
  CHECK(schema_hash(FeatureMode::monitored) != schema_hash(FeatureMode::predictive));
  CHECK(parse_mode("predictive") == FeatureMode::predictive);
  CHECK(dimension(FeatureMode::predictive) == 17);
  CHECK_THROWS_AS(parse_mode("other"), FormatError);
}
