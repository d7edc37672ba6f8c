#include <cmath>
#include <random>

#include "doctest.h"
#include "vvcguard/errors.hpp"
#include "vvcguard/grid.hpp"
#include "vvcguard/powerflow.hpp"
#include "vvcguard/simulator.hpp"

using namespace vvcguard;
using namespace vvcguard::grid;

namespace {

NetworkSpec calibrated_spec() {
  const auto profile = calibration_load_profile();
  return benchmark_spec(profile);
}

void require_close(double a, double b, double tol) { CHECK(std::abs(a - b) <= tol); }

}  // namespace

TEST_CASE("line impedance in per unit") {
  const auto pu = to_per_unit(calibrated_spec());
  const double z_base = 12.47 * 12.47 / 20.0;
  REQUIRE(!pu.lines.empty());
  require_close(pu.lines[0].z().real(), 0.1529 / z_base, 1e-15);
  require_close(pu.lines[0].z().imag(), 0.1406 / z_base, 1e-15);
  require_close(pu.lines[0].z().real(), 0.01967, 5e-6);
  require_close(pu.lines[0].z().imag(), 0.01808, 5e-6);
}

TEST_CASE("source impedance follows short-circuit level and X/R") {
  const auto pu = to_per_unit(calibrated_spec());
  require_close(std::abs(pu.z_source), 20.0 / 500.0, 1e-15);
  require_close(pu.z_source.imag() / pu.z_source.real(), 6.0, 1e-12);
}

TEST_CASE("per-unit round trip recovers the physical description") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    NetworkSpec spec = calibrated_spec();
    spec.source.short_circuit_mva *= u(rng);
    spec.source.x_over_r *= u(rng);
    for (auto& line : spec.lines) {
      line.r_ohm_per_km *= u(rng);
      line.x_ohm_per_km *= u(rng);
      line.length_km *= u(rng);
    }
    for (auto& load : spec.loads) load.p_mw *= u(rng);
    for (auto& t : spec.interface_transformers) t.x_pu *= u(rng);
    const NetworkSpec back = from_per_unit(to_per_unit(spec));
    require_close(back.source.short_circuit_mva, spec.source.short_circuit_mva, 1e-12 * spec.source.short_circuit_mva);
    require_close(back.source.x_over_r, spec.source.x_over_r, 1e-12 * spec.source.x_over_r);
    for (std::size_t k = 0; k < spec.lines.size(); ++k) {
      require_close(back.lines[k].r_ohm_per_km, spec.lines[k].r_ohm_per_km, 1e-12);
      require_close(back.lines[k].x_ohm_per_km, spec.lines[k].x_ohm_per_km, 1e-12);
      CHECK(back.lines[k].length_km == spec.lines[k].length_km);
    }
    for (std::size_t k = 0; k < spec.loads.size(); ++k) {
      require_close(back.loads[k].p_mw, spec.loads[k].p_mw, 1e-12);
      require_close(back.loads[k].q_mvar, spec.loads[k].q_mvar, 1e-12);
    }
    for (std::size_t k = 0; k < spec.interface_transformers.size(); ++k) {
      require_close(back.interface_transformers[k].x_pu, spec.interface_transformers[k].x_pu, 1e-12);
      require_close(back.interface_transformers[k].r_pu, spec.interface_transformers[k].r_pu, 1e-12);
    }
  }
}

TEST_CASE("bad per-unit bases are rejected") {
  NetworkSpec spec = calibrated_spec();
  spec.base.s_base_mva = 0.0;
  CHECK_THROWS_AS(to_per_unit(spec), DomainError);
  spec = calibrated_spec();
  spec.base.v_base_mv_kv = -1.0;
  CHECK_THROWS_AS(to_per_unit(spec), DomainError);
}

TEST_CASE("topology checks") {
  SUBCASE("missing line") {
    NetworkSpec spec = calibrated_spec();
    spec.lines.pop_back();
    CHECK_THROWS_AS(NetworkModel{spec}, TopologyError);
  }
  SUBCASE("cycle with an island") {
    NetworkSpec spec = calibrated_spec();
    // Replace 8-9 by 2-4, closing the loop 2-3-4 and cutting off bus 9.
    spec.lines.back() = LineSpec{2, 4, kLineR, kLineX, 1.0};
    CHECK_THROWS_AS(NetworkModel{spec}, TopologyError);
  }
  SUBCASE("unknown bus in a load") {
    NetworkSpec spec = calibrated_spec();
    spec.loads.push_back(LoadSpec{42, 1.0, 0.3, 1.0});
    CHECK_THROWS_AS(NetworkModel{spec}, ReferenceError);
  }
  SUBCASE("self loop") {
    NetworkSpec spec = calibrated_spec();
    spec.lines.back().to_bus = spec.lines.back().from_bus;
    CHECK_THROWS_AS(NetworkModel{spec}, TopologyError);
  }
  SUBCASE("negative load") {
    NetworkSpec spec = calibrated_spec();
    spec.loads[0].p_mw = -1.0;
    CHECK_THROWS_AS(NetworkModel{spec}, DomainError);
  }
}

TEST_CASE("benchmark layout") {
  const NetworkModel model(calibrated_spec());
  CHECK(model.bus_count() == 9);
  CHECK(model.per_unit().lines.size() == 8);
  CHECK(model.per_unit().dg_buses == std::vector<BusId>{4, 5, 6, 9});
  CHECK(model.dg_rating(0) == doctest::Approx(0.1));
}

TEST_CASE("bundled config matches the builtin benchmark") {
  const NetworkSpec bundled = load_network_config(bundled_network_config());
  const NetworkSpec builtin = calibrated_spec();
  CHECK(network_config_to_string(bundled) == network_config_to_string(builtin));
}

TEST_CASE("config text round trip") {
  const NetworkSpec spec = calibrated_spec();
  const NetworkSpec back = network_config_from_string(network_config_to_string(spec));
  CHECK(network_config_to_string(back) == network_config_to_string(spec));
  CHECK_THROWS_AS(network_config_from_string("{not json"), FormatError);
}

TEST_CASE("feeder membership is config driven") {
  NetworkSpec spec = calibrated_spec();
  // Hang bus 6 off bus 5 instead of the substation: a single long feeder.
  for (auto& line : spec.lines) {
    if (line.from_bus == 1 && line.to_bus == 6) line.from_bus = 5;
  }
  const NetworkModel model(spec);
  CHECK(model.depth(model.index_of(9)) == 8);
}

TEST_CASE("Thevenin impedance") {
  const NetworkModel model(calibrated_spec());
  const auto& pu = model.per_unit();

  SUBCASE("substation bus sees only the source") {
    const Complex z = thevenin_impedance(model, 1);
    CHECK(std::abs(z - pu.z_source) < 1e-15);
  }
  SUBCASE("symmetric feeders give equal sensitivities") {
    // Buses 2 and 6 are each one line away from the substation.
    CHECK(std::abs(thevenin_impedance(model, 2) - thevenin_impedance(model, 6)) < 1e-15);
    CHECK(std::abs(thevenin_impedance(model, 4) - thevenin_impedance(model, 8)) < 1e-15);
  }
  SUBCASE("reactance grows along each feeder") {
    for (const auto& feeder : {std::vector<BusId>{1, 2, 3, 4, 5}, std::vector<BusId>{1, 6, 7, 8, 9}}) {
      for (std::size_t k = 1; k < feeder.size(); ++k) {
        CHECK(thevenin_impedance(model, feeder[k]).imag() >= thevenin_impedance(model, feeder[k - 1]).imag());
      }
    }
  }
  SUBCASE("unknown bus") { CHECK_THROWS_AS(thevenin_impedance(model, 99), ReferenceError); }
  SUBCASE("DG1 reactance against a numerical sensitivity") {
    auto background = sim::default_background(model, 4);
    std::vector<powerflow::Injection> inj{{4, 0.05, 0.0}};
    for (const auto& b : background) inj.push_back({b.bus, b.params.p_ref, 0.0});
    const double delta = 1e-4;
    const double v0 = std::abs(powerflow::solve(model, inj).pcc_at(model, 4));
    inj[0].q = delta;
    const double v1 = std::abs(powerflow::solve(model, inj).pcc_at(model, 4));
    const double numeric = (v1 - v0) / delta;
    const double x_th = pcc_thevenin_impedance(model, 4).imag();
    CHECK(std::abs(numeric - x_th) / x_th < 0.05);
  }
}

TEST_CASE("calibration reproduces the frozen profile") {
  const NetworkSpec unit = benchmark_spec(uniform_load_profile(1.0));
  const double scale = sim::calibrate_load_scale(unit, 4, vvc::InverterParams{}, vvc::kDefaultCurve, 1.011);
  const double frozen = calibration_load_profile().front().p_mw;
  CHECK(std::abs(scale - frozen) < 1e-6);
  const double v = sim::settled_pcc_voltage(NetworkModel(calibrated_spec()), 4, vvc::InverterParams{}, vvc::kDefaultCurve);
  CHECK(std::abs(v - 1.011) < 1e-3);
}
