#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "iloc/core.hpp"
#include "iloc/wavesim.hpp"

using namespace iloc;
using namespace iloc::wavesim;

namespace {

GvpModel isotropic(double c0, double omega_ref = 1.0) {
  return {GvpKind::Isotropic, c0, omega_ref, 0.0, {}};
}

}  // namespace

TEST_CASE("group velocity follows the square-root dispersion law") {
  const GvpModel g = isotropic(5.0);
  CHECK(group_velocity(g, 0.3, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(group_velocity(g, 2.1, 4.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(group_velocity(g, 0.0, 0.0), Error);
  CHECK_THROWS_AS(group_velocity(g, 0.0, -1.0), Error);
}

TEST_CASE("elliptical profile evaluates c0(1 + eps cos 2theta)") {
  const GvpModel g{GvpKind::Elliptical, 5.0, 1.0, 0.2, {}};
  CHECK(group_velocity(g, 0.0, 1.0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(group_velocity(g, M_PI / 2.0, 1.0) == doctest::Approx(4.0).epsilon(1e-12));

  const GvpModel bad{GvpKind::Elliptical, 5.0, 1.0, 1.2, {}};
  CHECK_THROWS_AS(group_velocity(bad, 0.0, 1.0), Error);
}

TEST_CASE("group velocity is 2pi-periodic") {
  const GvpModel iso = isotropic(5.0);
  const GvpModel ell{GvpKind::Elliptical, 5.0, 1.0, 0.3, {}};
  for (double theta : {0.0, 0.7, 2.0, 4.5}) {
    CHECK(group_velocity(iso, theta + 2.0 * M_PI, 2.0) ==
          group_velocity(iso, theta, 2.0));
    CHECK(group_velocity(ell, theta + 2.0 * M_PI, 2.0) ==
          doctest::Approx(group_velocity(ell, theta, 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("tabulated profile interpolates periodically") {
  GvpModel g;
  g.kind = GvpKind::Tabulated;
  g.omega_ref_khz = 1.0;
  g.table = {{0.0, 4.0}, {M_PI, 6.0}};
  CHECK(group_velocity(g, 0.0, 1.0) == doctest::Approx(4.0));
  CHECK(group_velocity(g, M_PI / 2.0, 1.0) == doctest::Approx(5.0));
  // halfway across the wrap between pi and 2pi
  CHECK(group_velocity(g, 1.5 * M_PI, 1.0) == doctest::Approx(5.0));
}

TEST_CASE("analytic tdoa is distance over speed minus the first arrival") {
  const GvpModel g = isotropic(1.0);
  SensorArray a;
  a.sensors = {{0.0, 0.0}, {10.0, 0.0}};
  const TdoaVector t = analytic_tdoa(g, a, {0.0, 0.0}, 1.0);
  CHECK(t.values[0] == 0.0);
  CHECK(t.values[1] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(t.anchor_index == 0);
}

TEST_CASE("rectangle centre on an isotropic plate is the singularity point") {
  const GvpModel g = isotropic(5.0);
  SensorArray a;
  a.sensors = {{0.0, 0.0}, {10.0, 0.0}, {10.0, 6.0}, {0.0, 6.0}};
  const TdoaVector t = analytic_tdoa(g, a, {5.0, 3.0}, 1.0);
  for (double v : t.values) CHECK(v == 0.0);
}

TEST_CASE("grid location 18 matches an independent distance oracle") {
  const GvpModel g = isotropic(5.0);
  const SensorArray a = default_six_sensor_array();
  const auto grid = grid_locations(7, 5, 20.0, 145.0, 100.0);
  const ImpactLocation p = grid[17];  // location 18, the grid centre
  CHECK(p.x == doctest::Approx(145.0));
  CHECK(p.y == doctest::Approx(100.0));

  const TdoaVector t = analytic_tdoa(g, a, p, 1.0);

  // straight-line distances divided by the constant speed
  std::vector<double> oracle;
  for (const auto& s : a.sensors) {
    oracle.push_back(std::hypot(p.x - s.x, p.y - s.y) / 5.0);
  }
  const double t_min = *std::min_element(oracle.begin(), oracle.end());
  for (std::size_t j = 0; j < oracle.size(); ++j) {
    CHECK(t.values[j] == doctest::Approx(oracle[j] - t_min).epsilon(1e-12));
  }
}

TEST_CASE("noise-free analytic tdoa matches the oracle on random impacts") {
  const GvpModel g = isotropic(500.0);
  const SensorArray a = default_six_sensor_array();
  const PlateGeometry plate = default_plate();
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const ImpactLocation p{plate.length_x * rng.uniform(),
                           plate.length_y * rng.uniform()};
    const TdoaVector t = analytic_tdoa(g, a, p, 1.0);
    std::vector<double> arrivals;
    for (const auto& s : a.sensors) {
      arrivals.push_back(std::hypot(p.x - s.x, p.y - s.y) / 500.0);
    }
    const double t0 = *std::min_element(arrivals.begin(), arrivals.end());
    for (std::size_t j = 0; j < arrivals.size(); ++j) {
      CHECK(std::abs(t.values[j] - (arrivals[j] - t0)) < 1e-9);
    }
  }
}

TEST_CASE("noisy arrivals can move the anchor but keep the vector valid") {
  const GvpModel g = isotropic(500.0);
  const SensorArray a = default_six_sensor_array();
  const TdoaVector t = analytic_tdoa(g, a, {100.0, 90.0}, 1.0, {0.01, 4});
  CHECK_NOTHROW(t.validate());
  const TdoaVector again = analytic_tdoa(g, a, {100.0, 90.0}, 1.0, {0.01, 4});
  CHECK(t.values == again.values);
}

TEST_CASE("frequency retargeting scales values by sqrt(omega/omega_star)") {
  const TdoaVector t = tdoa_from_values({0.0, 0.2, 0.4}, 4.0);

  SUBCASE("identity at the same frequency") {
    const TdoaVector same = scale_tdoa(t, 4.0);
    CHECK(same.values == t.values);
    CHECK(same.frequency_khz == 4.0);
  }

  SUBCASE("factor two from 4 kHz to 1 kHz") {
    const TdoaVector scaled = scale_tdoa(t, 1.0);
    CHECK(scaled.values[0] == 0.0);
    CHECK(scaled.values[1] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(scaled.values[2] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(scaled.frequency_khz == 1.0);
    CHECK(scaled.anchor_index == t.anchor_index);
  }

  SUBCASE("invalid frequency") {
    CHECK_THROWS_AS(scale_tdoa(t, 0.0), Error);
  }
}

TEST_CASE("retargeting preserves the component order on random vectors") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> arrivals(6);
    for (double& v : arrivals) v = rng.uniform();
    const TdoaVector t = tdoa_from_arrivals(arrivals, 1.0);
    const double omega_star = 0.1 + 4.0 * rng.uniform();
    const TdoaVector s = scale_tdoa(t, omega_star);
    CHECK(argsort(s.values) == argsort(t.values));
  }
}

TEST_CASE("temperature scaling multiplies values and keeps cosine similarity") {
  const TdoaVector t = tdoa_from_values({0.0, 0.2, 0.4}, 1.0);
  const TdoaVector one = apply_temperature_scaling(t, 1.0);
  CHECK(one.values == t.values);

  const TdoaVector hot = apply_temperature_scaling(t, 1.15);
  CHECK(hot.values[1] == doctest::Approx(0.23).epsilon(1e-12));
  CHECK(hot.values[2] == doctest::Approx(0.46).epsilon(1e-12));
  CHECK_THROWS_AS(apply_temperature_scaling(t, 0.0), Error);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> arrivals(5);
    for (double& v : arrivals) v = rng.uniform();
    const TdoaVector base = tdoa_from_arrivals(arrivals, 1.0);
    const TdoaVector scaled =
        apply_temperature_scaling(base, 0.2 + 3.0 * rng.uniform());
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < base.values.size(); ++j) {
      dot += base.values[j] * scaled.values[j];
      na += base.values[j] * base.values[j];
      nb += scaled.values[j] * scaled.values[j];
    }
    CHECK(dot / std::sqrt(na * nb) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("synthetic burst onset and spacing follow the delays") {
  const GvpModel g = isotropic(10.0);
  SensorArray a;
  a.sensors = {{0.0, 0.0}, {10.0, 0.0}, {20.0, 0.0}};
  const double rate = 100.0;
  const auto sigs =
      synthesize_signals(g, a, {0.0, 0.0}, 1.0, rate, 1e9, 1);
  REQUIRE(sigs.size() == 3);

  auto onset = [&](const SyntheticSignal& s) {
    const double peak =
        *std::max_element(s.samples.begin(), s.samples.end(),
                          [](double x, double y) { return std::abs(x) < std::abs(y); });
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      if (std::abs(s.samples[i]) > 1e-9 * std::abs(peak)) return s.time_at(i);
    }
    return s.time_at(s.samples.size() - 1);
  };

  // zero-distance sensor starts at t = 0 within one sample
  CHECK(onset(sigs[0]) <= 1.0 / rate + 1e-12);
  // 10 mm apart at 10 mm/ms: 1 ms onset separation within one sample
  CHECK(onset(sigs[1]) - onset(sigs[0]) ==
        doctest::Approx(1.0).epsilon(0.02));
  CHECK(onset(sigs[2]) - onset(sigs[1]) ==
        doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("burst envelope peaks at delay plus half the window") {
  const GvpModel g = isotropic(10.0);
  SensorArray a;
  a.sensors = {{15.0, 0.0}};
  const double rate = 200.0;
  const auto sigs = synthesize_signals(g, a, {0.0, 0.0}, 1.0, rate, 1e9, 1);
  const double delay = 1.5;  // 15 mm at 10 mm/ms
  const double expected_peak = delay + 0.5 * burst_window_ms(1.0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < sigs[0].samples.size(); ++i) {
    if (std::abs(sigs[0].samples[i]) > std::abs(sigs[0].samples[best])) best = i;
  }
  // |sin| peaks every half carrier period around the envelope maximum
  CHECK(std::abs(sigs[0].time_at(best) - expected_peak) <= 0.25 + 1.0 / rate);
}

TEST_CASE("signal synthesis is deterministic and guards the sample rate") {
  const GvpModel g = isotropic(10.0);
  SensorArray a;
  a.sensors = {{5.0, 0.0}, {9.0, 2.0}};
  const auto s1 = synthesize_signals(g, a, {0.0, 0.0}, 1.0, 50.0, 30.0, 99);
  const auto s2 = synthesize_signals(g, a, {0.0, 0.0}, 1.0, 50.0, 30.0, 99);
  REQUIRE(s1.size() == s2.size());
  for (std::size_t j = 0; j < s1.size(); ++j) {
    CHECK(s1[j].samples == s2[j].samples);
  }
  CHECK_THROWS_AS(synthesize_signals(g, a, {0.0, 0.0}, 1.0, 9.0, 30.0, 1),
                  Error);
}

TEST_CASE("signal csv round trip") {
  namespace fs = std::filesystem;
  const GvpModel g = isotropic(10.0);
  SensorArray a;
  a.sensors = {{5.0, 0.0}};
  const auto sigs = synthesize_signals(g, a, {0.0, 0.0}, 1.0, 50.0, 1e9, 1);
  const auto path = (fs::temp_directory_path() / "iloc_sig.csv").string();
  save_signal_csv(sigs[0], path);
  const SyntheticSignal back = load_signal_csv(path);
  REQUIRE(back.samples.size() == sigs[0].samples.size());
  CHECK(back.sample_rate_khz == doctest::Approx(50.0).epsilon(1e-9));
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i] == sigs[0].samples[i]);
  }
}

TEST_CASE("extraction noise keeps vectors valid and is seed stable") {
  const TdoaVector t = tdoa_from_values({0.0, 0.1, 0.3, 0.2}, 1.0);
  CHECK(add_extraction_noise(t, {0.0, 5}).values == t.values);
  const TdoaVector n1 = add_extraction_noise(t, {0.02, 5});
  const TdoaVector n2 = add_extraction_noise(t, {0.02, 5});
  CHECK(n1.values == n2.values);
  CHECK_NOTHROW(n1.validate());
}

TEST_CASE("critical delamination load") {
  SUBCASE("isotropic reduction") {
    // D12 + 2 D66 = D makes A = 1 and D_eff = D
    const LaminateStiffness lam{120.0, 120.0, 60.0, 30.0, 700.0};
    CHECK(effective_stiffness(lam) == doctest::Approx(120.0).epsilon(1e-12));
    CHECK(critical_delamination_load(lam) ==
          doctest::Approx(M_PI * std::sqrt(32.0 * 120.0 * 700.0 / 3.0))
              .epsilon(1e-12));
  }

  SUBCASE("matches the reported load within half a percent") {
    // effective stiffness pinned to 277.8 N*m
    const LaminateStiffness lam{277.8, 277.8, 138.9, 69.45, 700.0};
    REQUIRE(effective_stiffness(lam) == doctest::Approx(277.8).epsilon(1e-12));
    CHECK(critical_delamination_load(lam) ==
          doctest::Approx(4524.3).epsilon(0.005));
  }

  SUBCASE("doubling the toughness scales the load by sqrt(2)") {
    const LaminateStiffness lam{250.0, 180.0, 90.0, 55.0, 700.0};
    LaminateStiffness doubled = lam;
    doubled.g2c *= 2.0;
    CHECK(critical_delamination_load(doubled) /
              critical_delamination_load(lam) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  }

  SUBCASE("monotone in the stiffnesses and toughness") {
    const LaminateStiffness base{250.0, 180.0, 90.0, 55.0, 700.0};
    const double f0 = critical_delamination_load(base);
    for (auto bump : {&LaminateStiffness::d11, &LaminateStiffness::d22,
                      &LaminateStiffness::g2c}) {
      LaminateStiffness up = base;
      up.*bump *= 1.3;
      CHECK(critical_delamination_load(up) > f0);
    }
  }

  SUBCASE("invalid stiffness") {
    CHECK_THROWS_AS(
        critical_delamination_load({0.0, 180.0, 90.0, 55.0, 700.0}), Error);
    CHECK_THROWS_AS(
        critical_delamination_load({250.0, 180.0, 90.0, 55.0, 0.0}), Error);
  }
}
