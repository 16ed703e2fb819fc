#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "iloc/core.hpp"
#include "iloc/eval.hpp"
#include "iloc/wavesim.hpp"

using namespace iloc;
using namespace iloc::eval;
namespace fs = std::filesystem;

namespace {

Dataset grid_dataset(int cols = 7, int rows = 5, double noise = 0.0,
                     std::uint64_t seed = 1) {
  Dataset d;
  d.geometry = wavesim::default_plate();
  d.array = wavesim::default_six_sensor_array();
  const wavesim::GvpModel g{wavesim::GvpKind::Isotropic, 500.0, 1.0, 0.0, {}};
  int id = 0;
  for (const auto& p : wavesim::grid_locations(cols, rows, 20.0, 145.0, 100.0)) {
    ImpactRecord r;
    r.id = ++id;
    r.location = p;
    r.tdoa = wavesim::analytic_tdoa(g, d.array, p, 1.0);
    if (noise > 0.0) {
      r.tdoa = wavesim::add_extraction_noise(
          r.tdoa, {noise, Rng::substream(seed, std::uint64_t(id))});
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

std::set<std::pair<double, double>> locations_of(const Dataset& d) {
  std::set<std::pair<double, double>> out;
  for (const auto& r : d.records) out.insert({r.location.x, r.location.y});
  return out;
}

}  // namespace

TEST_CASE("grid inference recovers the 7x5 lattice") {
  const Dataset d = grid_dataset();
  const GridLayout g = infer_grid(d);
  REQUIRE(g.xs.size() == 7);
  REQUIRE(g.ys.size() == 5);
  CHECK(g.xs.front() == doctest::Approx(85.0));
  CHECK(g.xs.back() == doctest::Approx(205.0));
  CHECK(g.col_of(145.0) == 4);
  CHECK(g.row_of(60.0) == 1);
  CHECK(g.col_of(300.0) == 0);
}

TEST_CASE("named reference subsets") {
  const Dataset d = grid_dataset();

  SUBCASE("ri35 is the identity") {
    CHECK(subset_reference(d, SubsetKind::Ri35).records.size() == 35);
  }

  SUBCASE("ri15 keeps columns 1, 4 and 7") {
    const Dataset s = subset_reference(d, SubsetKind::Ri15);
    REQUIRE(s.records.size() == 15);
    for (const auto& r : s.records) {
      const double x = r.location.x;
      CHECK((std::abs(x - 85.0) < 1e-9 || std::abs(x - 145.0) < 1e-9 ||
             std::abs(x - 205.0) < 1e-9));
    }
  }

  SUBCASE("ri9 further drops rows 2 and 4") {
    const Dataset s = subset_reference(d, SubsetKind::Ri9);
    REQUIRE(s.records.size() == 9);
    for (const auto& r : s.records) {
      const double y = r.location.y;
      CHECK((std::abs(y - 60.0) < 1e-9 || std::abs(y - 100.0) < 1e-9 ||
             std::abs(y - 140.0) < 1e-9));
    }
    // subset relation with ri15
    const auto ri15 = locations_of(subset_reference(d, SubsetKind::Ri15));
    for (const auto& loc : locations_of(s)) CHECK(ri15.count(loc) == 1);
  }

  SUBCASE("ext9 is the innermost block with a strictly smaller hull") {
    const Dataset s = subset_reference(d, SubsetKind::Ext9);
    REQUIRE(s.records.size() == 9);
    std::vector<Point2> ext_pts, ri9_pts;
    for (const auto& r : s.records) ext_pts.push_back(r.location);
    for (const auto& r : subset_reference(d, SubsetKind::Ri9).records) {
      ri9_pts.push_back(r.location);
    }
    const auto ext_hull = convex_hull(ext_pts);
    const auto ri9_hull = convex_hull(ri9_pts);
    for (const auto& p : ext_hull) {
      CHECK(point_in_hull(ri9_hull, p, 1e-9));
    }
    // and strictly inside: ext9 corners are not ri9 hull corners
    for (const auto& p : ext_hull) {
      for (const auto& q : ri9_hull) {
        CHECK(dist(p, q) > 1.0);
      }
    }
  }

  SUBCASE("non-grid data is rejected for named subsets") {
    Dataset off = d;
    off.records[4].location.x += 7.0;  // breaks the lattice
    CHECK_THROWS_AS(subset_reference(off, SubsetKind::Ri15), Error);
    Dataset small = grid_dataset(3, 3);
    CHECK_THROWS_AS(subset_reference(small, SubsetKind::Ri9), Error);
  }
}

TEST_CASE("custom subsets bound-check their indices") {
  const Dataset d = grid_dataset();
  const Dataset s = subset_custom(d, {0, 6, 34});
  CHECK(s.records.size() == 3);
  CHECK_THROWS_AS(subset_custom(d, {}), Error);
  CHECK_THROWS_AS(subset_custom(d, {35}), Error);
}

TEST_CASE("sensor restriction drops columns and re-anchors") {
  Dataset d = grid_dataset();
  d.records.resize(4);
  d.records[0].tdoa = tdoa_from_values({0.0, 0.1, 0.2, 0.3, 0.05, 0.15}, 1.0);
  const Dataset r = restrict_sensors(d, {1, 2, 3});
  CHECK(r.array.size() == 3);
  CHECK(r.array.ids == std::vector<std::string>{"S2", "S3", "S4"});
  CHECK(r.records[0].tdoa.values[0] == doctest::Approx(0.0));
  CHECK(r.records[0].tdoa.values[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.records[0].tdoa.values[2] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.records[0].tdoa.anchor_index == 0);

  CHECK_THROWS_AS(restrict_sensors(d, {0, 0}), Error);
  CHECK_THROWS_AS(restrict_sensors(d, {9}), Error);
}

TEST_CASE("summaries follow the arithmetic definitions") {
  const Summary s = summarize({3.0, 4.0, 5.0});
  CHECK(s.mean_mm == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(s.max_mm == 5.0);
  CHECK(s.count == 3);

  const Summary one = summarize({2.5});
  CHECK(one.mean_mm == one.max_mm);
  CHECK(one.sd_mm == 0.0);

  // mean of the whole equals the weighted mean of the halves
  const std::vector<double> a{1.0, 2.0, 7.0}, b{4.0, 9.0};
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const double recombined =
      (summarize(a).mean_mm * 3 + summarize(b).mean_mm * 2) / 5.0;
  CHECK(summarize(all).mean_mm == doctest::Approx(recombined).epsilon(1e-12));
  CHECK(summarize(all).max_mm ==
        std::max(summarize(a).max_mm, summarize(b).max_mm));

  CHECK_THROWS_AS(summarize({}), Error);
}

TEST_CASE("empirical cdf is a right-continuous step to one") {
  const auto cdf = error_cdf({3.0, 1.0, 2.0});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[1].first == 2.0);
  CHECK(cdf[1].second == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cdf.back().second == 1.0);
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    CHECK(cdf[i].first >= cdf[i - 1].first);
    CHECK(cdf[i].second >= cdf[i - 1].second);
  }

  const auto flat = error_cdf({5.0, 5.0, 5.0});
  CHECK(flat.front().first == 5.0);
  CHECK(flat.back() == std::pair<double, double>{5.0, 1.0});

  CHECK_THROWS_AS(error_cdf({}), Error);
}

TEST_CASE("convex hull membership") {
  const std::vector<Point2> square{{0, 0}, {10, 0}, {10, 10}, {0, 10},
                                   {5, 5}, {2, 3}};
  const auto hull = convex_hull(square);
  CHECK(hull.size() == 4);
  CHECK(point_in_hull(hull, {5, 5}));
  CHECK(point_in_hull(hull, {0, 0}));
  CHECK(point_in_hull(hull, {10, 5}));
  CHECK_FALSE(point_in_hull(hull, {10.5, 5}));
  CHECK_FALSE(point_in_hull(hull, {-1, -1}));
}

TEST_CASE("experiment run on its own reference interpolates") {
  const Dataset ref = grid_dataset(3, 3);
  ExperimentConfig cfg;
  cfg.kernels = {gpr::KernelKind::Comp};
  cfg.fuse = false;
  cfg.fit.max_iters = 500;
  const ExperimentReport rep = run_experiment(cfg, ref, ref);
  REQUIRE(rep.kernels.size() == 1);
  CHECK(rep.kernels[0].kernel == "comp");
  CHECK(rep.kernels[0].summary.mean_mm < 1.0);
  CHECK(rep.target_count == 9);
  CHECK(rep.reference_count == 9);
  for (const auto& r : rep.results) {
    CHECK(r.error_mm ==
          doctest::Approx(dist(r.truth, r.predicted)).epsilon(1e-9));
    CHECK(r.inside_hull);
  }
}

TEST_CASE("extrapolated targets are flagged outside the hull") {
  const Dataset ref = grid_dataset();
  ExperimentConfig cfg;
  cfg.subset = SubsetKind::Ext9;
  cfg.kernels = {gpr::KernelKind::Rbf};
  cfg.fuse = false;
  cfg.fit.max_iters = 150;
  const ExperimentReport rep = run_experiment(cfg, ref, ref);
  int outside = 0;
  for (const auto& r : rep.results) {
    if (!r.inside_hull) ++outside;
  }
  CHECK(outside == 26 * 1);  // 35 targets minus the 9 interior ones
}

TEST_CASE("experiments are deterministic") {
  const Dataset ref = grid_dataset();
  const Dataset tgt = grid_dataset(7, 5, 0.01, 9);
  ExperimentConfig cfg;
  cfg.kernels = {gpr::KernelKind::Rbf, gpr::KernelKind::Cos};
  cfg.fuse = true;
  cfg.fit.max_iters = 120;
  const ExperimentReport a = run_experiment(cfg, ref, tgt);
  const ExperimentReport b = run_experiment(cfg, ref, tgt);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(a.results[i].error_mm == b.results[i].error_mm);
  }
}

TEST_CASE("mismatched sensor arrays are rejected") {
  const Dataset ref = grid_dataset();
  Dataset tgt = grid_dataset();
  tgt.array.sensors[2].x += 5.0;
  ExperimentConfig cfg;
  cfg.fit.max_iters = 10;
  CHECK_THROWS_AS(run_experiment(cfg, ref, tgt), Error);
}

TEST_CASE("reports land on disk with consistent shapes") {
  const auto dir = fs::temp_directory_path() / "iloc_eval_report";
  fs::remove_all(dir);

  const Dataset ref = grid_dataset(3, 3);
  ExperimentConfig cfg;
  cfg.kernels = {gpr::KernelKind::Rbf, gpr::KernelKind::Comp};
  cfg.fuse = true;
  cfg.fit.max_iters = 100;
  const ExperimentReport rep = run_experiment(cfg, ref, ref);
  write_report(rep, dir.string());

  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "results.csv"));
  CHECK(fs::exists(dir / "cdf_rbf.csv"));
  CHECK(fs::exists(dir / "cdf_comp.csv"));
  CHECK(fs::exists(dir / "cdf_bma.csv"));
  CHECK(fs::exists(dir / "cdf.svg"));

  const auto j = nlohmann::json::parse(read_text_file((dir / "report.json").string()));
  CHECK(j.at("summary").contains("bma"));
  CHECK(j.at("summary").at("rbf").contains("log_marginal_likelihood"));
  CHECK_FALSE(j.at("summary").at("bma").contains("log_marginal_likelihood"));
  CHECK(j.at("notes").size() >= 3);

  const std::string svg = read_text_file((dir / "cdf.svg").string());
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}
