#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "iloc/core.hpp"
#include "iloc/wavesim.hpp"

using namespace iloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("iloc_core_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset small_dataset() {
  Dataset d;
  d.geometry = wavesim::default_plate();
  d.array = wavesim::default_six_sensor_array();
  d.provenance = "test fixture";
  wavesim::GvpModel g{wavesim::GvpKind::Isotropic, 500.0, 1.0, 0.0, {}};
  int id = 0;
  for (const auto& p : wavesim::grid_locations(7, 5, 20.0, 145.0, 100.0)) {
    ImpactRecord r;
    r.id = ++id;
    r.location = p;
    r.tdoa = wavesim::analytic_tdoa(g, d.array, p, 1.0);
    r.condition = "REF";
    r.repetition = 1;
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace

TEST_CASE("tdoa construction subtracts the earliest arrival and anchors it") {
  const TdoaVector t = tdoa_from_arrivals({3.0, 1.0, 2.0}, 1.0);
  CHECK(t.values == std::vector<double>{2.0, 0.0, 1.0});
  CHECK(t.anchor_index == 1);
  CHECK(t.frequency_khz == 1.0);
}

TEST_CASE("tdoa anchor tie-break picks the lowest index") {
  const TdoaVector t = tdoa_from_arrivals({2.0, 1.0, 1.0}, 1.0);
  CHECK(t.anchor_index == 1);
  CHECK(t.values[1] == 0.0);
  CHECK(t.values[2] == 0.0);
}

TEST_CASE("tdoa values below the clamp threshold collapse to zero") {
  const TdoaVector t = tdoa_from_arrivals({1.0, 1.0 + 5e-10}, 2.0);
  CHECK(t.values[0] == 0.0);
  CHECK(t.values[1] == 0.0);
}

TEST_CASE("tdoa validation rejects broken vectors") {
  TdoaVector t{{0.0, 0.1}, 0, 1.0};
  CHECK_NOTHROW(t.validate());

  TdoaVector negative{{0.0, -0.1}, 0, 1.0};
  CHECK_THROWS_AS(negative.validate(), Error);

  TdoaVector no_zero{{0.1, 0.2}, 0, 1.0};
  CHECK_THROWS_AS(no_zero.validate(), Error);

  TdoaVector bad_anchor{{0.1, 0.0}, 0, 1.0};
  CHECK_THROWS_AS(bad_anchor.validate(), Error);

  TdoaVector bad_freq{{0.0, 0.1}, 0, 0.0};
  CHECK_THROWS_AS(bad_freq.validate(), Error);
}

TEST_CASE("plate and sensor validation") {
  PlateGeometry plate{100.0, 50.0, 2.0};
  CHECK_NOTHROW(plate.validate());
  CHECK_THROWS_AS((PlateGeometry{0.0, 50.0, 2.0}.validate()), Error);

  SensorArray two;
  two.sensors = {{0.0, 0.0}, {10.0, 0.0}};
  CHECK_THROWS_AS(two.validate(plate), Error);

  SensorArray off;
  off.sensors = {{0.0, 0.0}, {10.0, 0.0}, {200.0, 0.0}};
  CHECK_THROWS_AS(off.validate(plate), Error);

  SensorArray dup;
  dup.sensors = {{0.0, 0.0}, {10.0, 0.0}, {10.0, 0.0}};
  CHECK_THROWS_AS(dup.validate(plate), Error);
}

TEST_CASE("dataset round-trip is lossless") {
  const auto dir = temp_dir("roundtrip");
  Dataset d = small_dataset();
  d.records[3].condition = "TEM_a-1";
  const std::string path = (dir / "ref.csv").string();
  save_dataset(d, path);
  CHECK(fs::exists(dir / "ref.meta.json"));

  const Dataset back = load_dataset(path);
  REQUIRE(back.records.size() == d.records.size());
  CHECK(back.provenance == d.provenance);
  CHECK(back.array.ids == d.array.ids);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    CHECK(back.records[i].id == d.records[i].id);
    CHECK(back.records[i].condition == d.records[i].condition);
    CHECK(back.records[i].repetition == d.records[i].repetition);
    CHECK(back.records[i].location.x == d.records[i].location.x);
    CHECK(back.records[i].location.y == d.records[i].location.y);
    CHECK(back.records[i].tdoa.anchor_index == d.records[i].tdoa.anchor_index);
    for (std::size_t j = 0; j < d.array.size(); ++j) {
      CHECK(back.records[i].tdoa.values[j] == d.records[i].tdoa.values[j]);
    }
  }
}

TEST_CASE("dataset loader reports the offending row") {
  const auto dir = temp_dir("badrows");
  Dataset d = small_dataset();
  const std::string path = (dir / "ref.csv").string();
  save_dataset(d, path);

  SUBCASE("negative tdoa") {
    std::string content = read_text_file(path);
    // corrupt the second data row (line 3)
    auto pos = content.find('\n');
    pos = content.find('\n', pos + 1);
    const auto next = content.find('\n', pos + 1);
    std::string row = content.substr(pos + 1, next - pos - 1);
    const auto last_comma = row.rfind(',');
    row = row.substr(0, last_comma + 1) + "-0.5";
    content = content.substr(0, pos + 1) + row + content.substr(next);
    write_text_file(path, content);
    try {
      load_dataset(path);
      FAIL("expected a validation error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  SUBCASE("short row") {
    write_text_file(path, read_text_file(path) + "9,REF,1,1.0\n");
    try {
      load_dataset(path);
      FAIL("expected a validation error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("expected") != std::string::npos);
    }
  }

  SUBCASE("empty file") {
    write_text_file(path, "");
    CHECK_THROWS_WITH_AS(load_dataset(path),
                         doctest::Contains("empty dataset"), Error);
  }
}

TEST_CASE("saving an empty dataset is refused") {
  const auto dir = temp_dir("empty");
  Dataset d = small_dataset();
  d.records.clear();
  CHECK_THROWS_AS(save_dataset(d, (dir / "x.csv").string()), Error);
}

TEST_CASE("condition tags may not contain separators") {
  const auto dir = temp_dir("tags");
  Dataset d = small_dataset();
  d.records[0].condition = "RE,F";
  CHECK_THROWS_AS(save_dataset(d, (dir / "x.csv").string()), Error);
}

TEST_CASE("argsort is stable on ties") {
  const auto idx = argsort({1.0, 0.5, 0.5});
  CHECK(idx == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 16; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  CHECK(a.next_u64() != c.next_u64());

  Rng g(7);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += g.gaussian();
  CHECK(std::abs(sum / n) < 0.05);

  CHECK(Rng::substream(1, 0) != Rng::substream(1, 1));
  CHECK(Rng::substream(1, 0) == Rng::substream(1, 0));
}

TEST_CASE("format_double survives a parse round trip") {
  for (double v : {0.1, 1.0 / 3.0, 12345.6789, 1e-17, -2.5e8}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("meta path derives from the csv path") {
  CHECK(meta_path_for("out/ref.csv") ==
        (fs::path("out") / "ref.meta.json").string());
}
