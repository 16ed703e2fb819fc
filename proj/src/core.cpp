#include "iloc/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace iloc {

using nlohmann::json;

double dist(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

void PlateGeometry::validate() const {
  if (!(length_x > 0.0) || !(length_y > 0.0) || !(thickness > 0.0)) {
    throw Error("plate dimensions must be strictly positive");
  }
}

bool PlateGeometry::contains(const Point2& p) const {
  return p.x >= 0.0 && p.x <= length_x && p.y >= 0.0 && p.y <= length_y;
}

void SensorArray::validate(const PlateGeometry& plate) const {
  if (sensors.size() < 3) {
    throw Error("sensor array needs at least 3 sensors, got " +
                std::to_string(sensors.size()));
  }
  if (!ids.empty() && ids.size() != sensors.size()) {
    throw Error("sensor id list length does not match sensor count");
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (!plate.contains(sensors[i])) {
      throw Error("sensor " + std::to_string(i + 1) + " lies off the plate");
    }
    for (std::size_t j = i + 1; j < sensors.size(); ++j) {
      if (dist(sensors[i], sensors[j]) <= 0.0) {
        throw Error("sensors " + std::to_string(i + 1) + " and " +
                    std::to_string(j + 1) + " are coincident");
      }
    }
  }
}

void TdoaVector::validate() const {
  if (values.empty()) throw Error("TDOA vector is empty");
  if (!(frequency_khz > 0.0)) {
    throw Error("TDOA frequency must be positive");
  }
  if (anchor_index < 0 || static_cast<std::size_t>(anchor_index) >= values.size()) {
    throw Error("TDOA anchor index out of range");
  }
  double min_v = values[0];
  for (double v : values) {
    if (!(v >= 0.0)) throw Error("TDOA values must be non-negative");
    min_v = std::min(min_v, v);
  }
  if (values[static_cast<std::size_t>(anchor_index)] != 0.0) {
    throw Error("TDOA anchor entry must be exactly zero");
  }
  if (min_v != 0.0) {
    throw Error("TDOA vector must contain a zero element");
  }
}

namespace {

TdoaVector finish_tdoa(std::vector<double> v, double frequency_khz) {
  for (double& x : v) {
    if (x < kTdoaClampMs) x = 0.0;
  }
  int anchor = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[anchor]) anchor = static_cast<int>(i);
  }
  TdoaVector t{std::move(v), anchor, frequency_khz};
  t.validate();
  return t;
}

}  // namespace

TdoaVector tdoa_from_arrivals(std::vector<double> arrivals_ms,
                              double frequency_khz) {
  if (arrivals_ms.empty()) throw Error("no arrival times given");
  const double t_min = *std::min_element(arrivals_ms.begin(), arrivals_ms.end());
  for (double& t : arrivals_ms) t -= t_min;
  return finish_tdoa(std::move(arrivals_ms), frequency_khz);
}

TdoaVector tdoa_from_values(std::vector<double> values_ms,
                            double frequency_khz) {
  if (values_ms.empty()) throw Error("no TDOA values given");
  return finish_tdoa(std::move(values_ms), frequency_khz);
}

void Dataset::validate() const {
  geometry.validate();
  array.validate(geometry);
  if (records.empty()) throw Error("empty dataset");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ImpactRecord& r = records[i];
    if (r.tdoa.size() != array.size()) {
      throw Error("record " + std::to_string(i + 1) + " has " +
                  std::to_string(r.tdoa.size()) + " TDOA values for " +
                  std::to_string(array.size()) + " sensors");
    }
    r.tdoa.validate();
  }
}

// ---------------------------------------------------------------------------
// CSV / JSON persistence
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line_no, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error("line " + std::to_string(line_no) + ": malformed " +
                std::string(what) + " '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& s, int line_no, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("line " + std::to_string(line_no) + ": malformed " +
                std::string(what) + " '" + s + "'");
  }
  return v;
}

void check_condition_tag(const std::string& tag) {
  if (tag.empty()) throw Error("condition tag must not be empty");
  for (char c : tag) {
    if (c == ',' || c == '\n' || c == '\r') {
      throw Error("condition tag '" + tag + "' contains a reserved character");
    }
  }
}

}  // namespace

std::string meta_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".meta.json");
  return p.string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& csv_path) {
  Dataset d;

  // Sidecar first: it fixes the sensor count the rows must agree with.
  const std::string meta_path = meta_path_for(csv_path);
  json meta;
  try {
    meta = json::parse(read_text_file(meta_path));
  } catch (const json::exception& e) {
    throw Error("malformed sidecar '" + meta_path + "': " + e.what());
  }
  try {
    d.geometry.length_x = meta.at("plate").at("lx").get<double>();
    d.geometry.length_y = meta.at("plate").at("ly").get<double>();
    d.geometry.thickness = meta.at("plate").at("h").get<double>();
    for (const auto& s : meta.at("sensors")) {
      d.array.sensors.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
    if (meta.contains("ids")) {
      d.array.ids = meta["ids"].get<std::vector<std::string>>();
    }
    if (meta.contains("provenance")) {
      d.provenance = meta["provenance"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error("sidecar '" + meta_path + "' missing fields: " + e.what());
  }
  if (d.array.ids.empty()) {
    for (std::size_t i = 0; i < d.array.sensors.size(); ++i) {
      d.array.ids.push_back("S" + std::to_string(i + 1));
    }
  }
  const std::size_t n_sensors = d.array.sensors.size();

  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open '" + csv_path + "' for reading");

  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      saw_header = true;
      const auto header = split_csv_line(line);
      if (header.size() != 7 + n_sensors || header[0] != "impact_id") {
        throw Error("line 1: unexpected header for " +
                    std::to_string(n_sensors) + "-sensor dataset");
      }
      continue;
    }

    const auto f = split_csv_line(line);
    if (f.size() != 7 + n_sensors) {
      throw Error("line " + std::to_string(line_no) + ": expected " +
                  std::to_string(7 + n_sensors) + " fields, got " +
                  std::to_string(f.size()));
    }
    ImpactRecord r;
    r.id = static_cast<int>(parse_int(f[0], line_no, "impact_id"));
    r.condition = f[1];
    check_condition_tag(r.condition);
    r.repetition = static_cast<int>(parse_int(f[2], line_no, "repetition"));
    r.location.x = parse_double(f[3], line_no, "x_mm");
    r.location.y = parse_double(f[4], line_no, "y_mm");
    r.tdoa.frequency_khz = parse_double(f[5], line_no, "frequency_khz");
    r.tdoa.anchor_index =
        static_cast<int>(parse_int(f[6], line_no, "anchor_index"));
    for (std::size_t k = 0; k < n_sensors; ++k) {
      r.tdoa.values.push_back(parse_double(f[7 + k], line_no, "tdoa value"));
    }
    try {
      r.tdoa.validate();
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    d.records.push_back(std::move(r));
  }
  if (!saw_header || d.records.empty()) {
    throw Error("empty dataset in '" + csv_path + "'");
  }
  d.validate();
  return d;
}

void save_dataset(const Dataset& d, const std::string& csv_path) {
  d.validate();
  for (const auto& r : d.records) check_condition_tag(r.condition);

  const std::size_t n_sensors = d.array.size();
  std::ostringstream csv;
  csv << "impact_id,condition,repetition,x_mm,y_mm,frequency_khz,anchor_index";
  for (std::size_t k = 0; k < n_sensors; ++k) csv << ",tdoa_" << (k + 1) << "_ms";
  csv << "\n";
  for (const auto& r : d.records) {
    csv << r.id << ',' << r.condition << ',' << r.repetition << ','
        << format_double(r.location.x) << ',' << format_double(r.location.y)
        << ',' << format_double(r.tdoa.frequency_khz) << ','
        << r.tdoa.anchor_index;
    for (double v : r.tdoa.values) csv << ',' << format_double(v);
    csv << "\n";
  }
  write_text_file(csv_path, csv.str());

  json meta;
  meta["plate"] = {{"lx", d.geometry.length_x},
                   {"ly", d.geometry.length_y},
                   {"h", d.geometry.thickness}};
  json sensors = json::array();
  for (const auto& s : d.array.sensors) sensors.push_back({s.x, s.y});
  meta["sensors"] = sensors;
  meta["ids"] = d.array.ids;
  if (!d.provenance.empty()) meta["provenance"] = d.provenance;
  write_text_file(meta_path_for(csv_path), meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

std::vector<std::size_t> argsort(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

std::uint64_t Rng::next_u64() {
  // splitmix64 (Steele, Lea, Flood 2014)
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::substream(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  return r.next_u64();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace iloc
