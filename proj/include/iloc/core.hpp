// Domain value types shared across the toolkit, plus dataset containers
// with CSV/JSON persistence.
//
// Units policy (fixed library-wide, conversions happen at I/O boundaries):
//   - lengths in millimetres
//   - times in milliseconds
//   - frequencies in kilohertz
//   - forces in newtons
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace iloc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Geometry primitives
// ---------------------------------------------------------------------------

struct Point2 {
  double x = 0.0;  // mm
  double y = 0.0;  // mm
};

double dist(const Point2& a, const Point2& b);

// Impact coordinates in mm. Simulated impacts must lie on the plate;
// predicted ones may fall outside (flagged downstream, never rejected here).
using ImpactLocation = Point2;

struct PlateGeometry {
  double length_x = 0.0;   // mm
  double length_y = 0.0;   // mm
  double thickness = 0.0;  // mm

  void validate() const;
  bool contains(const Point2& p) const;
};

struct SensorArray {
  std::vector<Point2> sensors;
  std::vector<std::string> ids;

  std::size_t size() const { return sensors.size(); }
  // Requires >= 3 sensors, all on the plate, pairwise distinct.
  void validate(const PlateGeometry& plate) const;
};

// ---------------------------------------------------------------------------
// TDOA vectors
// ---------------------------------------------------------------------------

// Differences below this are floating-point dust and are clamped to zero so
// the non-negativity invariant survives arithmetic noise.
inline constexpr double kTdoaClampMs = 1e-9;

struct TdoaVector {
  std::vector<double> values;   // ms, one entry per sensor, array order
  int anchor_index = 0;         // sensor the wave reached first
  double frequency_khz = 0.0;   // frequency the values were extracted at

  std::size_t size() const { return values.size(); }
  // All values >= 0, values[anchor_index] == 0, anchor at the (lowest-index)
  // minimum, frequency > 0.
  void validate() const;
};

// Builds a valid TDOA vector from raw arrival times: subtracts the earliest
// arrival, clamps dust to zero and anchors at the lowest-index minimum.
TdoaVector tdoa_from_arrivals(std::vector<double> arrivals_ms,
                              double frequency_khz);

// Same construction for values that are already differences.
TdoaVector tdoa_from_values(std::vector<double> values_ms,
                            double frequency_khz);

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct ImpactRecord {
  int id = 0;                   // stable row identity used for joins
  ImpactLocation location;
  TdoaVector tdoa;
  std::string condition = "REF";  // e.g. REF/TEM/HEI/ANG/DT
  int repetition = 1;
};

struct Dataset {
  PlateGeometry geometry;
  SensorArray array;
  std::vector<ImpactRecord> records;
  std::string provenance;

  void validate() const;
};

// CSV schema (UTF-8, header row):
//   impact_id,condition,repetition,x_mm,y_mm,frequency_khz,anchor_index,
//   tdoa_1_ms,...,tdoa_N_ms
// Geometry and sensor coordinates live in a sidecar `<name>.meta.json`.
Dataset load_dataset(const std::string& csv_path);
void save_dataset(const Dataset& d, const std::string& csv_path);

// `ref.csv` -> `ref.meta.json`
std::string meta_path_for(const std::string& csv_path);

// ---------------------------------------------------------------------------
// Small shared utilities
// ---------------------------------------------------------------------------

// Stable ascending argsort: ties resolve to the lower index.
std::vector<std::size_t> argsort(const std::vector<double>& v);

// Deterministic RNG with identical streams on every platform (splitmix64
// core, Box-Muller normals). Never touches global state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();   // [0, 1)
  double gaussian();  // standard normal

  // Derives an independent seed for a named substream.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Shortest exact decimal form of a double ("%.17g").
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace iloc
