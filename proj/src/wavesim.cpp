#include "iloc/wavesim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace iloc::wavesim {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}
}  // namespace

// ---------------------------------------------------------------------------
// Group velocity
// ---------------------------------------------------------------------------

void GvpModel::validate() const {
  if (!(omega_ref_khz > 0.0)) throw Error("GVP reference frequency must be positive");
  switch (kind) {
    case GvpKind::Isotropic:
      if (!(base_speed > 0.0)) throw Error("GVP base speed must be positive");
      break;
    case GvpKind::Elliptical:
      if (!(base_speed > 0.0)) throw Error("GVP base speed must be positive");
      if (!(std::abs(anisotropy) < 1.0)) {
        throw Error("elliptical anisotropy must satisfy |eps| < 1");
      }
      break;
    case GvpKind::Tabulated:
      if (table.size() < 2) throw Error("tabulated GVP needs at least 2 samples");
      for (const auto& [theta, speed] : table) {
        if (theta < 0.0 || theta >= kTwoPi) {
          throw Error("tabulated GVP angles must lie in [0, 2pi)");
        }
        if (!(speed > 0.0)) throw Error("tabulated GVP speeds must be positive");
      }
      break;
  }
}

namespace {

double directional_speed(const GvpModel& g, double theta) {
  const double t = wrap_angle(theta);
  switch (g.kind) {
    case GvpKind::Isotropic:
      return g.base_speed;
    case GvpKind::Elliptical:
      return g.base_speed * (1.0 + g.anisotropy * std::cos(2.0 * t));
    case GvpKind::Tabulated: {
      auto table = g.table;
      std::sort(table.begin(), table.end());
      // periodic linear interpolation across the 2pi wrap
      std::size_t hi = 0;
      while (hi < table.size() && table[hi].first <= t) ++hi;
      const auto& a = (hi == 0) ? table.back() : table[hi - 1];
      const auto& b = (hi == table.size()) ? table.front() : table[hi];
      double ta = a.first, tb = b.first, x = t;
      if (hi == 0) ta -= kTwoPi;
      if (hi == table.size()) tb += kTwoPi;
      if (tb == ta) return a.second;
      const double w = (x - ta) / (tb - ta);
      return a.second + w * (b.second - a.second);
    }
  }
  throw Error("unreachable GVP kind");
}

}  // namespace

double group_velocity(const GvpModel& g, double theta_rad, double omega_khz) {
  g.validate();
  if (!(omega_khz > 0.0)) throw Error("frequency must be positive");
  const double c = directional_speed(g, theta_rad);
  return c * std::sqrt(omega_khz / g.omega_ref_khz);
}

// ---------------------------------------------------------------------------
// TDOA simulation
// ---------------------------------------------------------------------------

TdoaVector analytic_tdoa(const GvpModel& g, const SensorArray& array,
                         const ImpactLocation& p, double omega_khz,
                         const NoiseModel& noise) {
  if (!(omega_khz > 0.0)) throw Error("frequency must be positive");
  if (!(noise.sigma_ms >= 0.0)) throw Error("noise sigma must be non-negative");
  if (array.sensors.empty()) throw Error("sensor array is empty");

  std::vector<double> arrivals;
  arrivals.reserve(array.size());
  Rng rng(noise.seed);
  for (const auto& s : array.sensors) {
    const double r = dist(p, s);
    const double theta = std::atan2(s.y - p.y, s.x - p.x);
    const double v = group_velocity(g, theta, omega_khz);
    double t = r / v;
    if (noise.sigma_ms > 0.0) t += noise.sigma_ms * rng.gaussian();
    arrivals.push_back(t);
  }
  return tdoa_from_arrivals(std::move(arrivals), omega_khz);
}

TdoaVector scale_tdoa(const TdoaVector& t, double omega_star_khz) {
  if (!(omega_star_khz > 0.0)) throw Error("target frequency must be positive");
  if (!(t.frequency_khz > 0.0)) throw Error("source frequency must be positive");
  const double alpha = std::sqrt(t.frequency_khz / omega_star_khz);
  TdoaVector out = t;
  for (double& v : out.values) v *= alpha;
  out.frequency_khz = omega_star_khz;
  out.validate();
  return out;
}

TdoaVector apply_temperature_scaling(const TdoaVector& t, double alpha) {
  if (!(alpha > 0.0)) throw Error("temperature scale factor must be positive");
  TdoaVector out = t;
  for (double& v : out.values) v *= alpha;
  out.validate();
  return out;
}

TdoaVector add_extraction_noise(const TdoaVector& t, const NoiseModel& noise) {
  if (!(noise.sigma_ms >= 0.0)) throw Error("noise sigma must be non-negative");
  if (noise.sigma_ms == 0.0) return t;
  Rng rng(noise.seed);
  std::vector<double> perturbed = t.values;
  for (double& v : perturbed) v += noise.sigma_ms * rng.gaussian();
  return tdoa_from_arrivals(std::move(perturbed), t.frequency_khz);
}

// ---------------------------------------------------------------------------
// Synthetic waveforms
// ---------------------------------------------------------------------------

void SyntheticSignal::validate() const {
  if (samples.empty()) throw Error("signal has no samples");
  if (!(sample_rate_khz > 0.0)) throw Error("signal sample rate must be positive");
}

double burst_window_ms(double omega_khz) {
  if (!(omega_khz > 0.0)) throw Error("frequency must be positive");
  return 5.0 / omega_khz;
}

std::vector<SyntheticSignal> synthesize_signals(
    const GvpModel& g, const SensorArray& array, const ImpactLocation& p,
    double omega_khz, double sample_rate_khz, double snr_db,
    std::uint64_t seed) {
  if (!(omega_khz > 0.0)) throw Error("frequency must be positive");
  if (sample_rate_khz < 10.0 * omega_khz) {
    throw Error("sample rate must be at least 10x the burst frequency");
  }
  if (array.sensors.empty()) throw Error("sensor array is empty");

  const double window = burst_window_ms(omega_khz);
  const double sigma_w = window / 6.0;
  const double dt = 1.0 / sample_rate_khz;

  std::vector<double> delays, amps;
  double max_delay = 0.0;
  for (const auto& s : array.sensors) {
    const double r = dist(p, s);
    const double theta = std::atan2(s.y - p.y, s.x - p.x);
    const double v = group_velocity(g, theta, omega_khz);
    const double d = r / v;
    delays.push_back(d);
    amps.push_back(1.0 / std::sqrt(std::max(r, 1.0)));
    max_delay = std::max(max_delay, d);
  }
  const double duration = max_delay + 1.5 * window;
  const std::size_t n = static_cast<std::size_t>(std::ceil(duration / dt)) + 1;

  const bool noisy = std::isfinite(snr_db) && snr_db < 200.0;

  std::vector<SyntheticSignal> out;
  out.reserve(array.size());
  for (std::size_t j = 0; j < array.size(); ++j) {
    SyntheticSignal sig;
    sig.sample_rate_khz = sample_rate_khz;
    sig.t0_ms = 0.0;
    sig.samples.assign(n, 0.0);
    const double delay = delays[j];
    const double amp = amps[j];
    const double t_peak = delay + 0.5 * window;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = k * dt;
      if (t < delay || t > delay + window) continue;
      const double u = t - delay;
      const double env = std::exp(-0.5 * (t - t_peak) * (t - t_peak) /
                                  (sigma_w * sigma_w));
      sig.samples[k] = amp * env * std::sin(kTwoPi * omega_khz * u);
    }
    if (noisy) {
      Rng rng(Rng::substream(seed, j));
      const double sigma_n = amp * std::pow(10.0, -snr_db / 20.0);
      for (double& v : sig.samples) v += sigma_n * rng.gaussian();
    }
    out.push_back(std::move(sig));
  }
  return out;
}

void save_signal_csv(const SyntheticSignal& s, const std::string& path) {
  s.validate();
  std::ostringstream csv;
  csv << "t_ms,amp\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    csv << format_double(s.time_at(i)) << ',' << format_double(s.samples[i])
        << "\n";
  }
  write_text_file(path, csv.str());
}

SyntheticSignal load_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open signal file '" + path + "'");
  std::string line;
  std::vector<double> times, amps;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_no == 1) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(path + " line " + std::to_string(line_no) + ": expected t_ms,amp");
    }
    double t = 0.0, a = 0.0;
    auto r1 = std::from_chars(line.data(), line.data() + comma, t);
    auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), a);
    if (r1.ec != std::errc() || r2.ec != std::errc()) {
      throw Error(path + " line " + std::to_string(line_no) + ": malformed number");
    }
    times.push_back(t);
    amps.push_back(a);
  }
  if (times.size() < 2) throw Error("signal file '" + path + "' too short");
  SyntheticSignal s;
  s.t0_ms = times.front();
  s.sample_rate_khz = 1.0 / ((times.back() - times.front()) / double(times.size() - 1));
  s.samples = std::move(amps);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Laminate delamination threshold
// ---------------------------------------------------------------------------

void LaminateStiffness::validate() const {
  if (!(d11 > 0.0) || !(d22 > 0.0)) {
    throw Error("bending stiffnesses D11 and D22 must be positive");
  }
  if (!(g2c > 0.0)) throw Error("G_IIc must be positive");
  const double a = (d12 + 2.0 * d66) / std::sqrt(d11 * d22);
  if (!(a + 1.0 > 0.0)) {
    throw Error("stiffness ratio A must exceed -1");
  }
}

double effective_stiffness(const LaminateStiffness& lam) {
  lam.validate();
  const double a = (lam.d12 + 2.0 * lam.d66) / std::sqrt(lam.d11 * lam.d22);
  return std::sqrt(lam.d11 * lam.d22 * (a + 1.0) / 2.0);
}

double critical_delamination_load(const LaminateStiffness& lam) {
  // D_eff [N*m] times G_IIc [J/m^2 = N/m] is N^2, so the root is newtons.
  const double d_eff = effective_stiffness(lam);
  return M_PI * std::sqrt(32.0 * d_eff * lam.g2c / 3.0);
}

// ---------------------------------------------------------------------------
// Scenario defaults
// ---------------------------------------------------------------------------

PlateGeometry default_plate() { return {290.0, 200.0, 4.0}; }

SensorArray default_six_sensor_array() {
  SensorArray a;
  a.sensors = {{45.0, 40.0},  {245.0, 40.0}, {245.0, 160.0},
               {45.0, 160.0}, {145.0, 40.0}, {145.0, 160.0}};
  a.ids = {"S1", "S2", "S3", "S4", "S5", "S6"};
  return a;
}

std::vector<ImpactLocation> grid_locations(int cols, int rows,
                                           double spacing_mm, double cx,
                                           double cy) {
  if (cols < 1 || rows < 1) throw Error("grid needs at least 1x1 points");
  if (!(spacing_mm > 0.0)) throw Error("grid spacing must be positive");
  const double x0 = cx - 0.5 * (cols - 1) * spacing_mm;
  const double y0 = cy - 0.5 * (rows - 1) * spacing_mm;
  std::vector<ImpactLocation> pts;
  pts.reserve(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pts.push_back({x0 + c * spacing_mm, y0 + r * spacing_mm});
    }
  }
  return pts;
}

}  // namespace iloc::wavesim
