// Analytic TDOA oracle and synthetic sensor-signal generator for flexural
// waves on plates, plus the laminate critical-delamination-load formula.
// This module is the ground truth every desk-scale experiment trains and
// scores against.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "iloc/core.hpp"

namespace iloc::wavesim {

// ---------------------------------------------------------------------------
// Group velocity profile
// ---------------------------------------------------------------------------

enum class GvpKind { Isotropic, Elliptical, Tabulated };

// Direction- and frequency-dependent group velocity v_g(theta, omega).
// Frequency enters through the low-frequency flexural dispersion law
// v_g ~ sqrt(omega); direction through the chosen profile:
//   isotropic   c(theta) = c0
//   elliptical  c(theta) = c0 * (1 + eps * cos 2theta)
//   tabulated   periodic linear interpolation of (theta, speed) samples
struct GvpModel {
  GvpKind kind = GvpKind::Isotropic;
  double base_speed = 0.0;     // mm/ms at omega_ref
  double omega_ref_khz = 1.0;  // reference frequency
  double anisotropy = 0.0;     // eps, |eps| < 1
  std::vector<std::pair<double, double>> table;  // (theta in [0,2pi), mm/ms)

  void validate() const;
};

double group_velocity(const GvpModel& g, double theta_rad, double omega_khz);

// ---------------------------------------------------------------------------
// TDOA simulation
// ---------------------------------------------------------------------------

struct NoiseModel {
  double sigma_ms = 0.0;   // std of additive zero-mean Gaussian arrival error
  std::uint64_t seed = 0;
};

// Arrival time dist(p, S_j) / v_g(theta_j, omega) per sensor, plus Gaussian
// noise on the raw arrivals, re-anchored at the earliest (possibly shifted
// by the noise) arrival.
TdoaVector analytic_tdoa(const GvpModel& g, const SensorArray& array,
                         const ImpactLocation& p, double omega_khz,
                         const NoiseModel& noise = {});

// Retargets a TDOA vector from its own frequency to omega_star:
// values scale by sqrt(omega / omega_star), order unchanged.
TdoaVector scale_tdoa(const TdoaVector& t, double omega_star_khz);

// Uniform thermal scaling of the TDOA values; frequency tag unchanged.
TdoaVector apply_temperature_scaling(const TdoaVector& t, double alpha);

// Extraction-style noise: perturbs the observed values and re-anchors, so
// the anchor may move exactly as it would for noisy picks.
TdoaVector add_extraction_noise(const TdoaVector& t, const NoiseModel& noise);

// ---------------------------------------------------------------------------
// Synthetic waveforms
// ---------------------------------------------------------------------------

struct SyntheticSignal {
  std::vector<double> samples;
  double sample_rate_khz = 0.0;
  double t0_ms = 0.0;

  std::size_t size() const { return samples.size(); }
  double dt_ms() const { return 1.0 / sample_rate_khz; }
  double time_at(std::size_t i) const { return t0_ms + double(i) / sample_rate_khz; }
  void validate() const;
};

// Tone-burst window length in ms: 5 cycles of omega.
double burst_window_ms(double omega_khz);

// One signal per sensor: a Gaussian-windowed tone burst at omega delayed by
// the propagation time, amplitude ~ 1/sqrt(r), plus white noise at snr_db
// relative to the burst peak (snr_db >= 200 or +inf means noise-free).
// Requires sample_rate >= 10 * omega.
std::vector<SyntheticSignal> synthesize_signals(
    const GvpModel& g, const SensorArray& array, const ImpactLocation& p,
    double omega_khz, double sample_rate_khz, double snr_db,
    std::uint64_t seed);

// CSV export/import, schema `t_ms,amp`.
void save_signal_csv(const SyntheticSignal& s, const std::string& path);
SyntheticSignal load_signal_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Laminate delamination threshold
// ---------------------------------------------------------------------------

// Bending stiffnesses in N*m and mode II toughness in J/m^2, the units these
// quantities are normally quoted in; conversion to newtons happens inside.
struct LaminateStiffness {
  double d11 = 0.0;
  double d22 = 0.0;
  double d12 = 0.0;
  double d66 = 0.0;
  double g2c = 0.0;  // G_IIc

  void validate() const;
};

// Critical load for delamination onset, in newtons:
//   F_cr = pi * sqrt(32 * D_eff * G_IIc / 3)
//   D_eff ~ sqrt(D11 * D22 * (A + 1) / 2),  A = (D12 + 2 D66) / sqrt(D11 D22)
double critical_delamination_load(const LaminateStiffness& lam);

// Effective plate stiffness D_eff in N*m (exposed for round-trip checks).
double effective_stiffness(const LaminateStiffness& lam);

// ---------------------------------------------------------------------------
// Desk-scale scenario defaults shared by the CLI and the experiment harness
// ---------------------------------------------------------------------------

PlateGeometry default_plate();            // 290 x 200 x 4 mm
SensorArray default_six_sensor_array();   // S1..S4 corners, S5/S6 edge midpoints

// cols x rows lattice at the given spacing, centred on (cx, cy); points are
// ordered column-fastest from the minimum-x/minimum-y corner.
std::vector<ImpactLocation> grid_locations(int cols, int rows,
                                           double spacing_mm, double cx,
                                           double cy);

}  // namespace iloc::wavesim
