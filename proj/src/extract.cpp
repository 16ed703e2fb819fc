#include "iloc/extract.hpp"

#include <algorithm>
#include <cmath>

namespace iloc::extract {

using wavesim::SyntheticSignal;

double ExtractionConfig::effective_smoothing_ms() const {
  if (smoothing_window_ms > 0.0) return smoothing_window_ms;
  return 2.0 / center_frequency_khz;
}

void ExtractionConfig::validate() const {
  if (!(center_frequency_khz > 0.0)) {
    throw Error("centre frequency must be positive");
  }
  if (!(bandwidth_khz > 0.0) || !(bandwidth_khz < 2.0 * center_frequency_khz)) {
    throw Error("bandwidth must lie in (0, 2 * centre frequency)");
  }
  if (!(threshold_fraction > 0.0) || !(threshold_fraction < 1.0)) {
    throw Error("threshold fraction must lie in (0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Zero-phase band-pass
// ---------------------------------------------------------------------------

namespace {

// Constant-peak-gain band-pass biquad (RBJ cookbook).
struct Biquad {
  double b0, b1, b2, a1, a2;

  static Biquad bandpass(double f0_khz, double q, double fs_khz) {
    const double w0 = 2.0 * M_PI * f0_khz / fs_khz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0,
            (1.0 - alpha) / a0};
  }

  void apply(std::vector<double>& x) const {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double y = b0 * v + z1;
      z1 = b1 * v - a1 * y + z2;
      z2 = b2 * v - a2 * y;
      v = y;
    }
  }
};

// Zero padding before forward-backward filtering. Arrival signals are
// silence-bounded, so silent pads are the faithful extension and keep the
// acausal ring of early bursts shift-invariant across sensors.
std::vector<double> pad_zeros(const std::vector<double>& x, std::size_t pad) {
  std::vector<double> out(x.size() + 2 * pad, 0.0);
  std::copy(x.begin(), x.end(), out.begin() + pad);
  return out;
}

}  // namespace

SyntheticSignal bandpass(const SyntheticSignal& signal,
                         const ExtractionConfig& cfg) {
  signal.validate();
  cfg.validate();
  const double fs = signal.sample_rate_khz;
  const double cf = cfg.center_frequency_khz;
  const double bw = cfg.bandwidth_khz;
  if (cf + 0.5 * bw >= 0.5 * fs) {
    throw Error("band edge exceeds the Nyquist frequency");
  }
  if (signal.samples.size() < 3) {
    throw Error("signal too short to filter");
  }

  const Biquad bq = Biquad::bandpass(cf, cf / bw, fs);

  // Transient ring of the band-pass decays like exp(-pi * bw * t); six
  // e-folding times of padding leave it below 1e-7 of the data.
  const std::size_t want = static_cast<std::size_t>(std::ceil(6.0 * fs / (M_PI * bw)));
  const std::size_t pad = std::max<std::size_t>(want, 8);

  std::vector<double> x = pad_zeros(signal.samples, pad);
  // Two identical biquads per direction, then the reversed pass; the net
  // response is |H|^4 with zero phase.
  bq.apply(x);
  bq.apply(x);
  std::reverse(x.begin(), x.end());
  bq.apply(x);
  bq.apply(x);
  std::reverse(x.begin(), x.end());

  SyntheticSignal out = signal;
  std::copy(x.begin() + pad, x.begin() + pad + signal.samples.size(),
            out.samples.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Envelope and arrival pick
// ---------------------------------------------------------------------------

SyntheticSignal envelope(const SyntheticSignal& signal,
                         const ExtractionConfig& cfg) {
  signal.validate();
  cfg.validate();

  const std::size_t n = signal.samples.size();
  std::vector<double> rect(n);
  for (std::size_t i = 0; i < n; ++i) rect[i] = std::abs(signal.samples[i]);

  const double w_ms = cfg.effective_smoothing_ms();
  const std::size_t half =
      static_cast<std::size_t>(std::round(0.5 * w_ms * signal.sample_rate_khz));

  // Centred moving average; edges use the available part of the window.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + rect[i];
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = (i >= half) ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    smooth[i] = (prefix[hi + 1] - prefix[lo]) / double(hi - lo + 1);
  }

  const double peak = *std::max_element(smooth.begin(), smooth.end());
  if (!(peak > 0.0)) throw Error("degenerate signal: envelope has no peak");
  for (double& v : smooth) v /= peak;

  SyntheticSignal out = signal;
  out.samples = std::move(smooth);
  return out;
}

double pick_arrival(const SyntheticSignal& env, const ExtractionConfig& cfg) {
  env.validate();
  cfg.validate();
  const double thr = cfg.threshold_fraction;
  const auto& e = env.samples;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] >= thr) {
      if (i == 0) return env.t0_ms;
      const double frac = (thr - e[i - 1]) / (e[i] - e[i - 1]);
      return env.t0_ms + (double(i - 1) + frac) * env.dt_ms();
    }
  }
  throw Error("threshold never crossed");
}

TdoaVector extract_tdoa(const std::vector<SyntheticSignal>& signals,
                        const ExtractionConfig& cfg) {
  cfg.validate();
  if (signals.empty()) throw Error("no signals to extract from");
  const double fs = signals.front().sample_rate_khz;
  for (const auto& s : signals) {
    if (s.sample_rate_khz != fs) {
      throw Error("signals must share a common sample rate");
    }
  }

  // A silent lead ahead of every signal gives the earliest burst the same
  // room for the filter's acausal ring as the late ones, so the picked
  // arrivals stay shift-invariant between sensors. The common lead cancels
  // in the differences.
  const std::size_t lead =
      static_cast<std::size_t>(std::ceil(8.0 * fs / cfg.bandwidth_khz));
  std::vector<double> arrivals;
  arrivals.reserve(signals.size());
  for (std::size_t j = 0; j < signals.size(); ++j) {
    try {
      SyntheticSignal padded = signals[j];
      padded.samples.insert(padded.samples.begin(), lead, 0.0);
      padded.samples.insert(padded.samples.end(), lead, 0.0);
      padded.t0_ms -= double(lead) / fs;
      const auto filtered = bandpass(padded, cfg);
      const auto env = envelope(filtered, cfg);
      arrivals.push_back(pick_arrival(env, cfg));
    } catch (const Error& e) {
      throw Error("sensor " + std::to_string(j + 1) + ": " + e.what());
    }
  }
  return tdoa_from_arrivals(std::move(arrivals), cfg.center_frequency_khz);
}

}  // namespace iloc::extract
