// Envelope-threshold TDOA extraction from sensor waveforms: band-limit at a
// chosen frequency, form a normalised smoothed envelope and pick the first
// threshold crossing per sensor.
#pragma once

#include <vector>

#include "iloc/core.hpp"
#include "iloc/wavesim.hpp"

namespace iloc::extract {

struct ExtractionConfig {
  double center_frequency_khz = 1.0;
  double bandwidth_khz = 0.5;
  // Fraction of the envelope peak that counts as the arrival. 0.025 is the
  // usual choice; 0.0025 is the aggressive low-threshold variant.
  double threshold_fraction = 0.025;
  // Moving-average width; <= 0 selects the default of two carrier periods.
  double smoothing_window_ms = 0.0;

  double effective_smoothing_ms() const;
  void validate() const;
};

// Zero-phase band-pass around the centre frequency (cascaded biquads run
// forward and backward, so arrival times pick up no group-delay bias).
wavesim::SyntheticSignal bandpass(const wavesim::SyntheticSignal& signal,
                                  const ExtractionConfig& cfg);

// Rectify, smooth with a centred moving average, normalise to unit peak.
// All-zero input is an error (nothing to normalise).
wavesim::SyntheticSignal envelope(const wavesim::SyntheticSignal& signal,
                                  const ExtractionConfig& cfg);

// First time the normalised envelope reaches threshold_fraction, with linear
// interpolation between the bracketing samples.
double pick_arrival(const wavesim::SyntheticSignal& env,
                    const ExtractionConfig& cfg);

// Full pipeline over one signal per sensor; arrivals are re-anchored into a
// valid TDOA vector tagged with the centre frequency.
TdoaVector extract_tdoa(const std::vector<wavesim::SyntheticSignal>& signals,
                        const ExtractionConfig& cfg);

}  // namespace iloc::extract
