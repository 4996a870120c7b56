#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mea/signal.hpp"
#include "mea/spike_train.hpp"

namespace mea {

/// Double-threshold detector settings. Thresholds are multiples of the channel's
/// standard deviation (low) and of the noise-only standard deviation (high).
struct DetectorParams {
  double window_s = 0.002;
  double thr_low = 3.0;
  double thr_high = 5.0;
  double refractory_s = 0.001;

  void validate() const;
  /// Half-width in samples of the centred local-extremum window.
  [[nodiscard]] std::int64_t half_window(double sample_rate_hz) const;
  [[nodiscard]] std::int64_t refractory_samples(double sample_rate_hz) const;
};

/// Per-channel statistics computed on the way to the final spike list.
struct ChannelNoise {
  double sigma = 0.0;    // std of the full channel
  double sigma_n = 0.0;  // std with low-threshold segments removed
};

/// Streaming detector: O(n) per channel with work concentrated on supra-threshold samples.
///
/// A sample k is a candidate when |x[k]| > thr_low * sigma and |x[k]| is the largest magnitude in
/// [k - h, k + h] (ties resolved towards the earliest sample). Every sample within h of a
/// low-threshold crossing is removed before sigma_n is computed. Candidates are thinned by the
/// refractory period in time order, then kept when |x[k]| > thr_high * sigma_n.
SpikeTrain detect_spikes(const RawRecording& rec, const DetectorParams& params);

/// Direct two-pass implementation of the same contract, used as the oracle for detect_spikes.
SpikeTrain detect_spikes_reference(const RawRecording& rec, const DetectorParams& params);

/// Single-channel entry points (sample indices of accepted spikes).
std::vector<std::int64_t> detect_channel(std::span<const float> x, double sample_rate_hz,
                                         const DetectorParams& params, ChannelNoise* noise = nullptr);
std::vector<std::int64_t> detect_channel_reference(std::span<const float> x, double sample_rate_hz,
                                                   const DetectorParams& params);

namespace detail {
/// Population standard deviation, two-pass in double, accumulated in index order over the
/// samples whose `keep` flag is set (all samples when `keep` is empty). Both detector
/// implementations use it so their thresholds are bit-identical. Returns 0 for < 2 samples.
double population_sd(std::span<const float> x, std::span<const std::uint8_t> keep = {});
}  // namespace detail

}  // namespace mea
