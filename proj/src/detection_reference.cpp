#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mea/detection.hpp"

namespace mea {

std::vector<std::int64_t> detect_channel_reference(std::span<const float> x, double sample_rate_hz,
                                                   const DetectorParams& params) {
  params.validate();
  std::vector<std::int64_t> spikes;
  const auto n = static_cast<std::int64_t>(x.size());
  const double sigma = detail::population_sd(x);
  if (n == 0 || sigma == 0.0) return spikes;

  const std::int64_t h = params.half_window(sample_rate_hz);
  const double low = params.thr_low * sigma;
  auto crosses_low = [&](std::int64_t k) { return std::abs(static_cast<double>(x[k])) > low; };

  // Pass 1: candidates and the exclusion mask, each from a full scan of the window around k.
  std::vector<std::int64_t> candidates;
  std::vector<float> remaining;
  for (std::int64_t k = 0; k < n; ++k) {
    const auto lo = std::max<std::int64_t>(0, k - h);
    const auto hi = std::min<std::int64_t>(n - 1, k + h);

    bool near_crossing = false;
    for (auto m = lo; m <= hi; ++m) near_crossing = near_crossing || crosses_low(m);
    if (!near_crossing) remaining.push_back(x[k]);

    if (!crosses_low(k)) continue;
    const float a = std::abs(x[k]);
    bool is_peak = true;
    for (auto m = lo; m <= hi; ++m) {
      if (m < k && !(std::abs(x[m]) < a)) is_peak = false;
      if (m > k && !(std::abs(x[m]) <= a)) is_peak = false;
    }
    if (is_peak) candidates.push_back(k);
  }

  // Pass 2: noise statistics without the crossing segments, then the high threshold.
  double sigma_n = detail::population_sd(remaining);
  if (remaining.size() < 2) sigma_n = sigma;
  const double high = params.thr_high * sigma_n;

  const std::int64_t refractory = params.refractory_samples(sample_rate_hz);
  std::vector<std::int64_t> thinned;
  for (auto k : candidates)
    if (thinned.empty() || refractory == 0 || k - thinned.back() >= refractory) thinned.push_back(k);
  for (auto k : thinned)
    if (static_cast<double>(std::abs(x[k])) > high) spikes.push_back(k);
  return spikes;
}

SpikeTrain detect_spikes_reference(const RawRecording& rec, const DetectorParams& params) {
  params.validate();
  if (rec.n_channels() == 0 || rec.n_samples() == 0)
    throw std::invalid_argument("cannot detect spikes in an empty recording");
  std::vector<std::vector<std::int64_t>> channels(static_cast<std::size_t>(rec.n_channels()));
  for (int c = 0; c < rec.n_channels(); ++c)
    channels[c] = detect_channel_reference(rec.channel(c), rec.sample_rate_hz, params);
  return SpikeTrain::from_channels(rec.sample_rate_hz, rec.t0_offset_s, rec.n_samples(), channels);
}

}  // namespace mea
