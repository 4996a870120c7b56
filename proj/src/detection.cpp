#include "mea/detection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mea {

void DetectorParams::validate() const {
  if (!(window_s > 0)) throw std::invalid_argument("detector window must be positive");
  if (!(thr_low > 0)) throw std::invalid_argument("low threshold must be positive");
  if (!(thr_high >= thr_low)) throw std::invalid_argument("high threshold must be >= low threshold");
  if (!(refractory_s >= 0)) throw std::invalid_argument("refractory period must be >= 0");
}

std::int64_t DetectorParams::half_window(double sample_rate_hz) const {
  return std::max<std::int64_t>(1, std::llround(window_s * sample_rate_hz) / 2);
}

std::int64_t DetectorParams::refractory_samples(double sample_rate_hz) const {
  return std::llround(refractory_s * sample_rate_hz);
}

namespace detail {

double population_sd(std::span<const float> x, std::span<const std::uint8_t> keep) {
  const bool all = keep.empty();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (all || keep[k]) {
      sum += static_cast<double>(x[k]);
      ++n;
    }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (all || keep[k]) {
      const double d = static_cast<double>(x[k]) - mean;
      ss += d * d;
    }
  return std::sqrt(ss / static_cast<double>(n));
}

}  // namespace detail

std::vector<std::int64_t> detect_channel(std::span<const float> x, double sample_rate_hz,
                                         const DetectorParams& params, ChannelNoise* noise) {
  params.validate();
  std::vector<std::int64_t> spikes;
  const auto n = static_cast<std::int64_t>(x.size());
  const double sigma = detail::population_sd(x);
  if (noise) *noise = {sigma, 0.0};
  if (n == 0 || sigma == 0.0) return spikes;

  const std::int64_t h = params.half_window(sample_rate_hz);
  const double low = params.thr_low * sigma;

  // Supra-threshold samples drive both the exclusion mask and the candidate search.
  std::vector<std::int64_t> supra;
  for (std::int64_t k = 0; k < n; ++k)
    if (std::abs(static_cast<double>(x[k])) > low) supra.push_back(k);

  std::vector<std::uint8_t> keep(x.size(), 1);
  std::int64_t masked_until = -1;  // exclusive
  for (auto k : supra) {
    const auto lo = std::max(k - h, masked_until);
    const auto hi = std::min(k + h + 1, n);
    for (auto m = lo; m < hi; ++m) keep[m] = 0;
    masked_until = std::max(masked_until, hi);
  }
  double sigma_n = detail::population_sd(x, keep);
  if (sigma_n == 0.0 && std::count(keep.begin(), keep.end(), 1) < 2) sigma_n = sigma;
  if (noise) noise->sigma_n = sigma_n;

  const double high = params.thr_high * sigma_n;
  const std::int64_t refractory = params.refractory_samples(sample_rate_hz);
  std::int64_t last = -1;
  for (auto k : supra) {
    const float a = std::abs(x[k]);
    bool is_peak = true;
    for (auto m = std::max<std::int64_t>(0, k - h); m < k && is_peak; ++m)
      is_peak = std::abs(x[m]) < a;
    for (auto m = k + 1, end = std::min(n, k + h + 1); m < end && is_peak; ++m)
      is_peak = std::abs(x[m]) <= a;
    if (!is_peak) continue;
    if (last >= 0 && refractory > 0 && k - last < refractory) continue;
    last = k;
    if (static_cast<double>(a) > high) spikes.push_back(k);
  }
  return spikes;
}

SpikeTrain detect_spikes(const RawRecording& rec, const DetectorParams& params) {
  params.validate();
  if (rec.n_channels() == 0 || rec.n_samples() == 0)
    throw std::invalid_argument("cannot detect spikes in an empty recording");
  std::vector<std::vector<std::int64_t>> channels(static_cast<std::size_t>(rec.n_channels()));
  for (int c = 0; c < rec.n_channels(); ++c)
    channels[c] = detect_channel(rec.channel(c), rec.sample_rate_hz, params);
  return SpikeTrain::from_channels(rec.sample_rate_hz, rec.t0_offset_s, rec.n_samples(), channels);
}

}  // namespace mea
