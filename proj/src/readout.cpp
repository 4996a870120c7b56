#include "mea/readout.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mea {

void ReadoutParams::validate() const {
  if (!(window_s > 0)) throw std::invalid_argument("readout window must be positive");
  if (mask_half_width < 0) throw std::invalid_argument("mask_half_width must be >= 0");
}

std::vector<std::uint8_t> stimulation_mask(const StimulusPattern& pattern, int half_width) {
  if (half_width < 0) throw std::invalid_argument("mask_half_width must be >= 0");
  std::vector<std::uint8_t> mask(kChannels, 0);
  for (int e : pattern.electrodes()) {
    const auto g = channel_to_grid(e);
    for (int r = std::max(0, g.row - half_width); r <= std::min(kGridSide - 1, g.row + half_width); ++r)
      for (int c = std::max(0, g.col - half_width); c <= std::min(kGridSide - 1, g.col + half_width); ++c)
        mask[static_cast<std::size_t>(grid_to_channel({r, c}))] = 1;
  }
  return mask;
}

FeatureVector extract_features(const SpikeTrain& train, double onset_s, const ReadoutParams& params,
                               const StimulusPattern& pattern) {
  params.validate();
  if (train.n_channels() != kChannels)
    throw std::invalid_argument("feature extraction needs a full 4096-channel spike train");
  const double fs = train.sample_rate_hz();
  const std::int64_t first = std::llround((onset_s - train.t0_offset_s()) * fs);
  const std::int64_t last = first + std::llround(params.window_s * fs);
  if (first < 0) throw std::out_of_range("readout window starts before the recording");
  if (last >= train.n_samples()) throw std::out_of_range("readout window extends past the recording end");

  FeatureVector fv;
  fv.masked = stimulation_mask(pattern, params.mask_half_width);
  fv.label = pattern.label;
  fv.onset_s = onset_s;
  fv.window_s = params.window_s;
  for (int c = 0; c < kChannels; ++c) {
    if (fv.masked[static_cast<std::size_t>(c)]) continue;
    const auto times = train.channel(c);
    const auto lo = std::lower_bound(times.begin(), times.end(), first);
    const auto hi = std::upper_bound(lo, times.end(), last);
    fv.values[c] = static_cast<double>(hi - lo);
  }
  return fv;
}

FeatureVector shuffle_spatial(const FeatureVector& fv, std::uint64_t seed) {
  std::vector<Eigen::Index> open;
  for (Eigen::Index c = 0; c < fv.values.size(); ++c)
    if (!fv.masked[static_cast<std::size_t>(c)]) open.push_back(c);

  FeatureVector out = fv;
  std::vector<double> vals(open.size());
  for (std::size_t k = 0; k < open.size(); ++k) vals[k] = fv.values[open[k]];
  std::mt19937_64 rng(seed);
  std::shuffle(vals.begin(), vals.end(), rng);
  for (std::size_t k = 0; k < open.size(); ++k) out.values[open[k]] = vals[k];
  return out;
}

}  // namespace mea
