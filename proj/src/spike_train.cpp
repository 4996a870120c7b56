#include "mea/spike_train.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mea {

SpikeTrain::SpikeTrain(int n_channels, double sample_rate_hz, double t0_offset_s,
                       std::int64_t n_samples)
    : sample_rate_hz_(sample_rate_hz),
      t0_offset_s_(t0_offset_s),
      n_samples_(n_samples),
      offsets_(static_cast<std::size_t>(n_channels) + 1, 0) {
  if (n_channels < 0) throw std::invalid_argument("negative channel count");
  if (!(sample_rate_hz > 0)) throw std::invalid_argument("sample rate must be positive");
  if (n_samples < 0) throw std::invalid_argument("negative sample count");
}

SpikeTrain SpikeTrain::from_events(int n_channels, double sample_rate_hz, double t0_offset_s,
                                   std::int64_t n_samples,
                                   std::vector<std::pair<int, std::int64_t>> events) {
  SpikeTrain train(n_channels, sample_rate_hz, t0_offset_s, n_samples);
  for (const auto& [c, s] : events) {
    if (c < 0 || c >= n_channels)
      throw std::out_of_range("spike on channel " + std::to_string(c) + " outside recording");
    if (s < 0 || s >= n_samples)
      throw std::out_of_range("spike sample " + std::to_string(s) + " outside [0, n_samples)");
    ++train.offsets_[static_cast<std::size_t>(c) + 1];
  }
  for (std::size_t c = 1; c < train.offsets_.size(); ++c) train.offsets_[c] += train.offsets_[c - 1];

  std::sort(events.begin(), events.end());
  train.times_.reserve(events.size());
  for (std::size_t k = 0; k < events.size(); ++k) {
    if (k > 0 && events[k] == events[k - 1])
      throw std::invalid_argument("duplicate spike at sample " + std::to_string(events[k].second) +
                                  " on channel " + std::to_string(events[k].first));
    train.times_.push_back(events[k].second);
  }
  return train;
}

SpikeTrain SpikeTrain::from_channels(double sample_rate_hz, double t0_offset_s, std::int64_t n_samples,
                                     const std::vector<std::vector<std::int64_t>>& channels) {
  std::vector<std::pair<int, std::int64_t>> events;
  for (std::size_t c = 0; c < channels.size(); ++c)
    for (auto s : channels[c]) events.emplace_back(static_cast<int>(c), s);
  return from_events(static_cast<int>(channels.size()), sample_rate_hz, t0_offset_s, n_samples,
                     std::move(events));
}

}  // namespace mea
