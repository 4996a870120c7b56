#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mea/grid.hpp"

namespace mea {

/// Per-channel sorted spike times (sample indices relative to the recording start),
/// stored as one compressed row per channel.
class SpikeTrain {
 public:
  SpikeTrain() = default;
  SpikeTrain(int n_channels, double sample_rate_hz, double t0_offset_s, std::int64_t n_samples);

  /// Build from unordered (channel, sample) events. Duplicate events on one channel are rejected.
  static SpikeTrain from_events(int n_channels, double sample_rate_hz, double t0_offset_s,
                                std::int64_t n_samples,
                                std::vector<std::pair<int, std::int64_t>> events);

  static SpikeTrain from_channels(double sample_rate_hz, double t0_offset_s, std::int64_t n_samples,
                                  const std::vector<std::vector<std::int64_t>>& channels);

  [[nodiscard]] int n_channels() const noexcept {
    return offsets_.empty() ? 0 : static_cast<int>(offsets_.size()) - 1;
  }
  [[nodiscard]] std::span<const std::int64_t> channel(int c) const {
    return {times_.data() + offsets_.at(c), times_.data() + offsets_.at(c + 1)};
  }
  [[nodiscard]] std::size_t total_spikes() const noexcept { return times_.size(); }
  [[nodiscard]] bool empty() const noexcept { return times_.empty(); }

  [[nodiscard]] double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  [[nodiscard]] double t0_offset_s() const noexcept { return t0_offset_s_; }
  [[nodiscard]] std::int64_t n_samples() const noexcept { return n_samples_; }
  [[nodiscard]] double duration_s() const noexcept {
    return static_cast<double>(n_samples_) / sample_rate_hz_;
  }
  [[nodiscard]] double time_of(std::int64_t sample) const noexcept {
    return t0_offset_s_ + static_cast<double>(sample) / sample_rate_hz_;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

 private:
  double sample_rate_hz_ = kDefaultSampleRateHz;
  double t0_offset_s_ = 0.0;
  std::int64_t n_samples_ = 0;
  std::vector<std::int64_t> offsets_;
  std::vector<std::int64_t> times_;
};

}  // namespace mea
