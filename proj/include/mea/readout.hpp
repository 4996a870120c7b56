#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mea/grid.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace mea {

struct ReadoutParams {
  double window_s = 0.005;
  int mask_half_width = 2;

  void validate() const;
};

/// Grid-indexed response vector for one trial. Spike-count readouts hold non-negative integers;
/// the artificial reservoir stores real-valued unit states in the same layout.
struct FeatureVector {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(kChannels);
  std::vector<std::uint8_t> masked = std::vector<std::uint8_t>(kChannels, 0);
  int label = 0;
  std::string session;
  int trial = 0;
  double onset_s = 0.0;
  double window_s = 0.0;
};

/// Channels within Chebyshev distance `half_width` of any electrode of the pattern.
std::vector<std::uint8_t> stimulation_mask(const StimulusPattern& pattern, int half_width);

/// Spikes per channel in the closed window [t_s, t_s + W], masked channels zeroed.
/// `onset_s` is on the train's clock (sample 0 sits at t0_offset_s).
FeatureVector extract_features(const SpikeTrain& train, double onset_s, const ReadoutParams& params,
                               const StimulusPattern& pattern);

/// Seeded permutation of the unmasked entries; masked entries, label and total are preserved.
FeatureVector shuffle_spatial(const FeatureVector& fv, std::uint64_t seed);

}  // namespace mea
