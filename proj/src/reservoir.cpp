#include "mea/reservoir.hpp"

#include <algorithm>

namespace mea {

void ReservoirParams::validate() const {
  if (n_units < 1) throw std::invalid_argument("reservoir needs at least one unit");
  if (!(density > 0 && density <= 1)) throw std::invalid_argument("reservoir density must be in (0, 1]");
  if (!(spectral_radius > 0)) throw std::invalid_argument("spectral radius must be positive");
  if (power_iterations < 1 || power_burn_in < 0) throw std::invalid_argument("invalid power-iteration schedule");
}

NoiseCalibration calibrate_noise(const SpikeTrain& spontaneous, double window_s, int n_windows,
                                 std::uint64_t seed) {
  if (!(window_s > 0)) throw std::invalid_argument("calibration window must be positive");
  if (n_windows < 1) throw std::invalid_argument("calibration needs at least one window");
  const double fs = spontaneous.sample_rate_hz();
  // Closed windows [t, t + W], as in the stimulus readout.
  const std::int64_t span = std::llround(window_s * fs) + 1;
  const std::int64_t slots = spontaneous.n_samples() / span;
  if (slots < n_windows)
    throw std::invalid_argument("spontaneous recording too short for " + std::to_string(n_windows) +
                                " non-overlapping windows");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::int64_t> starts;
  std::int64_t needed = n_windows;
  for (std::int64_t s = 0; s < slots && needed > 0; ++s)
    if (unit(rng) * static_cast<double>(slots - s) < static_cast<double>(needed)) {
      starts.push_back(s * span);
      --needed;
    }

  NoiseCalibration cal;
  cal.mean_counts = Eigen::VectorXd::Zero(spontaneous.n_channels());
  cal.window_s = window_s;
  cal.n_windows = n_windows;
  for (int c = 0; c < spontaneous.n_channels(); ++c) {
    const auto times = spontaneous.channel(c);
    std::int64_t total = 0;
    for (auto start : starts) {
      const auto lo = std::lower_bound(times.begin(), times.end(), start);
      const auto hi = std::upper_bound(lo, times.end(), start + span - 1);
      total += hi - lo;
    }
    cal.mean_counts[c] = static_cast<double>(total) / n_windows;
  }
  return cal;
}

Eigen::VectorXd stimulation_input(const StimulusPattern& pattern, int n_units) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n_units);
  for (const auto& pair : pattern.pairs) {
    u[pair.positive] += pattern.pulse.amplitude_ua;
    u[pair.negative] -= pattern.pulse.amplitude_ua;
  }
  return u;
}

Eigen::VectorXd draw_spontaneous_noise(const NoiseCalibration& calibration, double multiplier,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(calibration.mean_counts.size());
  for (Eigen::Index c = 0; c < xi.size(); ++c) {
    const double mean = multiplier * calibration.mean_counts[c];
    if (mean > 0.0) xi[c] = std::poisson_distribution<int>(mean)(rng);
  }
  return xi;
}

}  // namespace mea
