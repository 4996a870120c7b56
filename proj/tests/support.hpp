#pragma once

// Shared helpers and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mea/classifier.hpp"
#include "mea/readout.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace testsupport {

/// Poisson spikes at `rate_hz` per channel inside [margin, n_samples - margin), keeping only
/// spikes at least `min_gap` samples after the previous kept one.
inline mea::SpikeTrain random_train(int channels, std::int64_t n_samples, double rate_hz, std::int64_t min_gap,
                                    std::uint64_t seed, std::int64_t margin = 0, double fs = 20000.0,
                                    double t0 = 0.0) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate_hz / fs);
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(channels));
  for (auto& ch : out) {
    std::int64_t last = std::numeric_limits<std::int64_t>::min() / 2;
    for (double t = static_cast<double>(margin) + gap(rng); t < static_cast<double>(n_samples - margin);
         t += gap(rng)) {
      const auto s = static_cast<std::int64_t>(t);
      if (s - last >= min_gap) {
        ch.push_back(s);
        last = s;
      }
    }
  }
  return mea::SpikeTrain::from_channels(fs, t0, n_samples, out);
}

/// Number of one-to-one matches between sorted truth and detected times within `tol` samples.
inline int matched(std::span<const std::int64_t> truth, std::span<const std::int64_t> found, std::int64_t tol) {
  std::size_t i = 0, j = 0;
  int m = 0;
  while (i < truth.size() && j < found.size()) {
    if (found[j] < truth[i] - tol) {
      ++j;
    } else if (found[j] > truth[i] + tol) {
      ++i;
    } else {
      ++m;
      ++i;
      ++j;
    }
  }
  return m;
}

/// Direct evaluation of the windowed count in the time domain: spikes with onset <= t <= onset + W,
/// zeroed on channels within Chebyshev distance `hw` of any stimulated electrode.
/// Onset and window are expected on the sample grid; half a sample absorbs rounding.
inline Eigen::VectorXd brute_force_counts(const mea::SpikeTrain& train, double onset_s, double window_s,
                                          const mea::StimulusPattern& pattern, int hw) {
  const double half = 0.5 / train.sample_rate_hz();
  std::vector<int> er, ec;
  for (const auto& p : pattern.pairs)
    for (int e : {p.positive, p.negative}) {
      er.push_back(e / 64);
      ec.push_back(e % 64);
    }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(train.n_channels());
  for (int c = 0; c < train.n_channels(); ++c) {
    bool masked = false;
    for (std::size_t k = 0; k < er.size(); ++k)
      masked = masked || std::max(std::abs(c / 64 - er[k]), std::abs(c % 64 - ec[k])) <= hw;
    if (masked) continue;
    for (auto s : train.channel(c)) {
      const double t = train.t0_offset_s() + static_cast<double>(s) / train.sample_rate_hz();
      if (t >= onset_s - half && t <= onset_s + window_s + half) out[c] += 1.0;
    }
  }
  return out;
}

/// Central finite-difference gradient of the mean batch loss with respect to every weight and bias.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> numeric_gradient(const mea::SLPModel<double>& model,
                                                                    const mea::LabeledSet<double>& set,
                                                                    std::span<const Eigen::Index> rows,
                                                                    double h = 1e-6) {
  Eigen::MatrixXd gw(model.weights.rows(), model.weights.cols());
  Eigen::VectorXd gb(model.bias.size());
  auto m = model;
  for (Eigen::Index i = 0; i < gw.rows(); ++i) {
    for (Eigen::Index j = 0; j < gw.cols(); ++j) {
      const double w = m.weights(i, j);
      m.weights(i, j) = w + h;
      const double up = mea::cross_entropy_loss(m, set, rows);
      m.weights(i, j) = w - h;
      const double down = mea::cross_entropy_loss(m, set, rows);
      m.weights(i, j) = w;
      gw(i, j) = (up - down) / (2 * h);
    }
    const double b = m.bias[i];
    m.bias[i] = b + h;
    const double up = mea::cross_entropy_loss(m, set, rows);
    m.bias[i] = b - h;
    const double down = mea::cross_entropy_loss(m, set, rows);
    m.bias[i] = b;
    gb[i] = (up - down) / (2 * h);
  }
  return {gw, gb};
}

/// Small labelled set with dense Gaussian features; class means separated by `separation`.
inline mea::LabeledSet<double> gaussian_set(int per_class, int n_classes, int dim, double separation,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd centres(n_classes, dim);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = separation * g(rng);
  std::vector<mea::FeatureVector> v;
  for (int k = 0; k < per_class; ++k)
    for (int c = 0; c < n_classes; ++c) {
      mea::FeatureVector fv;
      fv.values = Eigen::VectorXd(dim);
      for (int d = 0; d < dim; ++d) fv.values[d] = centres(c, d) + g(rng);
      fv.label = c;
      v.push_back(std::move(fv));
    }
  return mea::make_labeled_set(v);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mea_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
