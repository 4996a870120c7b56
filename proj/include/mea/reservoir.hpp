#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mea/readout.hpp"
#include "mea/seed.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace mea {

enum class Nonlinearity { tanh, softsign };

struct ReservoirParams {
  int n_units = kChannels;
  double density = 0.10;
  double spectral_radius = 0.9;
  double input_gain = 1.0;
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  // Power-iteration schedule for the spectral radius estimate.
  int power_burn_in = 300;
  int power_iterations = 600;

  void validate() const;
};

template <typename Scalar>
using SparseRowMatrix = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Two-step sparse reservoir: x1 = phi(gain * u), x2 = phi(R x1).
template <typename Scalar>
struct ARModel {
  SparseRowMatrix<Scalar> recurrent;
  Scalar input_gain{1};
  Scalar spectral_radius{0};  // target the recurrent matrix was scaled to
  Nonlinearity nonlinearity = Nonlinearity::tanh;
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index n_units() const noexcept { return recurrent.rows(); }
  [[nodiscard]] double density() const noexcept {
    const double n = static_cast<double>(recurrent.rows());
    return n > 0 ? static_cast<double>(recurrent.nonZeros()) / (n * n) : 0.0;
  }
};

/// Growth-rate estimate of the spectral radius: power iteration with per-step
/// normalisation, geometric mean of the growth factors after a burn-in.
/// Handles a dominant complex-conjugate pair, where plain Rayleigh quotients oscillate.
template <typename Scalar>
Scalar estimate_spectral_radius(const SparseRowMatrix<Scalar>& a, int burn_in, int iterations,
                                std::uint64_t seed) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral radius needs a square matrix");
  if (a.rows() == 0 || iterations < 1) return Scalar(0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorX<Scalar> x(a.rows());
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = static_cast<Scalar>(gauss(rng));
  x.normalize();

  VectorX<Scalar> y(a.rows());
  double log_growth = 0.0;
  for (int it = 0; it < burn_in + iterations; ++it) {
    y.noalias() = a * x;
    const Scalar g = y.norm();
    if (g == Scalar(0)) return Scalar(0);  // nilpotent direction
    if (it >= burn_in) log_growth += std::log(static_cast<double>(g));
    x = y / g;
  }
  return static_cast<Scalar>(std::exp(log_growth / iterations));
}

template <typename Derived>
auto apply_nonlinearity(const Eigen::MatrixBase<Derived>& v, Nonlinearity phi) {
  using Scalar = typename Derived::Scalar;
  if (phi == Nonlinearity::tanh) return VectorX<Scalar>(v.array().tanh().matrix());
  return VectorX<Scalar>((v.array() / (Scalar(1) + v.array().abs())).matrix());
}

/// Recurrent matrix with exactly round(density * n) nonzeros per row, values uniform in
/// [-1, 1], rescaled to the requested spectral radius.
template <typename Scalar>
ARModel<Scalar> build_reservoir(const ReservoirParams& params, std::uint64_t seed) {
  params.validate();
  const int n = params.n_units;
  const int per_row = static_cast<int>(std::lround(params.density * n));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> value(-1.0, 1.0);

  std::vector<Eigen::Triplet<Scalar>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * per_row);
  for (int r = 0; r < n; ++r) {
    // Selection sampling: each column kept with probability needed / remaining.
    int needed = per_row;
    for (int c = 0; c < n && needed > 0; ++c) {
      if (unit(rng) * (n - c) < needed) {
        triplets.emplace_back(r, c, static_cast<Scalar>(value(rng)));
        --needed;
      }
    }
  }
  ARModel<Scalar> model;
  model.recurrent.resize(n, n);
  model.recurrent.setFromTriplets(triplets.begin(), triplets.end());
  model.recurrent.makeCompressed();

  const Scalar rho = estimate_spectral_radius(model.recurrent, params.power_burn_in, params.power_iterations,
                                              derive_seed(seed, {kTagReservoir}));
  if (rho > Scalar(0)) model.recurrent *= static_cast<Scalar>(params.spectral_radius) / rho;
  model.input_gain = static_cast<Scalar>(params.input_gain);
  model.spectral_radius = static_cast<Scalar>(params.spectral_radius);
  model.nonlinearity = params.nonlinearity;
  model.seed = seed;
  return model;
}

/// Reservoir state after the input step and one additional recurrent step, from rest.
template <typename Scalar>
VectorX<Scalar> reservoir_response(const ARModel<Scalar>& model, const VectorX<Scalar>& input) {
  if (input.size() != model.n_units()) throw std::invalid_argument("input size does not match the reservoir");
  const VectorX<Scalar> x1 = apply_nonlinearity(model.input_gain * input, model.nonlinearity);
  const VectorX<Scalar> pre = model.recurrent * x1;
  VectorX<Scalar> x2 = apply_nonlinearity(pre, model.nonlinearity);
  if (!x2.allFinite()) throw std::runtime_error("reservoir state became non-finite");
  return x2;
}

struct NoiseCalibration {
  Eigen::VectorXd mean_counts = Eigen::VectorXd::Zero(kChannels);
  double window_s = 0.0;
  int n_windows = 0;
};

/// Mean spike count per channel over `n_windows` non-overlapping windows of length W,
/// chosen uniformly at random from the consecutive W-slots of the recording.
NoiseCalibration calibrate_noise(const SpikeTrain& spontaneous, double window_s, int n_windows,
                                 std::uint64_t seed);

/// Signed stimulation map: +amplitude at positive electrodes, -amplitude at negative ones.
Eigen::VectorXd stimulation_input(const StimulusPattern& pattern, int n_units = kChannels);

/// Per-channel Poisson noise with means `multiplier * calibration.mean_counts`.
Eigen::VectorXd draw_spontaneous_noise(const NoiseCalibration& calibration, double multiplier,
                                       std::uint64_t seed);

/// One trial of the artificial reservoir: noisy stimulus map in, masked two-step state out.
template <typename Scalar>
FeatureVector ar_forward(const ARModel<Scalar>& model, const StimulusPattern& pattern,
                         const NoiseCalibration& noise, const ReadoutParams& readout, std::uint64_t seed,
                         double noise_multiplier = 1.0) {
  if (model.n_units() != kChannels) throw std::invalid_argument("reservoir must have one unit per channel");
  Eigen::VectorXd u = stimulation_input(pattern);
  if (noise_multiplier > 0.0) u += draw_spontaneous_noise(noise, noise_multiplier, seed);
  const VectorX<Scalar> x2 = reservoir_response(model, VectorX<Scalar>(u.cast<Scalar>()));

  FeatureVector fv;
  fv.masked = stimulation_mask(pattern, readout.mask_half_width);
  fv.label = pattern.label;
  fv.window_s = readout.window_s;
  for (Eigen::Index c = 0; c < x2.size(); ++c)
    fv.values[c] = fv.masked[static_cast<std::size_t>(c)] ? 0.0 : static_cast<double>(x2[c]);
  return fv;
}

}  // namespace mea
