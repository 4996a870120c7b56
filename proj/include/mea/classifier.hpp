#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mea/readout.hpp"
#include "mea/reservoir.hpp"
#include "mea/stimulus.hpp"

namespace mea {

struct TrainingParams {
  double learning_rate = 0.01;
  int batch_size = 16;
  int epochs = 1000;
  std::uint64_t seed = 0;
  bool standardize = false;  // per-feature z-scoring fitted on the training rows

  void validate() const;
};

/// Affine scores followed by softmax: p = softmax(W x + b).
template <typename Scalar>
struct SLPModel {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;  // classes x features
  VectorX<Scalar> bias;

  static SLPModel zeros(Eigen::Index classes, Eigen::Index features) {
    return {Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(classes, features),
            VectorX<Scalar>::Zero(classes)};
  }
  [[nodiscard]] Eigen::Index n_classes() const noexcept { return weights.rows(); }
  [[nodiscard]] Eigen::Index n_features() const noexcept { return weights.cols(); }
};

/// Row-per-sample sparse design matrix with integer labels.
template <typename Scalar>
struct LabeledSet {
  SparseRowMatrix<Scalar> features;
  std::vector<int> labels;

  [[nodiscard]] Eigen::Index size() const noexcept { return features.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return features.cols(); }
};

LabeledSet<double> make_labeled_set(std::span<const FeatureVector> vectors);

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = scores.maxCoeff();
  VectorX<Scalar> e = (scores.array() - top).exp().matrix();
  return e / e.sum();
}

/// Index of the largest entry; the lowest index wins ties.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return static_cast<int>(best);
}

template <typename Scalar>
VectorX<Scalar> class_scores(const SLPModel<Scalar>& model, const SparseRowMatrix<Scalar>& x, Eigen::Index row) {
  VectorX<Scalar> s = model.bias;
  for (typename SparseRowMatrix<Scalar>::InnerIterator it(x, row); it; ++it)
    s.noalias() += it.value() * model.weights.col(it.col());
  return s;
}

template <typename Scalar, typename Derived>
VectorX<Scalar> class_scores(const SLPModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.n_features()) throw std::invalid_argument("feature dimension does not match the model");
  return model.weights * x.template cast<Scalar>() + model.bias;
}

struct Prediction {
  int label = 0;
  Eigen::VectorXd probabilities;
};

template <typename Scalar, typename Derived>
Prediction predict(const SLPModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  const VectorX<Scalar> s = class_scores(model, x);
  return {argmax(s), softmax(s).template cast<double>()};
}

template <typename Scalar>
Prediction predict(const SLPModel<Scalar>& model, const LabeledSet<Scalar>& set, Eigen::Index row) {
  const VectorX<Scalar> s = class_scores(model, set.features, row);
  return {argmax(s), softmax(s).template cast<double>()};
}

/// Cross-entropy gradient for a batch, kept in factored form: the weight gradient is
/// (1/B) * sum_i deltas.col(i) * x_i^T with deltas = softmax(scores) - onehot(label).
template <typename Scalar>
struct BatchGradient {
  std::vector<Eigen::Index> rows;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> deltas;  // classes x batch
  VectorX<Scalar> bias;
  Scalar loss{0};  // mean over the batch
};

template <typename Scalar>
BatchGradient<Scalar> batch_gradient(const SLPModel<Scalar>& model, const LabeledSet<Scalar>& set,
                                     std::span<const Eigen::Index> rows) {
  BatchGradient<Scalar> g;
  g.rows.assign(rows.begin(), rows.end());
  g.deltas.resize(model.n_classes(), static_cast<Eigen::Index>(rows.size()));
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    const int y = set.labels[static_cast<std::size_t>(r)];
    const VectorX<Scalar> s = class_scores(model, set.features, r);
    const Scalar top = s.maxCoeff();
    const Scalar log_z = top + std::log((s.array() - top).exp().sum());
    loss += static_cast<double>(log_z - s[y]);
    auto d = g.deltas.col(static_cast<Eigen::Index>(i));
    d = (s.array() - log_z).exp().matrix();
    d[y] -= Scalar(1);
  }
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(rows.size());
  g.bias = g.deltas.rowwise().sum() * inv_b;
  g.loss = static_cast<Scalar>(loss) * inv_b;
  return g;
}

/// Expanded classes x features weight gradient (used for checking; training applies it sparsely).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense_weight_gradient(const BatchGradient<Scalar>& g,
                                                                            const LabeledSet<Scalar>& set) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(g.deltas.rows(), set.dim());
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(g.rows.size());
  for (std::size_t i = 0; i < g.rows.size(); ++i)
    for (typename SparseRowMatrix<Scalar>::InnerIterator it(set.features, g.rows[i]); it; ++it)
      out.col(it.col()).noalias() += (inv_b * it.value()) * g.deltas.col(static_cast<Eigen::Index>(i));
  return out;
}

template <typename Scalar>
Scalar cross_entropy_loss(const SLPModel<Scalar>& model, const LabeledSet<Scalar>& set,
                          std::span<const Eigen::Index> rows) {
  return batch_gradient(model, set, rows).loss;
}

template <typename Scalar>
void apply_gradient(SLPModel<Scalar>& model, const BatchGradient<Scalar>& g, const LabeledSet<Scalar>& set,
                    Scalar learning_rate) {
  const Scalar step = learning_rate / static_cast<Scalar>(g.rows.size());
  for (std::size_t i = 0; i < g.rows.size(); ++i)
    for (typename SparseRowMatrix<Scalar>::InnerIterator it(set.features, g.rows[i]); it; ++it)
      model.weights.col(it.col()).noalias() -= (step * it.value()) * g.deltas.col(static_cast<Eigen::Index>(i));
  model.bias.noalias() -= learning_rate * g.bias;
}

/// Mini-batch SGD on the mean cross-entropy for exactly `epochs` passes over a freshly
/// shuffled order, starting from zero weights. No validation split and no early stopping.
template <typename Scalar>
SLPModel<Scalar> train_slp(const LabeledSet<Scalar>& set, const TrainingParams& hp, int n_classes = kDigits) {
  hp.validate();
  if (set.size() == 0) throw std::invalid_argument("cannot train on an empty set");
  if (static_cast<Eigen::Index>(set.labels.size()) != set.size())
    throw std::invalid_argument("label count does not match the feature rows");
  std::vector<int> per_class(static_cast<std::size_t>(n_classes), 0);
  for (int y : set.labels) {
    if (y < 0 || y >= n_classes) throw std::out_of_range("label " + std::to_string(y) + " outside the class range");
    ++per_class[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < n_classes; ++c)
    if (per_class[static_cast<std::size_t>(c)] == 0)
      throw std::invalid_argument("class " + std::to_string(c) + " has no training samples");

  auto model = SLPModel<Scalar>::zeros(n_classes, set.dim());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(set.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(hp.seed);
  const auto lr = static_cast<Scalar>(hp.learning_rate);
  const auto batch = static_cast<std::size_t>(hp.batch_size);

  auto non_finite = [&](int epoch, std::size_t start) {
    return std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting at " +
                              std::to_string(start) + " (learning rate " + std::to_string(hp.learning_rate) + ")");
  };

  // Mostly non-zero features (reservoir states, standardized counts) train faster as one small
  // matrix product per batch than as per-entry column updates.
  const bool dense = 3 * set.features.nonZeros() > set.size() * set.dim();
  if (dense) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Mat xt = Mat(set.features).transpose();  // features x samples
    Mat xb(set.dim(), static_cast<Eigen::Index>(batch));
    Mat scores;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const auto b = static_cast<Eigen::Index>(std::min(batch, order.size() - start));
        for (Eigen::Index i = 0; i < b; ++i) xb.col(i) = xt.col(order[start + static_cast<std::size_t>(i)]);
        scores.noalias() = model.weights * xb.leftCols(b);
        scores.colwise() += model.bias;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < b; ++i) {
          auto s = scores.col(i);
          const int y = set.labels[static_cast<std::size_t>(order[start + static_cast<std::size_t>(i)])];
          const Scalar top = s.maxCoeff();
          const Scalar log_z = top + std::log((s.array() - top).exp().sum());
          loss += static_cast<double>(log_z - s[y]);
          s = (s.array() - log_z).exp().matrix();
          s[y] -= Scalar(1);
        }
        if (!std::isfinite(loss)) throw non_finite(epoch, start);
        const Scalar step = lr / static_cast<Scalar>(b);
        model.weights.noalias() -= step * scores * xb.leftCols(b).transpose();
        model.bias.noalias() -= step * scores.rowwise().sum();
      }
    }
    return model;
  }

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto rows = std::span<const Eigen::Index>(order).subspan(start, std::min(batch, order.size() - start));
      const auto g = batch_gradient(model, set, rows);
      if (!std::isfinite(static_cast<double>(g.loss))) throw non_finite(epoch, start);
      apply_gradient(model, g, set, lr);
    }
  }
  return model;
}

// ---- evaluation ----------------------------------------------------------------------------

struct EvalReport {
  double accuracy = 0.0;
  Eigen::VectorXd per_class;  // NaN for classes absent from the evaluated set
  Eigen::MatrixXi confusion;  // rows: true label, columns: predicted
  std::vector<int> predicted;  // per evaluated row
  int n = 0;
};

EvalReport evaluate(const SLPModel<double>& model, const LabeledSet<double>& set, int n_classes = kDigits);

struct CVReport {
  std::vector<double> fold_accuracy;
  double mean = 0.0;
  double sd = 0.0;  // sample sd across folds
  Eigen::VectorXd per_class;
  Eigen::MatrixXi confusion;
  std::vector<int> fold_of;    // fold id per sample
  std::vector<int> predicted;  // held-out prediction per sample
};

/// Stratified fold assignment: each class is shuffled and dealt round-robin, continuing the
/// rotation across classes so fold sizes differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

CVReport cross_validate(const LabeledSet<double>& set, int k, const TrainingParams& hp, std::uint64_t seed,
                        int n_classes = kDigits);

/// Z-score statistics of the training rows (zero-variance features pass through centred).
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const LabeledSet<double>& set);
  [[nodiscard]] LabeledSet<double> apply(const LabeledSet<double>& set) const;
};

/// Equivalent model on raw features: W' = W diag(scale), b' = b - W' mean.
SLPModel<double> fold_standardizer(const SLPModel<double>& model, const Standardizer& s);

/// Train on `train`. With hp.standardize the statistics are fitted on `train` and returned
/// through `standardizer`.
SLPModel<double> fit_model(const LabeledSet<double>& train, const TrainingParams& hp,
                           Standardizer* standardizer = nullptr, int n_classes = kDigits);

struct CrossSessionReport {
  std::vector<EvalReport> sessions;
  std::vector<EvalReport> shuffled;
};

/// One model on every training trial, evaluated on each test session in full and on a
/// spatially shuffled copy of it.
CrossSessionReport cross_session_eval(std::span<const FeatureVector> train,
                                      const std::vector<std::vector<FeatureVector>>& tests,
                                      const TrainingParams& hp, std::uint64_t shuffle_seed);

/// SLPM: "SLPM", u16 version, u32 classes, u32 features, then classes*features row-major
/// weights and the bias, all little-endian f64.
void save_slp(const SLPModel<double>& model, const std::filesystem::path& path);
SLPModel<double> load_slp(const std::filesystem::path& path);

}  // namespace mea
