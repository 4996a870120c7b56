#include "mea/classifier.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "mea/seed.hpp"

namespace mea {

void TrainingParams::validate() const {
  if (!(learning_rate >= 0)) throw std::invalid_argument("learning rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

LabeledSet<double> make_labeled_set(std::span<const FeatureVector> vectors) {
  LabeledSet<double> set;
  const Eigen::Index dim = vectors.empty() ? kChannels : vectors.front().values.size();
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < vectors.size(); ++r) {
    const auto& v = vectors[r].values;
    if (v.size() != dim) throw std::invalid_argument("feature vectors differ in dimension");
    for (Eigen::Index c = 0; c < dim; ++c)
      if (v[c] != 0.0) triplets.emplace_back(static_cast<Eigen::Index>(r), c, v[c]);
    set.labels.push_back(vectors[r].label);
  }
  set.features.resize(static_cast<Eigen::Index>(vectors.size()), dim);
  set.features.setFromTriplets(triplets.begin(), triplets.end());
  set.features.makeCompressed();
  return set;
}

EvalReport evaluate(const SLPModel<double>& model, const LabeledSet<double>& set, int n_classes) {
  if (set.dim() != model.n_features()) throw std::invalid_argument("feature schema does not match the model");
  EvalReport rep;
  rep.n = static_cast<int>(set.size());
  rep.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  int correct = 0;
  for (Eigen::Index r = 0; r < set.size(); ++r) {
    const int y = set.labels[static_cast<std::size_t>(r)];
    const int p = argmax(class_scores(model, set.features, r));
    rep.predicted.push_back(p);
    ++rep.confusion(y, p);
    correct += (p == y);
  }
  rep.accuracy = rep.n ? static_cast<double>(correct) / rep.n : 0.0;
  rep.per_class.resize(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    const int total = rep.confusion.row(c).sum();
    rep.per_class[c] = total ? static_cast<double>(rep.confusion(c, c)) / total
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  if (static_cast<int>(labels.size()) < k) throw std::invalid_argument("fewer samples than folds");
  const int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw std::out_of_range("negative label");
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), -1);
  int next = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int i : members) {
      fold[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % k;
    }
  }
  return fold;
}

Standardizer Standardizer::fit(const LabeledSet<double>& set) {
  Standardizer s;
  const double n = static_cast<double>(set.size());
  s.mean = Eigen::VectorXd::Zero(set.dim());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(set.dim());
  for (Eigen::Index r = 0; r < set.size(); ++r)
    for (SparseRowMatrix<double>::InnerIterator it(set.features, r); it; ++it) {
      s.mean[it.col()] += it.value();
      sq[it.col()] += it.value() * it.value();
    }
  s.mean /= n;
  const Eigen::VectorXd var = (sq / n - s.mean.cwiseAbs2()).cwiseMax(0.0);
  s.scale = var.unaryExpr([](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; });
  return s;
}

LabeledSet<double> Standardizer::apply(const LabeledSet<double>& set) const {
  LabeledSet<double> out;
  out.labels = set.labels;
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < set.size(); ++r) {
    Eigen::VectorXd row = -mean;
    for (SparseRowMatrix<double>::InnerIterator it(set.features, r); it; ++it) row[it.col()] += it.value();
    row.array() *= scale.array();
    for (Eigen::Index c = 0; c < row.size(); ++c)
      if (row[c] != 0.0) triplets.emplace_back(r, c, row[c]);
  }
  out.features.resize(set.size(), set.dim());
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  out.features.makeCompressed();
  return out;
}

SLPModel<double> fold_standardizer(const SLPModel<double>& model, const Standardizer& s) {
  if (s.scale.size() != model.n_features() || s.mean.size() != model.n_features())
    throw std::invalid_argument("standardizer does not match the model");
  SLPModel<double> out;
  out.weights = model.weights * s.scale.asDiagonal();
  out.bias = model.bias - out.weights * s.mean;
  return out;
}

SLPModel<double> fit_model(const LabeledSet<double>& train, const TrainingParams& hp, Standardizer* standardizer,
                           int n_classes) {
  if (!hp.standardize) return train_slp(train, hp, n_classes);
  auto s = Standardizer::fit(train);
  auto model = train_slp(s.apply(train), hp, n_classes);
  if (standardizer) *standardizer = std::move(s);
  return model;
}

namespace {

LabeledSet<double> subset(const LabeledSet<double>& set, const std::vector<Eigen::Index>& rows) {
  LabeledSet<double> out;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseRowMatrix<double>::InnerIterator it(set.features, rows[i]); it; ++it)
      triplets.emplace_back(static_cast<Eigen::Index>(i), it.col(), it.value());
    out.labels.push_back(set.labels[static_cast<std::size_t>(rows[i])]);
  }
  out.features.resize(static_cast<Eigen::Index>(rows.size()), set.dim());
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  out.features.makeCompressed();
  return out;
}

EvalReport evaluate_with(const SLPModel<double>& model, const LabeledSet<double>& test, bool standardize,
                         const Standardizer& s, int n_classes = kDigits) {
  return standardize ? evaluate(model, s.apply(test), n_classes) : evaluate(model, test, n_classes);
}

}  // namespace

CVReport cross_validate(const LabeledSet<double>& set, int k, const TrainingParams& hp, std::uint64_t seed,
                        int n_classes) {
  CVReport rep;
  rep.fold_of = stratified_folds(set.labels, k, seed);
  rep.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  rep.predicted.assign(static_cast<std::size_t>(set.size()), -1);

  for (int f = 0; f < k; ++f) {
    std::vector<Eigen::Index> train_rows, test_rows;
    for (Eigen::Index r = 0; r < set.size(); ++r)
      (rep.fold_of[static_cast<std::size_t>(r)] == f ? test_rows : train_rows).push_back(r);
    const auto train = subset(set, train_rows);
    const auto test = subset(set, test_rows);
    for (int c = 0; c < n_classes; ++c)
      if (std::find(train.labels.begin(), train.labels.end(), c) == train.labels.end())
        throw std::invalid_argument("class " + std::to_string(c) + " absent from the training folds of fold " +
                                    std::to_string(f));

    TrainingParams fold_hp = hp;
    fold_hp.seed = derive_seed(seed, {kTagFold, static_cast<std::uint64_t>(f)});
    Standardizer s;
    const auto model = fit_model(train, fold_hp, &s, n_classes);
    const auto r = evaluate_with(model, test, hp.standardize, s, n_classes);
    rep.fold_accuracy.push_back(r.accuracy);
    rep.confusion += r.confusion;
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      rep.predicted[static_cast<std::size_t>(test_rows[i])] = r.predicted[i];
  }

  const double n = static_cast<double>(k);
  rep.mean = std::accumulate(rep.fold_accuracy.begin(), rep.fold_accuracy.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : rep.fold_accuracy) ss += (a - rep.mean) * (a - rep.mean);
  rep.sd = std::sqrt(ss / (n - 1.0));
  rep.per_class.resize(n_classes);
  for (int c = 0; c < n_classes; ++c) {
    const int total = rep.confusion.row(c).sum();
    rep.per_class[c] = total ? static_cast<double>(rep.confusion(c, c)) / total
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

CrossSessionReport cross_session_eval(std::span<const FeatureVector> train,
                                      const std::vector<std::vector<FeatureVector>>& tests,
                                      const TrainingParams& hp, std::uint64_t shuffle_seed) {
  const auto train_set = make_labeled_set(train);
  Standardizer s;
  const auto model = fit_model(train_set, hp, &s);

  CrossSessionReport rep;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    const auto& session = tests[t];
    if (!session.empty() && session.front().values.size() != train_set.dim())
      throw std::invalid_argument("test session feature schema does not match the training session");
    rep.sessions.push_back(evaluate_with(model, make_labeled_set(session), hp.standardize, s));

    std::vector<FeatureVector> shuffled;
    shuffled.reserve(session.size());
    for (std::size_t i = 0; i < session.size(); ++i)
      shuffled.push_back(shuffle_spatial(session[i], derive_seed(shuffle_seed, {kTagShuffle, t, i})));
    rep.shuffled.push_back(evaluate_with(model, make_labeled_set(shuffled), hp.standardize, s));
  }
  return rep;
}

// ---- SLPM ----------------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kSlpMagic{'S', 'L', 'P', 'M'};
constexpr std::uint16_t kSlpVersion = 1;

template <typename U>
void put_u(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t k = 0; k < sizeof(U); ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  os.write(b.data(), b.size());
}

template <typename U>
U get_u(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) throw std::runtime_error("truncated SLPM file");
  U v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(b[k]) << (8 * k);
  return v;
}

}  // namespace

void save_slp(const SLPModel<double>& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kSlpMagic.data(), kSlpMagic.size());
  put_u<std::uint16_t>(os, kSlpVersion);
  put_u<std::uint32_t>(os, static_cast<std::uint32_t>(model.n_classes()));
  put_u<std::uint32_t>(os, static_cast<std::uint32_t>(model.n_features()));
  for (Eigen::Index r = 0; r < model.n_classes(); ++r)
    for (Eigen::Index c = 0; c < model.n_features(); ++c) put_u(os, std::bit_cast<std::uint64_t>(model.weights(r, c)));
  for (Eigen::Index r = 0; r < model.n_classes(); ++r) put_u(os, std::bit_cast<std::uint64_t>(model.bias[r]));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

SLPModel<double> load_slp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kSlpMagic)
    throw std::runtime_error(path.string() + " is not an SLPM model");
  if (get_u<std::uint16_t>(is) != kSlpVersion) throw std::runtime_error("unsupported SLPM version");
  const auto classes = get_u<std::uint32_t>(is);
  const auto features = get_u<std::uint32_t>(is);
  auto model = SLPModel<double>::zeros(classes, features);
  for (Eigen::Index r = 0; r < model.n_classes(); ++r)
    for (Eigen::Index c = 0; c < model.n_features(); ++c)
      model.weights(r, c) = std::bit_cast<double>(get_u<std::uint64_t>(is));
  for (Eigen::Index r = 0; r < model.n_classes(); ++r) model.bias[r] = std::bit_cast<double>(get_u<std::uint64_t>(is));
  if (!model.weights.allFinite() || !model.bias.allFinite())
    throw std::runtime_error("SLPM model contains non-finite parameters");
  return model;
}

}  // namespace mea
