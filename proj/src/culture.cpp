#include "mea/culture.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>

#include "mea/seed.hpp"

namespace mea {

void CultureParams::validate() const {
  if (!(connection_peak > 0 && connection_peak <= 1))
    throw std::invalid_argument("connection_peak must be in (0, 1]");
  if (!(connection_sigma > 0)) throw std::invalid_argument("connection_sigma must be positive");
  if (!(excitatory_fraction >= 0 && excitatory_fraction <= 1))
    throw std::invalid_argument("excitatory_fraction must be in [0, 1]");
  if (!(weight_exc >= 0) || !(weight_inh >= 0) || !(weight_max > 0))
    throw std::invalid_argument("synaptic efficacies must be non-negative and bounded");
  if (!(weight_spread >= 0)) throw std::invalid_argument("weight_spread must be >= 0");
  if (!(membrane.tau_ms > 0)) throw std::invalid_argument("membrane time constant must be positive");
  if (!(membrane.reset < membrane.threshold)) throw std::invalid_argument("reset must be below threshold");
  if (!(membrane.refractory_ms >= 0)) throw std::invalid_argument("refractory period must be >= 0");
  if (!(membrane.floor <= membrane.reset)) throw std::invalid_argument("membrane floor must be <= reset");
  if (!(background_rate_hz >= 0) || !(background_kick >= 0))
    throw std::invalid_argument("background drive must be >= 0");
  if (!(coupling_gain >= 0) || !(coupling_neighbor >= 0))
    throw std::invalid_argument("stimulation coupling must be >= 0");
  if (!(delay_base_ms >= 0) || !(delay_per_pitch_ms >= 0))
    throw std::invalid_argument("synaptic delays must be >= 0");
  if (!(sample_rate_hz > 0)) throw std::invalid_argument("sample rate must be positive");
}

void DriftParams::validate() const {
  if (!(rewire_fraction >= 0 && rewire_fraction <= 1))
    throw std::invalid_argument("rewire_fraction must be in [0, 1]");
  if (!(weight_jitter_sd >= 0)) throw std::invalid_argument("weight_jitter_sd must be >= 0");
}

double CultureModel::density() const noexcept {
  const double n = n_neurons();
  return n > 0 ? static_cast<double>(synapses.nonZeros()) / (n * n) : 0.0;
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

template <typename T>
void fnv_mix(std::uint64_t& h, const T* data, std::size_t n) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < n * sizeof(T); ++k) {
    h ^= bytes[k];
    h *= kFnvPrime;
  }
}

std::uint16_t delay_samples(const CultureParams& p, int pre, int post) {
  const auto a = channel_to_grid(pre), b = channel_to_grid(post);
  const double dr = a.row - b.row, dc = a.col - b.col;
  const double ms = p.delay_base_ms + p.delay_per_pitch_ms * std::sqrt(dr * dr + dc * dc);
  return static_cast<std::uint16_t>(std::max<long>(1, std::lround(ms * 1e-3 * p.sample_rate_hz)));
}

void assign_delays(CultureModel& m) {
  m.synapses.makeCompressed();
  m.delays.assign(static_cast<std::size_t>(m.synapses.nonZeros()), 0);
  for (int pre = 0; pre < m.synapses.outerSize(); ++pre)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m.synapses, pre); it; ++it)
      m.delays[static_cast<std::size_t>(&it.valueRef() - m.synapses.valuePtr())] =
          delay_samples(m.params, pre, static_cast<int>(it.row()));
}

double draw_efficacy(const CultureParams& p, bool excitatory, std::mt19937_64& rng) {
  std::normal_distribution<double> spread(0.0, 1.0);
  const double scale = std::max(0.0, 1.0 + p.weight_spread * spread(rng));
  const double w = std::min(p.weight_max, (excitatory ? p.weight_exc : p.weight_inh) * scale);
  return excitatory ? w : -w;
}

int kernel_radius(const CultureParams& p) {
  return static_cast<int>(std::ceil(3.0 * p.connection_sigma));
}

}  // namespace

std::uint64_t CultureModel::hash() const {
  std::uint64_t h = kFnvOffset;
  const auto nnz = static_cast<std::size_t>(synapses.nonZeros());
  fnv_mix(h, synapses.outerIndexPtr(), static_cast<std::size_t>(synapses.outerSize()) + 1);
  fnv_mix(h, synapses.innerIndexPtr(), nnz);
  fnv_mix(h, synapses.valuePtr(), nnz);
  fnv_mix(h, delays.data(), delays.size());
  fnv_mix(h, excitatory.data(), excitatory.size());
  return h;
}

CultureModel build_culture(const CultureParams& params, std::uint64_t seed) {
  params.validate();
  CultureModel m;
  m.params = params;
  m.seed = seed;
  m.day = 1;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  m.excitatory.resize(kChannels);
  for (auto& e : m.excitatory) e = unit(rng) < params.excitatory_fraction ? 1 : 0;

  const int radius = kernel_radius(params);
  const double inv_two_sigma2 = 1.0 / (2.0 * params.connection_sigma * params.connection_sigma);
  std::vector<Eigen::Triplet<double>> triplets;
  for (int pre = 0; pre < kChannels; ++pre) {
    const auto g = channel_to_grid(pre);
    for (int r = g.row - radius; r <= g.row + radius; ++r)
      for (int c = g.col - radius; c <= g.col + radius; ++c) {
        if (!on_grid(r, c) || (r == g.row && c == g.col)) continue;
        const double d2 = double(r - g.row) * (r - g.row) + double(c - g.col) * (c - g.col);
        if (unit(rng) >= params.connection_peak * std::exp(-d2 * inv_two_sigma2)) continue;
        triplets.emplace_back(grid_to_channel({r, c}), pre,
                              draw_efficacy(params, m.excitatory[pre] != 0, rng));
      }
  }
  m.synapses.resize(kChannels, kChannels);
  m.synapses.setFromTriplets(triplets.begin(), triplets.end());
  assign_delays(m);
  return m;
}

CultureModel advance_day(const CultureModel& model, const DriftParams& drift, std::uint64_t seed) {
  drift.validate();
  CultureModel next = model;
  next.day = model.day + 1;
  if (drift.rewire_fraction == 0.0 && drift.weight_jitter_sd == 0.0) return next;

  const auto& p = model.params;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int radius = kernel_radius(p);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(model.synapses.nonZeros()));
  for (int pre = 0; pre < model.synapses.outerSize(); ++pre) {
    const auto g = channel_to_grid(pre);
    std::unordered_set<int> targets;
    for (Eigen::SparseMatrix<double>::InnerIterator it(model.synapses, pre); it; ++it)
      targets.insert(static_cast<int>(it.row()));

    for (Eigen::SparseMatrix<double>::InnerIterator it(model.synapses, pre); it; ++it) {
      int post = static_cast<int>(it.row());
      double w = it.value();
      if (drift.rewire_fraction > 0.0 && unit(rng) < drift.rewire_fraction) {
        // Retarget along the same distance kernel; give up after a bounded number of draws.
        for (int attempt = 0; attempt < 64; ++attempt) {
          const int r = g.row + static_cast<int>(std::lround(p.connection_sigma * gauss(rng)));
          const int c = g.col + static_cast<int>(std::lround(p.connection_sigma * gauss(rng)));
          if (!on_grid(r, c) || std::abs(r - g.row) > radius || std::abs(c - g.col) > radius) continue;
          const int cand = grid_to_channel({r, c});
          if (cand == pre || targets.count(cand)) continue;
          targets.erase(post);
          targets.insert(cand);
          post = cand;
          break;
        }
      }
      if (drift.weight_jitter_sd > 0.0) {
        const double factor = std::max(0.0, 1.0 + drift.weight_jitter_sd * gauss(rng));
        w = std::copysign(std::min(p.weight_max, std::abs(w) * factor), w);
      }
      triplets.emplace_back(post, pre, w);
    }
  }
  next.synapses.setZero();
  next.synapses.resize(kChannels, kChannels);
  next.synapses.setFromTriplets(triplets.begin(), triplets.end());
  assign_delays(next);
  return next;
}

double weight_distance(const CultureModel& a, const CultureModel& b) {
  return (a.synapses - b.synapses).norm();
}

// ---- simulation ----------------------------------------------------------------------------

namespace {

struct StimulusPlan {
  std::int64_t onset = 0;
  std::int64_t phase_pos = 0;
  std::int64_t phase_neg = 0;
  std::vector<std::pair<int, double>> drive;  // per-sample increment during the first phase
};

StimulusPlan plan_stimulus(const CultureModel& model, const StimulusPattern& pattern,
                           std::int64_t onset) {
  pattern.pulse.validate();
  const auto& p = model.params;
  StimulusPlan plan;
  plan.onset = onset;
  plan.phase_pos = std::max<long>(1, std::lround(pattern.pulse.phase_pos_us * 1e-6 * p.sample_rate_hz));
  plan.phase_neg = std::max<long>(1, std::lround(pattern.pulse.phase_neg_us * 1e-6 * p.sample_rate_hz));

  std::vector<double> drive(kChannels, 0.0);
  auto couple = [&](int electrode, double sign) {
    const auto g = channel_to_grid(electrode);
    for (int r = g.row - 1; r <= g.row + 1; ++r)
      for (int c = g.col - 1; c <= g.col + 1; ++c) {
        if (!on_grid(r, c)) continue;
        const double k = (r == g.row && c == g.col) ? 1.0 : p.coupling_neighbor;
        drive[grid_to_channel({r, c})] += sign * k * p.coupling_gain * pattern.pulse.amplitude_ua;
      }
  };
  for (const auto& pair : pattern.pairs) {
    couple(pair.positive, +1.0);
    couple(pair.negative, -1.0);
  }
  for (int n = 0; n < kChannels; ++n)
    if (drive[n] != 0.0) plan.drive.emplace_back(n, drive[n]);
  return plan;
}

class Network {
 public:
  Network(const CultureModel& model, std::uint64_t seed)
      : model_(model), rng_(seed), v_(kChannels), last_(kChannels, 0), refractory_until_(kChannels, 0) {
    const auto& p = model.params;
    const double dt_ms = 1e3 / p.sample_rate_hz;
    decay_step_ = std::exp(-dt_ms / p.membrane.tau_ms);
    decay_.resize(4096);
    for (std::size_t k = 0; k < decay_.size(); ++k) decay_[k] = std::pow(decay_step_, static_cast<double>(k));
    refractory_steps_ = std::lround(p.membrane.refractory_ms / dt_ms);

    std::uint16_t max_delay = 1;
    for (auto d : model.delays) max_delay = std::max(max_delay, d);
    ring_.resize(std::bit_ceil(static_cast<std::size_t>(max_delay) + 1));

    // Start from a spread of sub-threshold states rather than a synchronized reset.
    std::uniform_real_distribution<double> init(p.membrane.reset,
                                                p.membrane.reset + 0.3 * (p.membrane.threshold - p.membrane.reset));
    for (auto& v : v_) v = init(rng_);
  }

  void run(std::int64_t n_steps, const StimulusPlan* stim, std::vector<std::pair<int, std::int64_t>>& spikes) {
    const auto& p = model_.params;
    const double lambda = kChannels * p.background_rate_hz / p.sample_rate_hz;
    std::poisson_distribution<int> kicks(lambda > 0 ? lambda : 1.0);
    std::uniform_int_distribution<int> which(0, kChannels - 1);
    const std::size_t mask = ring_.size() - 1;

    for (std::int64_t step = 0; step < n_steps; ++step) {
      if (lambda > 0) {
        for (int k = kicks(rng_); k > 0; --k) deliver(which(rng_), p.background_kick, step, spikes);
      }
      if (stim && step >= stim->onset && step < stim->onset + stim->phase_pos + stim->phase_neg) {
        const double sign = step < stim->onset + stim->phase_pos ? 1.0 : -1.0;
        for (const auto& [n, inc] : stim->drive) deliver(n, sign * inc, step, spikes);
      }
      auto& bucket = ring_[static_cast<std::size_t>(step) & mask];
      for (const auto& e : bucket) deliver(e.target, e.weight, step, spikes);
      bucket.clear();
    }
    for (int n = 0; n < kChannels; ++n)
      if (!std::isfinite(v_[n]))
        throw SimulationError("membrane value of neuron " + std::to_string(n) + " became non-finite");
  }

 private:
  struct Event {
    int target;
    double weight;
  };

  double decay(std::int64_t steps) const {
    return steps < static_cast<std::int64_t>(decay_.size()) ? decay_[static_cast<std::size_t>(steps)]
                                                            : std::pow(decay_step_, static_cast<double>(steps));
  }

  void deliver(int n, double input, std::int64_t step, std::vector<std::pair<int, std::int64_t>>& spikes) {
    if (step < refractory_until_[n]) return;
    const auto& m = model_.params.membrane;
    double v = v_[n] * decay(step - last_[n]) + input;
    last_[n] = step;
    if (v < m.floor) v = m.floor;
    if (v >= m.threshold) {
      spikes.emplace_back(n, step);
      v = m.reset;
      refractory_until_[n] = step + refractory_steps_;
      const auto& w = model_.synapses;
      const std::size_t mask = ring_.size() - 1;
      for (auto k = w.outerIndexPtr()[n]; k < w.outerIndexPtr()[n + 1]; ++k) {
        const auto at = static_cast<std::size_t>(step + model_.delays[static_cast<std::size_t>(k)]) & mask;
        ring_[at].push_back({w.innerIndexPtr()[k], w.valuePtr()[k]});
      }
    }
    v_[n] = v;
  }

  const CultureModel& model_;
  std::mt19937_64 rng_;
  std::vector<double> v_;
  std::vector<std::int64_t> last_;
  std::vector<std::int64_t> refractory_until_;
  std::vector<double> decay_;
  double decay_step_ = 1.0;
  std::int64_t refractory_steps_ = 0;
  std::vector<std::vector<Event>> ring_;
};

}  // namespace

TrialRecording simulate_trial(const CultureModel& model, const StimulusPattern& pattern,
                              const SimulationOptions& options, std::uint64_t seed) {
  if (!(options.pre_s >= 0) || !(options.post_s > 0))
    throw std::invalid_argument("trial window must cover the stimulus onset");
  for (const auto& pair : pattern.pairs)
    if (pair.positive < 0 || pair.positive >= kChannels || pair.negative < 0 || pair.negative >= kChannels)
      throw std::out_of_range("stimulation electrode outside the grid");

  const double fs = model.params.sample_rate_hz;
  const std::int64_t onset = std::llround(options.pre_s * fs);
  const std::int64_t n_steps = onset + std::llround(options.post_s * fs);
  const auto plan = plan_stimulus(model, pattern, onset);

  std::vector<std::pair<int, std::int64_t>> events;
  Network net(model, derive_seed(seed, {kTagTrial}));
  net.run(n_steps, &plan, events);

  TrialRecording out;
  out.spikes = SpikeTrain::from_events(kChannels, fs, -options.pre_s, n_steps, std::move(events));
  if (options.emit_trace || options.detect_from_trace) {
    auto synth = synthesize_trace(out.spikes, options.trace_noise_sd_uv, options.spike_template,
                                  derive_seed(seed, {kTagTrace}));
    if (options.detect_from_trace) out.spikes = detect_spikes(synth.recording, options.detector);
    if (options.emit_trace) out.trace = std::move(synth.recording);
  }
  return out;
}

SpikeTrain record_spontaneous(const CultureModel& model, double duration_s, std::uint64_t seed) {
  if (!(duration_s > 0)) throw std::invalid_argument("spontaneous recording duration must be positive");
  const double fs = model.params.sample_rate_hz;
  const std::int64_t n_steps = std::llround(duration_s * fs);
  std::vector<std::pair<int, std::int64_t>> events;
  Network net(model, derive_seed(seed, {kTagSpontaneous}));
  net.run(n_steps, nullptr, events);
  return SpikeTrain::from_events(kChannels, fs, 0.0, n_steps, std::move(events));
}

}  // namespace mea
