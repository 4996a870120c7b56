#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mea/detection.hpp"
#include "mea/grid.hpp"
#include "mea/signal.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace mea {

struct MembraneParams {
  double tau_ms = 20.0;
  double threshold = 1.0;
  double reset = 0.0;
  double refractory_ms = 2.0;
  double floor = -1.0;  // lower clamp on the membrane value
};

/// Leaky integrate-and-fire culture on the electrode grid, one neuron per electrode.
/// Membrane values are in units of the firing threshold.
struct CultureParams {
  // Connectivity: p(d) = connection_peak * exp(-d^2 / (2 sigma^2)), d in electrode pitches.
  double connection_peak = 0.3;
  double connection_sigma = 4.0;
  double excitatory_fraction = 0.8;
  double weight_exc = 0.16;
  double weight_inh = 1.0;      // magnitude of inhibitory efficacies
  double weight_spread = 0.25;  // relative sd of initial efficacies
  double weight_max = 1.5;
  MembraneParams membrane;
  // Spontaneous drive: independent Poisson kicks per neuron.
  double background_rate_hz = 10.0;
  double background_kick = 0.6;
  // Stimulation: membrane increment per sample per uA, at the electrode and its 8 neighbours.
  double coupling_gain = 0.5;
  double coupling_neighbor = 0.6;
  double delay_base_ms = 0.5;
  double delay_per_pitch_ms = 0.1;
  double sample_rate_hz = kDefaultSampleRateHz;

  void validate() const;
};

struct DriftParams {
  double rewire_fraction = 0.2;   // per day
  double weight_jitter_sd = 0.1;  // relative, per day

  void validate() const;
};

/// Value-like culture: copying yields an independent model.
struct CultureModel {
  CultureParams params;
  Eigen::SparseMatrix<double> synapses;  // rows: postsynaptic, columns: presynaptic
  std::vector<std::uint16_t> delays;     // samples, aligned with synapses' stored values
  std::vector<std::uint8_t> excitatory;  // per neuron
  std::uint64_t seed = 0;
  int day = 1;

  [[nodiscard]] int n_neurons() const noexcept { return static_cast<int>(synapses.cols()); }
  [[nodiscard]] double density() const noexcept;
  /// FNV-1a over connectivity, efficacies, delays and cell types.
  [[nodiscard]] std::uint64_t hash() const;
};

CultureModel build_culture(const CultureParams& params, std::uint64_t seed);

/// A new model with `rewire_fraction` of synapses moved to fresh distance-drawn targets and
/// multiplicative Gaussian jitter on every efficacy (signs preserved). The input is not touched.
CultureModel advance_day(const CultureModel& model, const DriftParams& drift, std::uint64_t seed);

/// Frobenius norm of the difference of two synapse matrices.
double weight_distance(const CultureModel& a, const CultureModel& b);

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulationOptions {
  double pre_s = 2.0;
  double post_s = 2.0;
  bool emit_trace = false;         // return the synthesized raw trace
  bool detect_from_trace = false;  // spike train comes from the detector run on the trace
  double trace_noise_sd_uv = 10.0;
  SpikeTemplate spike_template;
  DetectorParams detector;
};

struct TrialRecording {
  SpikeTrain spikes;
  std::optional<RawRecording> trace;
};

/// Simulate [-pre_s, +post_s] around a stimulus delivered at t = 0 with one step per sample.
/// Spike sample indices count from the start of the window (t0_offset = -pre_s).
TrialRecording simulate_trial(const CultureModel& model, const StimulusPattern& pattern,
                              const SimulationOptions& options, std::uint64_t seed);

/// Stimulus-free activity starting at t = 0.
SpikeTrain record_spontaneous(const CultureModel& model, double duration_s, std::uint64_t seed);

}  // namespace mea
