#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mea/classifier.hpp"
#include "mea/culture.hpp"
#include "mea/detection.hpp"
#include "mea/readout.hpp"
#include "mea/reservoir.hpp"
#include "mea/stimulus.hpp"

namespace mea {

inline constexpr const char* kToolVersion = "1.0.0";

struct ScheduleConfig {
  int repetitions = 20;
  double isi_s = 10.0;
  // Zero derives the order seed from the master seed, replicate and day.
  std::uint64_t seed = 0;
};

struct SimulationConfig {
  double pre_s = 2.0;
  double post_s = 2.0;
  double spontaneous_s = 20.0;
  bool full_trace_path = false;  // render traces and run the detector instead of the fast path
  bool store_traces = false;     // write MEAR traces per trial (implies rendering)
  double trace_noise_sd_uv = 10.0;
  SpikeTemplate spike_template;
};

struct ReservoirConfig {
  ReservoirParams model;
  int noise_windows = 100;
  int noise_seeds = 10;
  double noise_multiplier = 1.0;
  std::vector<double> noise_sweep{0.0, 0.5, 1.0, 2.0, 4.0};
};

/// Everything a run needs. Serialised as JSON; dotted key names in the documentation map to
/// nested objects (`layout.origin` is {"layout": {"origin": [row, col]}}).
struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";  // overridden by --out; not part of the hash
  int replicates = 3;
  int days = 3;
  CultureParams culture;
  DriftParams drift;
  SimulationConfig simulation;
  DetectorParams detector;
  GlyphLayout layout;
  PulseParams pulse;
  ScheduleConfig schedule;
  ReadoutParams readout;               // primary readout (window_s) and the mask
  std::vector<double> windows_ms{5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
  TrainingParams classifier;
  int folds = 5;
  ReservoirConfig reservoir;

  void validate() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
/// Fully resolved configuration (defaults filled in) as canonical, pretty-printed JSON.
std::string config_to_json(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical JSON without `output_dir`, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mea
