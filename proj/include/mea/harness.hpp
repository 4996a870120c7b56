#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mea/classifier.hpp"
#include "mea/config.hpp"
#include "mea/culture.hpp"
#include "mea/readout.hpp"
#include "mea/reservoir.hpp"
#include "mea/spike_train.hpp"
#include "mea/stimulus.hpp"

namespace mea {

/// One (biological replicate, day) pair, both 1-based.
struct SessionId {
  int replicate = 1;
  int day = 1;

  bool operator==(const SessionId&) const = default;
};

/// Directory-safe name, e.g. "br1_day2".
std::string session_name(SessionId id);

struct SessionSeeds {
  std::uint64_t culture = 0;  // replicate model; day drift seeds derive from it
  std::uint64_t schedule = 0;
  std::uint64_t trials = 0;  // per-trial seeds are derive_seed(trials, {k})
  std::uint64_t spontaneous = 0;
  std::uint64_t folds = 0;
};

SessionSeeds session_seeds(const ExperimentConfig& cfg, SessionId id);

/// Replicate model advanced to `id.day` (advance_day applied day - 1 times).
CultureModel culture_for(const ExperimentConfig& cfg, SessionId id);

struct SessionDataset {
  SessionId id;
  std::vector<StimulusPattern> patterns;  // indexed by digit
  StimulationSchedule schedule;
  std::vector<SpikeTrain> trials;  // one per scheduled trial, clock starts at -pre_s
  SpikeTrain spontaneous;
  std::vector<FeatureVector> features;  // at the configured primary readout
  std::string config_hash;
  std::uint64_t model_hash = 0;
  SessionSeeds seeds;
};

/// Simulate one session. When `dir` is non-empty everything is written there:
/// trials.csv, spikes.csv, spontaneous.csv, features.csv, manifest.json (and traces/ if enabled).
SessionDataset run_session(const ExperimentConfig& cfg, SessionId id, const std::filesystem::path& dir = {});
void save_session(const SessionDataset& session, const ExperimentConfig& cfg, const std::filesystem::path& dir);
/// Reads a session directory back; the stored config hash must match `cfg`.
SessionDataset load_session(const std::filesystem::path& dir, const ExperimentConfig& cfg);

/// Every replicate x day session, replicate-major. Sessions go to `root/<session_name>` when
/// `root` is non-empty.
std::vector<SessionDataset> run_grid(const ExperimentConfig& cfg, const std::filesystem::path& root = {});

/// Re-extracts features from the stored spike trains with a different readout.
std::vector<FeatureVector> session_features(const SessionDataset& session, const ReadoutParams& readout);

/// Within-session k-fold CV on the given features. Folds are seeded per session, so different
/// windows of the same session share their partition.
CVReport evaluate_session(const SessionDataset& session, std::span<const FeatureVector> features,
                          const ExperimentConfig& cfg);

struct WindowSweepRow {
  double window_ms = 0.0;
  std::vector<double> session_accuracy;  // CV mean per session, in session order
  double mean = 0.0;                     // across sessions
  double sem = 0.0;                      // sample sd / sqrt(sessions); 0 for one session
  double pooled_mean = 0.0;              // across every fold of every session
  double pooled_sem = 0.0;
};

struct WindowSweep {
  std::vector<WindowSweepRow> rows;
  std::vector<std::vector<CVReport>> reports;  // [window][session]
};

WindowSweep window_sweep(std::span<const SessionDataset> sessions, std::span<const double> windows_ms,
                         const ExperimentConfig& cfg);

struct ArBaseline {
  NoiseCalibration calibration;
  std::vector<CVReport> reports;               // one per noise seed
  std::vector<std::vector<int>> labels;        // per noise seed, per trial
  Eigen::VectorXd per_class;                   // mean over seeds
  double mean = 0.0;
  double sd = 0.0;                             // across seeds
};

/// AR features for one noise seed over a full schedule.
std::vector<FeatureVector> ar_session_features(const ExperimentConfig& cfg, const ARModel<double>& model,
                                               const NoiseCalibration& calibration, int noise_seed,
                                               double multiplier, int repetitions);
NoiseCalibration ar_calibration(const ExperimentConfig& cfg, const SpikeTrain& spontaneous);
ARModel<double> ar_model(const ExperimentConfig& cfg);

/// Cross-validated AR accuracy over `cfg.reservoir.noise_seeds` noise realisations.
ArBaseline ar_baseline(const ExperimentConfig& cfg, const SpikeTrain& spontaneous, double multiplier);

/// Rows: "BR 1".."BR R" (per-class CV accuracy averaged over that replicate's days), then "AR"
/// when given. Columns: digits 0..9.
struct AccuracyMatrix {
  std::vector<std::string> row_labels;
  Eigen::MatrixXd values;
};

AccuracyMatrix accuracy_matrix(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                               const ArBaseline* ar);

struct CrossDayResult {
  Eigen::MatrixXd accuracy;   // replicate x day; day 1 is the within-day CV mean
  Eigen::MatrixXd shuffled;   // replicate x day; NaN on day 1
  Eigen::VectorXd mean;       // per day, across replicates
  Eigen::VectorXd sd;         // per day, sample sd across replicates (0 for one replicate)
  double shuffle_mean = std::numeric_limits<double>::quiet_NaN();  // over replicates and test days
  double shuffle_sd = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd per_class;  // (days + 1) x 10; last row is the shuffled control
  std::vector<std::vector<EvalReport>> transfer;  // [replicate][test day - 2]
  std::vector<std::vector<EvalReport>> shuffled_reports;
};

/// Day-1 model per replicate evaluated on every later day, plus the spatial-shuffle control.
CrossDayResult cross_day_experiment(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                                    const ExperimentConfig& cfg);

/// Full default run into `out`: sessions, window sweep, accuracy matrix with AR row, cross-day
/// transfer, SVG figures and manifests.
struct PipelineResult {
  WindowSweep sweep;
  std::vector<CVReport> within;
  ArBaseline ar;
  AccuracyMatrix matrix;
  CrossDayResult cross_day;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// `manifest.json` for an output directory: tool version, config hash, master seed, extra fields.
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::uint64_t>>& seeds = {});

/// Report writers shared by the pipeline and the CLI.
void write_window_sweep(const WindowSweep& sweep, std::span<const SessionDataset> sessions,
                        const std::filesystem::path& dir);
void write_accuracy_matrix(const AccuracyMatrix& matrix, const std::filesystem::path& dir);
void write_cross_day(const CrossDayResult& result, const std::filesystem::path& dir);
void write_session_table(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                         const std::filesystem::path& dir);

/// Spearman rank correlation with average ranks for ties; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace mea
