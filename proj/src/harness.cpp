#include "mea/harness.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mea/io.hpp"
#include "mea/seed.hpp"
#include "mea/signal.hpp"
#include "mea/svg.hpp"

namespace mea {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t u64(int v) { return static_cast<std::uint64_t>(v); }

double mean_of(std::span<const double> v) {
  return v.empty() ? kNaN : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::int64_t trial_samples(const ExperimentConfig& cfg) {
  const double fs = cfg.culture.sample_rate_hz;
  return std::llround(cfg.simulation.pre_s * fs) + std::llround(cfg.simulation.post_s * fs);
}

std::vector<StimulusPattern> digit_patterns(const ExperimentConfig& cfg) {
  const auto arr = make_digit_patterns(cfg.layout, cfg.pulse);
  return {arr.begin(), arr.end()};
}

const SessionDataset* find_session(std::span<const SessionDataset> sessions, SessionId id) {
  for (const auto& s : sessions)
    if (s.id == id) return &s;
  return nullptr;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string csv_number(double v) { return std::isnan(v) ? std::string("nan") : format_number(v); }

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  write_text_file(path, text);
}

std::string digit_header(const std::string& first) {
  std::string h = first;
  for (int d = 0; d < kDigits; ++d) h += fmt::format(",d{}", d);
  return h;
}

}  // namespace

std::string session_name(SessionId id) { return fmt::format("br{}_day{}", id.replicate, id.day); }

SessionSeeds session_seeds(const ExperimentConfig& cfg, SessionId id) {
  const auto r = u64(id.replicate), d = u64(id.day);
  SessionSeeds s;
  s.culture = derive_seed(cfg.master_seed, {kTagReplicate, r});
  s.schedule = cfg.schedule.seed != 0 ? cfg.schedule.seed
                                      : derive_seed(cfg.master_seed, {kTagReplicate, r, kTagDay, d, kTagSchedule});
  s.trials = derive_seed(cfg.master_seed, {kTagReplicate, r, kTagDay, d, kTagTrial});
  s.spontaneous = derive_seed(cfg.master_seed, {kTagReplicate, r, kTagDay, d, kTagSpontaneous});
  s.folds = derive_seed(cfg.master_seed, {kTagReplicate, r, kTagDay, d, kTagFold});
  return s;
}

CultureModel culture_for(const ExperimentConfig& cfg, SessionId id) {
  if (id.replicate < 1 || id.day < 1) throw std::invalid_argument("replicate and day are 1-based");
  const auto seeds = session_seeds(cfg, id);
  CultureModel model = build_culture(cfg.culture, seeds.culture);
  for (int day = 2; day <= id.day; ++day)
    model = advance_day(model, cfg.drift, derive_seed(seeds.culture, {kTagDay, u64(day)}));
  return model;
}

std::vector<FeatureVector> session_features(const SessionDataset& session, const ReadoutParams& readout) {
  if (session.trials.size() != session.schedule.trials.size())
    throw std::invalid_argument("session " + session_name(session.id) + " is missing spike data");
  std::vector<FeatureVector> out;
  out.reserve(session.trials.size());
  const auto name = session_name(session.id);
  for (std::size_t k = 0; k < session.trials.size(); ++k) {
    const auto& trial = session.schedule.trials[k];
    auto fv = extract_features(session.trials[k], 0.0, readout,
                               session.patterns.at(static_cast<std::size_t>(trial.pattern)));
    fv.session = name;
    fv.trial = static_cast<int>(k);
    fv.onset_s = trial.onset_s;
    out.push_back(std::move(fv));
  }
  return out;
}

SessionDataset run_session(const ExperimentConfig& cfg, SessionId id, const fs::path& dir) {
  cfg.validate();
  if (id.replicate > cfg.replicates || id.day > cfg.days)
    throw std::invalid_argument("session " + session_name(id) + " lies outside the configured grid");
  const auto name = session_name(id);
  SessionDataset s;
  s.id = id;
  s.seeds = session_seeds(cfg, id);
  s.config_hash = config_hash(cfg);
  s.patterns = digit_patterns(cfg);
  s.schedule = build_schedule(s.patterns, cfg.schedule.repetitions, cfg.schedule.isi_s, s.seeds.schedule);

  const CultureModel model = culture_for(cfg, id);
  s.model_hash = model.hash();

  const auto& sim = cfg.simulation;
  SimulationOptions opts;
  opts.pre_s = sim.pre_s;
  opts.post_s = sim.post_s;
  opts.emit_trace = sim.store_traces && !dir.empty();
  opts.detect_from_trace = sim.full_trace_path;
  opts.trace_noise_sd_uv = sim.trace_noise_sd_uv;
  opts.spike_template = sim.spike_template;
  opts.detector = cfg.detector;
  if (opts.emit_trace) fs::create_directories(dir / "traces");

  s.trials.reserve(s.schedule.trials.size());
  for (std::size_t k = 0; k < s.schedule.trials.size(); ++k) {
    const auto& pattern = s.patterns.at(static_cast<std::size_t>(s.schedule.trials[k].pattern));
    try {
      auto rec = simulate_trial(model, pattern, opts, derive_seed(s.seeds.trials, {u64(static_cast<int>(k))}));
      if (rec.trace) write_mear(*rec.trace, dir / "traces" / fmt::format("trial_{:04}.mear", k));
      s.trials.push_back(std::move(rec.spikes));
    } catch (const SimulationError& e) {
      throw SimulationError(fmt::format("session {} trial {} (digit {}): {}", name, k, pattern.label, e.what()));
    }
  }
  try {
    s.spontaneous = record_spontaneous(model, sim.spontaneous_s, s.seeds.spontaneous);
  } catch (const SimulationError& e) {
    throw SimulationError(fmt::format("session {} spontaneous recording: {}", name, e.what()));
  }
  s.features = session_features(s, cfg.readout);
  if (!dir.empty()) save_session(s, cfg, dir);
  return s;
}

void save_session(const SessionDataset& s, const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_schedule_csv(s.schedule, s.patterns, dir / "trials.csv");
  write_trial_spikes_csv(s.trials, dir / "spikes.csv");
  write_spike_csv(s.spontaneous, dir / "spontaneous.csv");
  write_feature_csv(s.features, dir / "features.csv");
  json m;
  m["tool"] = "mea-reservoir";
  m["tool_version"] = kToolVersion;
  m["config_hash"] = s.config_hash;
  m["master_seed"] = cfg.master_seed;
  m["replicate"] = s.id.replicate;
  m["day"] = s.id.day;
  m["model_hash"] = fmt::format("{:016x}", s.model_hash);
  m["seeds"] = {{"culture", s.seeds.culture},
                {"schedule", s.seeds.schedule},
                {"trials", s.seeds.trials},
                {"spontaneous", s.seeds.spontaneous},
                {"folds", s.seeds.folds}};
  m["n_trials"] = s.trials.size();
  m["readout_window_s"] = cfg.readout.window_s;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

SessionDataset load_session(const fs::path& dir, const ExperimentConfig& cfg) {
  const json m = json::parse(read_text(dir / "manifest.json"));
  SessionDataset s;
  s.config_hash = m.at("config_hash").get<std::string>();
  if (s.config_hash != config_hash(cfg))
    throw std::invalid_argument("session " + dir.string() + " was produced with config " + s.config_hash +
                                ", not " + config_hash(cfg));
  s.id = {m.at("replicate").get<int>(), m.at("day").get<int>()};
  s.model_hash = std::stoull(m.at("model_hash").get<std::string>(), nullptr, 16);
  const auto& seeds = m.at("seeds");
  s.seeds = {seeds.at("culture"), seeds.at("schedule"), seeds.at("trials"), seeds.at("spontaneous"),
             seeds.at("folds")};
  s.patterns = digit_patterns(cfg);

  s.schedule.inter_stimulus_s = cfg.schedule.isi_s;
  s.schedule.repetitions = cfg.schedule.repetitions;
  s.schedule.seed = s.seeds.schedule;
  for (const auto& row : read_csv(dir / "trials.csv", "trial,label,onset_s")) {
    if (std::stoul(row.at(0)) != s.schedule.trials.size())
      throw std::runtime_error("trials.csv rows are not in trial order");
    s.schedule.trials.push_back({std::stoi(row.at(1)), std::stod(row.at(2))});
  }
  const double fs = cfg.culture.sample_rate_hz;
  s.trials = read_trial_spikes_csv(dir / "spikes.csv", s.schedule.trials.size(), fs, -cfg.simulation.pre_s,
                                   trial_samples(cfg));
  s.spontaneous = read_spike_csv(dir / "spontaneous.csv", fs, 0.0, std::llround(cfg.simulation.spontaneous_s * fs));
  s.features = read_feature_csv(dir / "features.csv");
  if (s.features.size() != s.trials.size()) throw std::runtime_error("features.csv does not match spikes.csv");
  for (std::size_t k = 0; k < s.features.size(); ++k) {
    const auto& trial = s.schedule.trials[k];
    auto& fv = s.features[k];
    fv.masked = stimulation_mask(s.patterns.at(static_cast<std::size_t>(trial.pattern)), cfg.readout.mask_half_width);
    fv.onset_s = trial.onset_s;
    fv.window_s = cfg.readout.window_s;
  }
  return s;
}

std::vector<SessionDataset> run_grid(const ExperimentConfig& cfg, const fs::path& root) {
  std::vector<SessionDataset> out;
  for (int r = 1; r <= cfg.replicates; ++r)
    for (int d = 1; d <= cfg.days; ++d) {
      const SessionId id{r, d};
      out.push_back(run_session(cfg, id, root.empty() ? fs::path{} : root / session_name(id)));
    }
  return out;
}

CVReport evaluate_session(const SessionDataset& session, std::span<const FeatureVector> features,
                          const ExperimentConfig& cfg) {
  return cross_validate(make_labeled_set(features), cfg.folds, cfg.classifier, session.seeds.folds);
}

WindowSweep window_sweep(std::span<const SessionDataset> sessions, std::span<const double> windows_ms,
                         const ExperimentConfig& cfg) {
  if (sessions.empty()) throw std::invalid_argument("window sweep needs at least one session");
  if (windows_ms.empty()) throw std::invalid_argument("window sweep needs at least one window");
  WindowSweep out;
  for (double w : windows_ms) {
    ReadoutParams readout = cfg.readout;
    readout.window_s = w * 1e-3;
    WindowSweepRow row;
    row.window_ms = w;
    std::vector<CVReport> reports;
    std::vector<double> folds;
    for (const auto& s : sessions) {
      const auto fv = session_features(s, readout);
      auto rep = evaluate_session(s, fv, cfg);
      row.session_accuracy.push_back(rep.mean);
      folds.insert(folds.end(), rep.fold_accuracy.begin(), rep.fold_accuracy.end());
      reports.push_back(std::move(rep));
    }
    row.mean = mean_of(row.session_accuracy);
    row.sem = sample_sd(row.session_accuracy) / std::sqrt(static_cast<double>(row.session_accuracy.size()));
    row.pooled_mean = mean_of(folds);
    row.pooled_sem = sample_sd(folds) / std::sqrt(static_cast<double>(folds.size()));
    out.rows.push_back(std::move(row));
    out.reports.push_back(std::move(reports));
  }
  return out;
}

ARModel<double> ar_model(const ExperimentConfig& cfg) {
  return build_reservoir<double>(cfg.reservoir.model, derive_seed(cfg.master_seed, {kTagReservoir}));
}

NoiseCalibration ar_calibration(const ExperimentConfig& cfg, const SpikeTrain& spontaneous) {
  return calibrate_noise(spontaneous, cfg.readout.window_s, cfg.reservoir.noise_windows,
                         derive_seed(cfg.master_seed, {kTagCalibration}));
}

std::vector<FeatureVector> ar_session_features(const ExperimentConfig& cfg, const ARModel<double>& model,
                                               const NoiseCalibration& calibration, int noise_seed,
                                               double multiplier, int repetitions) {
  const auto patterns = digit_patterns(cfg);
  const auto s = u64(noise_seed);
  const auto schedule = build_schedule(patterns, repetitions, cfg.schedule.isi_s,
                                       derive_seed(cfg.master_seed, {kTagReservoir, kTagSchedule, s}));
  std::vector<FeatureVector> out;
  out.reserve(schedule.trials.size());
  for (std::size_t k = 0; k < schedule.trials.size(); ++k) {
    const auto& trial = schedule.trials[k];
    auto fv = ar_forward(model, patterns.at(static_cast<std::size_t>(trial.pattern)), calibration, cfg.readout,
                         derive_seed(cfg.master_seed, {kTagNoise, s, u64(static_cast<int>(k))}), multiplier);
    fv.session = fmt::format("ar_seed{}", noise_seed);
    fv.trial = static_cast<int>(k);
    fv.onset_s = trial.onset_s;
    out.push_back(std::move(fv));
  }
  return out;
}

ArBaseline ar_baseline(const ExperimentConfig& cfg, const SpikeTrain& spontaneous, double multiplier) {
  ArBaseline out;
  const auto model = ar_model(cfg);
  out.calibration = ar_calibration(cfg, spontaneous);
  out.per_class = Eigen::VectorXd::Zero(kDigits);
  std::vector<double> means;
  for (int s = 0; s < cfg.reservoir.noise_seeds; ++s) {
    const auto fv = ar_session_features(cfg, model, out.calibration, s, multiplier, cfg.schedule.repetitions);
    std::vector<int> labels;
    for (const auto& f : fv) labels.push_back(f.label);
    auto rep = cross_validate(make_labeled_set(fv), cfg.folds, cfg.classifier,
                              derive_seed(cfg.master_seed, {kTagReservoir, kTagFold, u64(s)}));
    means.push_back(rep.mean);
    out.per_class += rep.per_class;
    out.reports.push_back(std::move(rep));
    out.labels.push_back(std::move(labels));
  }
  out.per_class /= static_cast<double>(cfg.reservoir.noise_seeds);
  out.mean = mean_of(means);
  out.sd = sample_sd(means);
  return out;
}

AccuracyMatrix accuracy_matrix(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                               const ArBaseline* ar) {
  if (sessions.size() != within.size()) throw std::invalid_argument("one CV report per session is required");
  std::map<int, std::pair<Eigen::VectorXd, int>> by_replicate;
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    auto [it, fresh] = by_replicate.try_emplace(sessions[k].id.replicate, Eigen::VectorXd::Zero(kDigits), 0);
    it->second.first += within[k].per_class;
    ++it->second.second;
  }
  AccuracyMatrix m;
  const auto rows = static_cast<Eigen::Index>(by_replicate.size() + (ar ? 1 : 0));
  m.values.resize(rows, kDigits);
  Eigen::Index i = 0;
  for (const auto& [rep, acc] : by_replicate) {
    m.row_labels.push_back(fmt::format("BR {}", rep));
    m.values.row(i++) = (acc.first / acc.second).transpose();
  }
  if (ar) {
    m.row_labels.emplace_back("AR");
    m.values.row(i) = ar->per_class.transpose();
  }
  return m;
}

CrossDayResult cross_day_experiment(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                                    const ExperimentConfig& cfg) {
  if (sessions.size() != within.size()) throw std::invalid_argument("one CV report per session is required");
  const int R = cfg.replicates, D = cfg.days;
  CrossDayResult out;
  out.accuracy = Eigen::MatrixXd::Constant(R, D, kNaN);
  out.shuffled = Eigen::MatrixXd::Constant(R, D, kNaN);
  out.per_class = Eigen::MatrixXd::Zero(D + 1, kDigits);
  std::vector<double> shuffle_all;

  for (int r = 1; r <= R; ++r) {
    std::vector<std::vector<FeatureVector>> tests;
    const SessionDataset* day1 = nullptr;
    for (int d = 1; d <= D; ++d) {
      const auto* s = find_session(sessions, {r, d});
      if (!s) throw std::invalid_argument("missing session " + session_name({r, d}));
      const auto idx = static_cast<std::size_t>(s - sessions.data());
      if (d == 1) {
        day1 = s;
        out.accuracy(r - 1, 0) = within[idx].mean;
        out.per_class.row(0) += within[idx].per_class.transpose();
      } else {
        tests.push_back(s->features);
      }
    }
    TrainingParams hp = cfg.classifier;
    hp.seed = derive_seed(cfg.master_seed, {kTagTraining, u64(r)});
    auto rep = cross_session_eval(day1->features, tests, hp, derive_seed(cfg.master_seed, {kTagShuffle, u64(r)}));
    for (int d = 2; d <= D; ++d) {
      const auto& t = rep.sessions[static_cast<std::size_t>(d - 2)];
      const auto& sh = rep.shuffled[static_cast<std::size_t>(d - 2)];
      out.accuracy(r - 1, d - 1) = t.accuracy;
      out.shuffled(r - 1, d - 1) = sh.accuracy;
      out.per_class.row(d - 1) += t.per_class.transpose();
      out.per_class.row(D) += sh.per_class.transpose();
      shuffle_all.push_back(sh.accuracy);
    }
    out.transfer.push_back(std::move(rep.sessions));
    out.shuffled_reports.push_back(std::move(rep.shuffled));
  }

  out.per_class.topRows(D) /= static_cast<double>(R);
  if (D > 1)
    out.per_class.row(D) /= static_cast<double>(R * (D - 1));
  else
    out.per_class.row(D).setConstant(kNaN);
  out.mean.resize(D);
  out.sd.resize(D);
  for (int d = 0; d < D; ++d) {
    std::vector<double> col(out.accuracy.col(d).data(), out.accuracy.col(d).data() + R);
    out.mean[d] = mean_of(col);
    out.sd[d] = sample_sd(col);
  }
  if (!shuffle_all.empty()) {
    out.shuffle_mean = mean_of(shuffle_all);
    out.shuffle_sd = sample_sd(shuffle_all);
  }
  return out;
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::uint64_t>>& seeds) {
  fs::create_directories(dir);
  json m;
  m["tool"] = "mea-reservoir";
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg);
  m["master_seed"] = cfg.master_seed;
  json s = json::object();
  for (const auto& [k, v] : seeds) s[k] = v;
  m["seeds"] = s;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

void write_window_sweep(const WindowSweep& sweep, std::span<const SessionDataset> sessions, const fs::path& dir) {
  fs::create_directories(dir);
  std::string header = "window_ms,mean,sem,pooled_mean,pooled_sem,n_sessions";
  for (const auto& s : sessions) header += "," + session_name(s.id);
  std::vector<std::string> lines{header};
  Series per_session{"session mean ± SEM", {}, {}, {}};
  Series pooled{"pooled folds ± SEM", {}, {}, {}};
  for (const auto& row : sweep.rows) {
    std::string line = fmt::format("{},{},{},{},{},{}", csv_number(row.window_ms), csv_number(row.mean),
                                   csv_number(row.sem), csv_number(row.pooled_mean), csv_number(row.pooled_sem),
                                   row.session_accuracy.size());
    for (double a : row.session_accuracy) line += "," + csv_number(a);
    lines.push_back(std::move(line));
    per_session.x.push_back(row.window_ms);
    per_session.y.push_back(row.mean);
    per_session.err.push_back(row.sem);
    pooled.x.push_back(row.window_ms);
    pooled.y.push_back(row.pooled_mean);
    pooled.err.push_back(row.pooled_sem);
  }
  write_lines(dir / "window_sweep.csv", lines);
  LinePlot plot{"Accuracy vs readout window", "W (ms)", "accuracy", {per_session, pooled}, 0.0, 1.0};
  write_text_file(dir / "window_sweep.svg", render_line_plot(plot));
}

void write_accuracy_matrix(const AccuracyMatrix& matrix, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> lines{digit_header("row") + ",mean"};
  for (Eigen::Index i = 0; i < matrix.values.rows(); ++i) {
    std::string line = csv_field(matrix.row_labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < matrix.values.cols(); ++j) line += "," + csv_number(matrix.values(i, j));
    line += "," + csv_number(matrix.values.row(i).mean());
    lines.push_back(std::move(line));
  }
  write_lines(dir / "accuracy_matrix.csv", lines);
  Heatmap map;
  map.title = "Per-category accuracy";
  map.row_labels = matrix.row_labels;
  for (int d = 0; d < kDigits; ++d) map.col_labels.push_back(std::to_string(d));
  map.values = matrix.values;
  write_text_file(dir / "accuracy_matrix.svg", render_heatmap(map));
}

void write_cross_day(const CrossDayResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  const auto R = r.accuracy.rows(), D = r.accuracy.cols();
  std::vector<std::string> lines{"replicate,day,accuracy,shuffled"};
  for (Eigen::Index i = 0; i < R; ++i)
    for (Eigen::Index d = 0; d < D; ++d)
      lines.push_back(fmt::format("{},{},{},{}", i + 1, d + 1, csv_number(r.accuracy(i, d)),
                                  csv_number(r.shuffled(i, d))));
  write_lines(dir / "cross_day.csv", lines);

  lines = {"row,mean,sd"};
  for (Eigen::Index d = 0; d < D; ++d)
    lines.push_back(fmt::format("day{},{},{}", d + 1, csv_number(r.mean[d]), csv_number(r.sd[d])));
  lines.push_back(fmt::format("shuffled,{},{}", csv_number(r.shuffle_mean), csv_number(r.shuffle_sd)));
  write_lines(dir / "cross_day_summary.csv", lines);

  Heatmap map;
  map.title = "Day-1 classifier across days";
  lines = {digit_header("row")};
  for (Eigen::Index d = 0; d <= D; ++d) {
    const std::string label = d < D ? fmt::format("Day {}", d + 1) : std::string("Shuffled");
    map.row_labels.push_back(label);
    std::string line = label;
    for (int c = 0; c < kDigits; ++c) line += "," + csv_number(r.per_class(d, c));
    lines.push_back(std::move(line));
  }
  write_lines(dir / "cross_day_per_class.csv", lines);
  for (int d = 0; d < kDigits; ++d) map.col_labels.push_back(std::to_string(d));
  map.values = r.per_class;
  write_text_file(dir / "cross_day.svg", render_heatmap(map));
}

void write_session_table(std::span<const SessionDataset> sessions, std::span<const CVReport> within,
                         const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> lines{"replicate,day,accuracy,fold_sd"};
  std::map<int, std::vector<double>> by_day;
  for (std::size_t k = 0; k < sessions.size(); ++k) {
    lines.push_back(fmt::format("{},{},{},{}", sessions[k].id.replicate, sessions[k].id.day,
                                csv_number(within[k].mean), csv_number(within[k].sd)));
    by_day[sessions[k].id.day].push_back(within[k].mean);
  }
  write_lines(dir / "session_accuracy.csv", lines);
  lines = {"day,mean,sd,n_replicates"};
  for (const auto& [day, acc] : by_day)
    lines.push_back(fmt::format("{},{},{},{}", day, csv_number(mean_of(acc)), csv_number(sample_sd(acc)),
                                acc.size()));
  write_lines(dir / "session_summary.csv", lines);
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  write_text_file(out / "config.json", config_to_json(cfg));

  const auto sessions = run_grid(cfg, out / "sessions");
  PipelineResult res;
  res.sweep = window_sweep(sessions, cfg.windows_ms, cfg);

  const auto primary = std::find_if(cfg.windows_ms.begin(), cfg.windows_ms.end(), [&](double w) {
    return std::abs(w * 1e-3 - cfg.readout.window_s) < 1e-12;
  });
  if (primary != cfg.windows_ms.end()) {
    res.within = res.sweep.reports[static_cast<std::size_t>(primary - cfg.windows_ms.begin())];
  } else {
    for (const auto& s : sessions) res.within.push_back(evaluate_session(s, s.features, cfg));
  }

  res.ar = ar_baseline(cfg, sessions.front().spontaneous, cfg.reservoir.noise_multiplier);
  res.matrix = accuracy_matrix(sessions, res.within, &res.ar);
  res.cross_day = cross_day_experiment(sessions, res.within, cfg);

  const auto reports = out / "reports";
  write_window_sweep(res.sweep, sessions, reports);
  write_session_table(sessions, res.within, reports);
  write_accuracy_matrix(res.matrix, reports);
  write_cross_day(res.cross_day, reports);

  std::vector<std::string> lines{"source,window_ms,trial,label,fold,predicted"};
  for (std::size_t w = 0; w < res.sweep.rows.size(); ++w)
    for (std::size_t k = 0; k < sessions.size(); ++k) {
      const auto& rep = res.sweep.reports[w][k];
      const auto name = session_name(sessions[k].id);
      for (std::size_t t = 0; t < rep.predicted.size(); ++t)
        lines.push_back(fmt::format("{},{},{},{},{},{}", name, csv_number(res.sweep.rows[w].window_ms), t,
                                    sessions[k].schedule.trials[t].pattern, rep.fold_of[t], rep.predicted[t]));
    }
  for (std::size_t s = 0; s < res.ar.reports.size(); ++s) {
    const auto& rep = res.ar.reports[s];
    for (std::size_t t = 0; t < rep.predicted.size(); ++t)
      lines.push_back(fmt::format("ar_seed{},{},{},{},{},{}", s, csv_number(cfg.readout.window_s * 1e3), t,
                                  res.ar.labels[s][t], rep.fold_of[t], rep.predicted[t]));
  }
  write_lines(reports / "predictions.csv", lines);

  lines = {"seed,accuracy,sd"};
  for (std::size_t s = 0; s < res.ar.reports.size(); ++s)
    lines.push_back(fmt::format("{},{},{}", s, csv_number(res.ar.reports[s].mean), csv_number(res.ar.reports[s].sd)));
  write_lines(reports / "ar_baseline.csv", lines);

  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  for (const auto& s : sessions) {
    const auto name = session_name(s.id);
    seeds.emplace_back(name + ".culture", s.seeds.culture);
    seeds.emplace_back(name + ".schedule", s.seeds.schedule);
    seeds.emplace_back(name + ".trials", s.seeds.trials);
  }
  seeds.emplace_back("reservoir", derive_seed(cfg.master_seed, {kTagReservoir}));
  seeds.emplace_back("calibration", derive_seed(cfg.master_seed, {kTagCalibration}));
  write_manifest(out, cfg, "report", seeds);
  write_manifest(reports, cfg, "report");
  return res;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman needs equal-length samples");
  const auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = mean_of(rx), my = mean_of(ry);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace mea
