#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mea/classifier.hpp"
#include "mea/config.hpp"
#include "mea/detection.hpp"
#include "mea/harness.hpp"
#include "mea/io.hpp"
#include "mea/seed.hpp"
#include "mea/signal.hpp"
#include "mea/svg.hpp"

namespace fs = std::filesystem;
using namespace mea;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.seed) cfg.master_seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const ExperimentConfig& cfg) {
  const fs::path out = cfg.output_dir;
  fs::create_directories(out);
  write_text_file(out / "config.json", config_to_json(cfg));
  return out;
}

std::vector<SessionId> selected_sessions(const ExperimentConfig& cfg, int replicate, int day) {
  std::vector<SessionId> ids;
  for (int r = 1; r <= cfg.replicates; ++r)
    for (int d = 1; d <= cfg.days; ++d)
      if ((replicate == 0 || r == replicate) && (day == 0 || d == day)) ids.push_back({r, d});
  if (ids.empty()) throw std::invalid_argument("no session matches the requested replicate/day");
  return ids;
}

/// Sessions under `dir` when given, otherwise a fresh grid simulated into out/sessions.
std::vector<SessionDataset> obtain_sessions(const ExperimentConfig& cfg, const std::string& dir, const fs::path& out) {
  if (dir.empty()) {
    fmt::print("simulating {} x {} sessions into {}\n", cfg.replicates, cfg.days, (out / "sessions").string());
    return run_grid(cfg, out / "sessions");
  }
  std::vector<SessionDataset> sessions;
  for (int r = 1; r <= cfg.replicates; ++r)
    for (int d = 1; d <= cfg.days; ++d) sessions.push_back(load_session(fs::path(dir) / session_name({r, d}), cfg));
  return sessions;
}

std::vector<FeatureVector> load_features(const std::vector<std::string>& paths) {
  std::vector<FeatureVector> all;
  for (const auto& p : paths) {
    auto v = read_feature_csv(p);
    all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  if (all.empty()) throw std::invalid_argument("no feature rows were read");
  return all;
}

void write_eval(const std::vector<std::pair<std::string, EvalReport>>& reports, const fs::path& out,
                const std::string& title) {
  std::string summary = "source,n,accuracy\n";
  std::string per_class = "source";
  for (int d = 0; d < kDigits; ++d) per_class += fmt::format(",d{}", d);
  per_class += "\n";
  std::string confusion = "source,label";
  for (int d = 0; d < kDigits; ++d) confusion += fmt::format(",p{}", d);
  confusion += "\n";
  Heatmap map;
  map.title = title;
  for (int d = 0; d < kDigits; ++d) map.col_labels.push_back(std::to_string(d));
  map.values.resize(static_cast<Eigen::Index>(reports.size()), kDigits);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& [name, r] = reports[i];
    summary += fmt::format("{},{},{}\n", csv_field(name), r.n, format_number(r.accuracy));
    per_class += csv_field(name);
    for (int d = 0; d < kDigits; ++d)
      per_class += "," + (std::isnan(r.per_class[d]) ? std::string("nan") : format_number(r.per_class[d]));
    per_class += "\n";
    for (int y = 0; y < kDigits; ++y) {
      confusion += fmt::format("{},{}", csv_field(name), y);
      for (int p = 0; p < kDigits; ++p) confusion += fmt::format(",{}", r.confusion(y, p));
      confusion += "\n";
    }
    map.row_labels.push_back(name);
    map.values.row(static_cast<Eigen::Index>(i)) = r.per_class.transpose();
  }
  write_text_file(out / "eval.csv", summary);
  write_text_file(out / "eval_per_class.csv", per_class);
  write_text_file(out / "confusion.csv", confusion);
  write_text_file(out / "eval_per_class.svg", render_heatmap(map));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reservoir-computing experiments on a simulated high-density electrode array"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--config", common.config_path, "JSON configuration (defaults when omitted)")->check(CLI::ExistingFile);
  app.add_option("--seed", common.seed, "Override the master seed");
  app.add_option("--out", common.out, "Output directory (overrides output_dir)");

  // simulate
  int sim_replicate = 0, sim_day = 0;
  auto* simulate = app.add_subcommand("simulate", "Simulate sessions: trials, spike CSVs, features, manifests");
  simulate->add_option("--replicate", sim_replicate, "Only this replicate (1-based, 0 = all)");
  simulate->add_option("--day", sim_day, "Only this day (1-based, 0 = all)");

  // detect
  std::string detect_in, detect_spikes_out;
  auto* detect = app.add_subcommand("detect", "Double-threshold spike detection on a MEAR recording");
  detect->add_option("--in", detect_in, "MEAR recording")->required()->check(CLI::ExistingFile);
  detect->add_option("--spikes", detect_spikes_out, "Output CSV (default <out>/spikes.csv)");

  // schedule
  int sch_replicate = 1, sch_day = 1;
  auto* schedule = app.add_subcommand("schedule", "Write the randomized trial list of one session");
  schedule->add_option("--replicate", sch_replicate, "Replicate whose derived seed is used");
  schedule->add_option("--day", sch_day, "Day whose derived seed is used");

  // extract
  std::string extract_session;
  std::optional<double> extract_window_ms;
  auto* extract = app.add_subcommand("extract", "Spike CSVs of a session directory to a feature CSV");
  extract->add_option("--session", extract_session, "Session directory with trials.csv and spikes.csv")
      ->required()
      ->check(CLI::ExistingDirectory);
  extract->add_option("--window-ms", extract_window_ms, "Readout window (default readout.window_s)");

  // train
  std::vector<std::string> train_features;
  auto* train = app.add_subcommand("train", "Fit the single-layer readout on feature CSVs");
  train->add_option("--features", train_features, "Feature CSV(s)")->required()->check(CLI::ExistingFile);

  // eval
  std::vector<std::string> eval_features;
  std::string eval_model;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model, or cross-validate when no model is given");
  eval->add_option("--features", eval_features, "Feature CSV(s), one report row each")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--model", eval_model, "SLPM model file")->check(CLI::ExistingFile);

  // sweep-window / cross-day
  std::string sweep_sessions, xday_sessions;
  auto* sweep = app.add_subcommand("sweep-window", "Accuracy versus readout window over the session grid");
  sweep->add_option("--sessions", sweep_sessions, "Directory of existing sessions (simulated when omitted)")
      ->check(CLI::ExistingDirectory);
  auto* xday = app.add_subcommand("cross-day", "Day-1 classifier on later days with the shuffle control");
  xday->add_option("--sessions", xday_sessions, "Directory of existing sessions (simulated when omitted)")
      ->check(CLI::ExistingDirectory);

  // ar-baseline
  std::string ar_spont;
  std::optional<double> ar_multiplier;
  bool ar_sweep = false;
  auto* ar = app.add_subcommand("ar-baseline", "Artificial reservoir features and cross-validated accuracy");
  ar->add_option("--spontaneous", ar_spont, "Spontaneous spike CSV for noise calibration (simulated when omitted)")
      ->check(CLI::ExistingFile);
  ar->add_option("--multiplier", ar_multiplier, "Noise multiplier (default reservoir.noise_multiplier)");
  ar->add_flag("--sweep", ar_sweep, "Also sweep the multiplier over reservoir.noise_sweep");

  // report
  auto* report = app.add_subcommand("report", "Full pipeline: sessions, all reports and figures");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig cfg = resolve(common);
    const fs::path out = prepare_out(cfg);

    if (simulate->parsed()) {
      for (const auto id : selected_sessions(cfg, sim_replicate, sim_day)) {
        const auto dir = out / session_name(id);
        const auto s = run_session(cfg, id, dir);
        std::size_t spikes = 0;
        for (const auto& t : s.trials) spikes += t.total_spikes();
        fmt::print("{}: {} trials, {} spikes, model {:016x} -> {}\n", session_name(id), s.trials.size(), spikes,
                   s.model_hash, dir.string());
      }
      write_manifest(out, cfg, "simulate");
    } else if (detect->parsed()) {
      const auto rec = read_mear(detect_in);
      const auto train_out = detect_spikes(rec, cfg.detector);
      const fs::path path = detect_spikes_out.empty() ? out / "spikes.csv" : fs::path(detect_spikes_out);
      write_spike_csv(train_out, path);
      write_manifest(out, cfg, "detect");
      fmt::print("{} spikes on {} channels -> {}\n", train_out.total_spikes(), train_out.n_channels(), path.string());
    } else if (schedule->parsed()) {
      const auto arr = make_digit_patterns(cfg.layout, cfg.pulse);
      const auto seeds = session_seeds(cfg, {sch_replicate, sch_day});
      const auto sch = build_schedule(arr, cfg.schedule.repetitions, cfg.schedule.isi_s, seeds.schedule);
      write_schedule_csv(sch, arr, out / "schedule.csv");
      write_manifest(out, cfg, "schedule", {{"schedule", seeds.schedule}});
      fmt::print("{} trials -> {}\n", sch.trials.size(), (out / "schedule.csv").string());
    } else if (extract->parsed()) {
      ReadoutParams readout = cfg.readout;
      if (extract_window_ms) readout.window_s = *extract_window_ms * 1e-3;
      readout.validate();
      const fs::path dir = extract_session;
      const auto arr = make_digit_patterns(cfg.layout, cfg.pulse);
      std::vector<int> labels;
      for (const auto& row : read_csv(dir / "trials.csv", "trial,label,onset_s")) labels.push_back(std::stoi(row.at(1)));
      const double fs_hz = cfg.culture.sample_rate_hz;
      const auto n_samples =
          std::llround(cfg.simulation.pre_s * fs_hz) + std::llround(cfg.simulation.post_s * fs_hz);
      const auto trials = read_trial_spikes_csv(dir / "spikes.csv", labels.size(), fs_hz, -cfg.simulation.pre_s,
                                                n_samples);
      std::vector<FeatureVector> fv;
      for (std::size_t k = 0; k < trials.size(); ++k) {
        fv.push_back(extract_features(trials[k], 0.0, readout, arr.at(static_cast<std::size_t>(labels[k]))));
        fv.back().session = dir.filename().string();
        fv.back().trial = static_cast<int>(k);
      }
      write_feature_csv(fv, out / "features.csv");
      write_manifest(out, cfg, "extract");
      fmt::print("{} feature rows (W = {} ms) -> {}\n", fv.size(), readout.window_s * 1e3,
                 (out / "features.csv").string());
    } else if (train->parsed()) {
      const auto fv = load_features(train_features);
      const auto set = make_labeled_set(fv);
      TrainingParams hp = cfg.classifier;
      hp.seed = derive_seed(cfg.master_seed, {kTagTraining});
      Standardizer s;
      auto model = fit_model(set, hp, &s);
      if (hp.standardize) model = fold_standardizer(model, s);
      save_slp(model, out / "model.slpm");
      const auto r = evaluate(model, set);
      write_eval({{"training", r}}, out, "Training accuracy per category");
      write_manifest(out, cfg, "train", {{"training", hp.seed}});
      fmt::print("trained on {} rows, training accuracy {:.3f} -> {}\n", set.size(), r.accuracy,
                 (out / "model.slpm").string());
    } else if (eval->parsed()) {
      std::vector<std::pair<std::string, EvalReport>> reports;
      if (!eval_model.empty()) {
        const auto model = load_slp(eval_model);
        for (const auto& p : eval_features) {
          const auto fv = read_feature_csv(p);
          reports.emplace_back(fs::path(p).filename().string(), evaluate(model, make_labeled_set(fv)));
        }
      } else {
        std::string folds = "source,fold,accuracy\n";
        for (std::size_t i = 0; i < eval_features.size(); ++i) {
          const auto fv = read_feature_csv(eval_features[i]);
          const auto cv = cross_validate(make_labeled_set(fv), cfg.folds, cfg.classifier,
                                         derive_seed(cfg.master_seed, {kTagFold, i}));
          const auto name = fs::path(eval_features[i]).filename().string();
          for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f)
            folds += fmt::format("{},{},{}\n", csv_field(name), f, format_number(cv.fold_accuracy[f]));
          EvalReport r;
          r.accuracy = cv.mean;
          r.per_class = cv.per_class;
          r.confusion = cv.confusion;
          r.n = static_cast<int>(fv.size());
          reports.emplace_back(name, r);
          fmt::print("{}: {}-fold CV accuracy {:.3f} ± {:.3f}\n", name, cfg.folds, cv.mean, cv.sd);
        }
        write_text_file(out / "cv_folds.csv", folds);
      }
      write_eval(reports, out, "Accuracy per category");
      write_manifest(out, cfg, "eval");
      for (const auto& [name, r] : reports) fmt::print("{}: accuracy {:.3f} on {} rows\n", name, r.accuracy, r.n);
    } else if (sweep->parsed()) {
      const auto sessions = obtain_sessions(cfg, sweep_sessions, out);
      const auto result = window_sweep(sessions, cfg.windows_ms, cfg);
      write_window_sweep(result, sessions, out);
      write_manifest(out, cfg, "sweep-window");
      for (const auto& row : result.rows)
        fmt::print("W = {:>4} ms: {:.3f} ± {:.3f} (SEM, n = {})\n", row.window_ms, row.mean, row.sem,
                   row.session_accuracy.size());
    } else if (xday->parsed()) {
      const auto sessions = obtain_sessions(cfg, xday_sessions, out);
      std::vector<CVReport> within;
      for (const auto& s : sessions) within.push_back(evaluate_session(s, s.features, cfg));
      const auto result = cross_day_experiment(sessions, within, cfg);
      write_cross_day(result, out);
      write_session_table(sessions, within, out);
      write_manifest(out, cfg, "cross-day");
      for (Eigen::Index d = 0; d < result.mean.size(); ++d)
        fmt::print("day {}: {:.3f} ± {:.3f}\n", d + 1, result.mean[d], result.sd[d]);
      fmt::print("shuffled: {:.3f} ± {:.3f}\n", result.shuffle_mean, result.shuffle_sd);
    } else if (ar->parsed()) {
      SpikeTrain spont;
      if (ar_spont.empty()) {
        const SessionId first{1, 1};
        spont = record_spontaneous(culture_for(cfg, first), cfg.simulation.spontaneous_s,
                                   session_seeds(cfg, first).spontaneous);
      } else {
        const double fs_hz = cfg.culture.sample_rate_hz;
        spont = read_spike_csv(ar_spont, fs_hz, 0.0, std::llround(cfg.simulation.spontaneous_s * fs_hz));
      }
      const double mult = ar_multiplier.value_or(cfg.reservoir.noise_multiplier);
      const auto model = ar_model(cfg);
      const auto cal = ar_calibration(cfg, spont);
      std::string summary = "seed,multiplier,accuracy,sd\n";
      for (int s = 0; s < cfg.reservoir.noise_seeds; ++s) {
        const auto fv = ar_session_features(cfg, model, cal, s, mult, cfg.schedule.repetitions);
        write_feature_csv(fv, out / fmt::format("ar_features_seed{}.csv", s));
        const auto cv = cross_validate(make_labeled_set(fv), cfg.folds, cfg.classifier,
                                       derive_seed(cfg.master_seed, {kTagReservoir, kTagFold, static_cast<std::uint64_t>(s)}));
        summary += fmt::format("{},{},{},{}\n", s, format_number(mult), format_number(cv.mean), format_number(cv.sd));
        fmt::print("noise seed {}: CV accuracy {:.3f}\n", s, cv.mean);
      }
      write_text_file(out / "ar_baseline.csv", summary);
      if (ar_sweep) {
        std::string lines = "multiplier,seed,accuracy\n";
        Series series{"AR", {}, {}, {}};
        for (double m : cfg.reservoir.noise_sweep) {
          double total = 0.0;
          for (int s = 0; s < cfg.reservoir.noise_seeds; ++s) {
            const auto fv = ar_session_features(cfg, model, cal, s, m, cfg.schedule.repetitions);
            const auto cv = cross_validate(make_labeled_set(fv), cfg.folds, cfg.classifier,
                                           derive_seed(cfg.master_seed, {kTagReservoir, kTagFold, static_cast<std::uint64_t>(s)}));
            lines += fmt::format("{},{},{}\n", format_number(m), s, format_number(cv.mean));
            total += cv.mean;
          }
          series.x.push_back(m);
          series.y.push_back(total / cfg.reservoir.noise_seeds);
          fmt::print("multiplier {}: mean accuracy {:.3f}\n", m, series.y.back());
        }
        write_text_file(out / "ar_noise_sweep.csv", lines);
        write_text_file(out / "ar_noise_sweep.svg",
                        render_line_plot({"AR accuracy vs noise", "noise multiplier", "accuracy", {series}, 0, 1}));
      }
      write_manifest(out, cfg, "ar-baseline", {{"reservoir", model.seed}});
    } else if (report->parsed()) {
      const auto res = run_pipeline(cfg, out);
      for (const auto& row : res.sweep.rows)
        fmt::print("W = {:>4} ms: {:.3f} ± {:.3f}\n", row.window_ms, row.mean, row.sem);
      fmt::print("AR: {:.3f} ± {:.3f} over {} noise seeds\n", res.ar.mean, res.ar.sd, res.ar.reports.size());
      for (Eigen::Index d = 0; d < res.cross_day.mean.size(); ++d)
        fmt::print("cross-day day {}: {:.3f} ± {:.3f}\n", d + 1, res.cross_day.mean[d], res.cross_day.sd[d]);
      fmt::print("shuffled: {:.3f} ± {:.3f}\nreports in {}\n", res.cross_day.shuffle_mean, res.cross_day.shuffle_sd,
                 (out / "reports").string());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
