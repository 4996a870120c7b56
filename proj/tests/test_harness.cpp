#include <doctest.h>

#include "mea/harness.hpp"
#include "mea/io.hpp"
#include "support.hpp"

using namespace mea;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.replicates = 1;
  cfg.days = 2;
  cfg.schedule.repetitions = 3;
  cfg.simulation.spontaneous_s = 2.0;
  cfg.classifier.epochs = 50;
  cfg.folds = 3;
  cfg.windows_ms = {5, 10};
  cfg.reservoir.noise_seeds = 2;
  cfg.reservoir.noise_windows = 20;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("sessions get distinct, reproducible seed streams") {
    const ExperimentConfig cfg;
    CHECK(session_name({2, 3}) == "br2_day3");
    const auto a = session_seeds(cfg, {1, 1}), b = session_seeds(cfg, {1, 2}), c = session_seeds(cfg, {2, 1});
    CHECK(a.culture == b.culture);
    CHECK(a.culture != c.culture);
    CHECK(a.trials != b.trials);
    CHECK(a.schedule != b.schedule);
    CHECK(a.folds != c.folds);
    CHECK(session_seeds(cfg, {1, 1}).trials == a.trials);
    auto fixed = cfg;
    fixed.schedule.seed = 77;
    CHECK(session_seeds(fixed, {1, 1}).schedule == 77);
    CHECK(session_seeds(fixed, {2, 3}).schedule == 77);
  }

  TEST_CASE("the replicate model drifts from day to day") {
    const ExperimentConfig cfg;
    const auto d1 = culture_for(cfg, {1, 1}), d2 = culture_for(cfg, {1, 2}), d3 = culture_for(cfg, {1, 3});
    CHECK(d1.hash() != d2.hash());
    CHECK(d2.hash() != d3.hash());
    CHECK(weight_distance(d1, d3) > weight_distance(d1, d2));
    CHECK(culture_for(cfg, {1, 2}).hash() == d2.hash());
    CHECK_THROWS_AS(culture_for(cfg, {0, 1}), std::invalid_argument);
  }

  TEST_CASE("a session is written, reproduced byte for byte and read back") {
    const auto cfg = small_config();
    const auto dir_a = testsupport::scratch_dir("session_a"), dir_b = testsupport::scratch_dir("session_b");
    const auto s = run_session(cfg, {1, 1}, dir_a);
    run_session(cfg, {1, 1}, dir_b);
    REQUIRE(s.features.size() == 30);
    REQUIRE(s.trials.size() == 30);
    for (std::size_t k = 0; k < 30; ++k) {
      CHECK(s.features[k].label == s.schedule.trials[k].pattern);
      CHECK(s.features[k].trial == static_cast<int>(k));
      CHECK(s.features[k].session == "br1_day1");
    }
    for (const char* f : {"trials.csv", "spikes.csv", "spontaneous.csv", "features.csv", "manifest.json"}) {
      REQUIRE(std::filesystem::exists(dir_a / f));
      CHECK(testsupport::slurp(dir_a / f) == testsupport::slurp(dir_b / f));
    }

    const auto back = load_session(dir_a, cfg);
    CHECK(back.id == s.id);
    CHECK(back.model_hash == s.model_hash);
    CHECK(back.trials == s.trials);
    CHECK(back.spontaneous == s.spontaneous);
    REQUIRE(back.features.size() == s.features.size());
    for (std::size_t k = 0; k < s.features.size(); ++k) {
      CHECK(back.features[k].values == s.features[k].values);
      CHECK(back.features[k].masked == s.features[k].masked);
      CHECK(back.schedule.trials[k].pattern == s.schedule.trials[k].pattern);
    }
    CHECK(session_features(back, cfg.readout)[7].values == s.features[7].values);

    auto other = cfg;
    other.master_seed = 2;
    CHECK_THROWS_AS(load_session(dir_a, other), std::invalid_argument);
    CHECK_THROWS_AS(run_session(cfg, {1, 3}), std::invalid_argument);
  }

  TEST_CASE("a default session holds 200 trials") {
    ExperimentConfig cfg;
    cfg.simulation.spontaneous_s = 1.0;
    const auto s = run_session(cfg, {1, 1});
    CHECK(s.features.size() == 200);
    std::array<int, kDigits> counts{};
    for (const auto& f : s.features) ++counts[static_cast<std::size_t>(f.label)];
    for (int n : counts) CHECK(n == 20);
    CHECK(s.trials.front().n_samples() == 80000);
  }

  TEST_CASE("window sweep, accuracy matrix and cross-day results are consistent") {
    const auto cfg = small_config();
    const auto sessions = run_grid(cfg);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[1].id == SessionId{1, 2});
    const auto sweep = window_sweep(sessions, cfg.windows_ms, cfg);
    REQUIRE(sweep.rows.size() == 2);
    for (const auto& row : sweep.rows) {
      const double m = 0.5 * (row.session_accuracy[0] + row.session_accuracy[1]);
      CHECK(row.mean == doctest::Approx(m));
      CHECK(row.sem == doctest::Approx(std::abs(row.session_accuracy[0] - row.session_accuracy[1]) / 2.0));
    }
    const auto direct = evaluate_session(sessions[0], sessions[0].features, cfg);
    CHECK(sweep.reports[0][0].fold_accuracy == direct.fold_accuracy);

    const auto& within = sweep.reports[0];
    const auto matrix = accuracy_matrix(sessions, within, nullptr);
    CHECK(matrix.row_labels == std::vector<std::string>{"BR 1"});
    CHECK(matrix.values.cols() == kDigits);

    const auto cd = cross_day_experiment(sessions, within, cfg);
    CHECK(cd.accuracy(0, 0) == within[0].mean);
    CHECK(std::isnan(cd.shuffled(0, 0)));
    CHECK(cd.shuffled(0, 1) >= 0.0);
    CHECK(cd.per_class.rows() == 3);
    CHECK(cd.transfer.at(0).size() == 1);

    const auto dir = testsupport::scratch_dir("reports");
    write_window_sweep(sweep, sessions, dir);
    write_accuracy_matrix(matrix, dir);
    write_cross_day(cd, dir);
    write_session_table(sessions, within, dir);
    for (const char* f : {"window_sweep.csv", "window_sweep.svg", "accuracy_matrix.csv", "accuracy_matrix.svg",
                          "cross_day.csv", "cross_day.svg", "session_accuracy.csv"}) {
      REQUIRE(std::filesystem::exists(dir / f));
    }
    CHECK(testsupport::slurp(dir / "window_sweep.svg").find("<svg") != std::string::npos);
  }

  TEST_CASE("reservoir features follow the configured schedule and noise") {
    const auto cfg = small_config();
    const auto model = ar_model(cfg);
    NoiseCalibration cal;
    cal.mean_counts.setConstant(0.2);
    const auto a = ar_session_features(cfg, model, cal, 0, 1.0, 2);
    const auto b = ar_session_features(cfg, model, cal, 0, 1.0, 2);
    const auto c = ar_session_features(cfg, model, cal, 1, 1.0, 2);
    REQUIRE(a.size() == 20);
    CHECK(a[3].values == b[3].values);
    bool differs = false;
    for (std::size_t k = 0; k < a.size(); ++k) differs = differs || a[k].values != c[k].values;
    CHECK(differs);
    CHECK(a[0].session == "ar_seed0");
  }

  TEST_CASE("strong drift makes cross-day transfer worse than within-day accuracy") {
    ExperimentConfig cfg;
    cfg.replicates = 1;
    cfg.days = 2;
    cfg.simulation.spontaneous_s = 1.0;
    cfg.drift = {0.5, 0.2};
    const auto sessions = run_grid(cfg);
    std::vector<CVReport> within;
    for (const auto& s : sessions) within.push_back(evaluate_session(s, s.features, cfg));
    const auto cd = cross_day_experiment(sessions, within, cfg);
    CHECK(cd.accuracy(0, 1) < cd.accuracy(0, 0));
  }

  TEST_CASE("spearman correlation uses average ranks") {
    const std::vector<double> x{1, 2, 3, 4, 5}, down{9, 7, 5, 3, 1}, up{0.1, 0.2, 0.25, 10, 11};
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    const std::vector<double> a{1, 2, 3, 4}, ties{1, 1, 2, 2};
    CHECK(spearman(a, ties) == doctest::Approx(4.0 / std::sqrt(20.0)));
    const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
    CHECK(spearman(a, flat) == 0.0);
    CHECK_THROWS(spearman(a, x));
  }
}
