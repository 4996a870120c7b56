#include <doctest.h>

#include "mea/io.hpp"
#include "support.hpp"

using namespace mea;

TEST_SUITE("io") {
  TEST_CASE("CSV fields are quoted only when needed and parse back") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const std::vector<std::string> fields{"x", "a,b", "say \"hi\"", ""};
    std::string line;
    for (std::size_t k = 0; k < fields.size(); ++k) line += (k ? "," : "") + csv_field(fields[k]);
    CHECK(parse_csv_line(line) == fields);
    CHECK(parse_csv_line("1,2\r") == std::vector<std::string>{"1", "2"});
    CHECK_THROWS(parse_csv_line("\"open"));
  }

  TEST_CASE("numbers print in shortest round-trip form") {
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(0.1) == "0.1");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
  }

  TEST_CASE("spike CSVs are sorted, carry grid coordinates and round-trip") {
    const auto t = testsupport::random_train(kChannels, 20000, 2.0, 1, 3, 0, 20000.0, 0.0);
    const auto dir = testsupport::scratch_dir("spikes");
    write_spike_csv(t, dir / "s.csv");
    const auto rows = read_csv(dir / "s.csv", "channel,i,j,sample_index,time_s");
    REQUIRE(rows.size() == t.total_spikes());
    std::pair<int, long long> prev{-1, -1};
    for (const auto& r : rows) {
      const int c = std::stoi(r[0]);
      CHECK(std::stoi(r[1]) == c / 64);
      CHECK(std::stoi(r[2]) == c % 64);
      const std::pair<int, long long> key{c, std::stoll(r[3])};
      CHECK(prev < key);
      prev = key;
      CHECK(std::stod(r[4]) == doctest::Approx(static_cast<double>(key.second) / 20000.0).epsilon(1e-6));
    }
    CHECK(read_spike_csv(dir / "s.csv", 20000.0, 0.0, 20000) == t);
    CHECK_THROWS(read_csv(dir / "s.csv", "channel,sample"));
  }

  TEST_CASE("trial spike CSVs round-trip every trial") {
    std::vector<SpikeTrain> trials;
    for (std::uint64_t k = 0; k < 4; ++k)
      trials.push_back(testsupport::random_train(kChannels, 8000, 1.0, 1, 10 + k, 0, 20000.0, -0.2));
    trials.push_back(SpikeTrain(kChannels, 20000.0, -0.2, 8000));
    const auto dir = testsupport::scratch_dir("trials");
    write_trial_spikes_csv(trials, dir / "t.csv");
    CHECK(read_trial_spikes_csv(dir / "t.csv", trials.size(), 20000.0, -0.2, 8000) == trials);
    CHECK_THROWS(read_trial_spikes_csv(dir / "t.csv", 2, 20000.0, -0.2, 8000));
  }

  TEST_CASE("feature CSVs round-trip values, labels and trial ids") {
    std::vector<FeatureVector> v(3);
    for (int k = 0; k < 3; ++k) {
      v[k].label = k + 4;
      v[k].session = k == 1 ? "br1,day2" : "br1_day1";
      v[k].trial = 10 * k;
      v[k].values[k] = 2.0;
      v[k].values[4095] = 0.123456789012345;
    }
    const auto dir = testsupport::scratch_dir("features");
    write_feature_csv(v, dir / "f.csv");
    const auto back = read_feature_csv(dir / "f.csv");
    REQUIRE(back.size() == 3);
    for (int k = 0; k < 3; ++k) {
      CHECK(back[k].label == v[k].label);
      CHECK(back[k].session == v[k].session);
      CHECK(back[k].trial == v[k].trial);
      CHECK(back[k].values == v[k].values);
    }
    const auto header = parse_csv_line(testsupport::slurp(dir / "f.csv").substr(0, 40000));
    CHECK(header[0] == "label");
    CHECK(header[3] == "c0");
  }

  TEST_CASE("schedules are written one trial per row") {
    const auto patterns = make_digit_patterns({}, {});
    const auto s = build_schedule(patterns, 2, 10.0, 3);
    const auto dir = testsupport::scratch_dir("schedule");
    write_schedule_csv(s, patterns, dir / "s.csv");
    const auto rows = read_csv(dir / "s.csv", "trial,label,onset_s");
    REQUIRE(rows.size() == 20);
    for (std::size_t m = 0; m < rows.size(); ++m) {
      CHECK(std::stoul(rows[m][0]) == m);
      CHECK(std::stoi(rows[m][1]) == s.trials[m].pattern);
      CHECK(std::stod(rows[m][2]) == doctest::Approx(s.trials[m].onset_s));
    }
  }
}
