#include <doctest.h>

#include "mea/culture.hpp"
#include "mea/readout.hpp"
#include "support.hpp"

using namespace mea;

namespace {

SimulationOptions short_trial(double pre = 0.5, double post = 0.5) {
  SimulationOptions o;
  o.pre_s = pre;
  o.post_s = post;
  return o;
}

std::size_t spikes_in(const SpikeTrain& t, std::int64_t lo, std::int64_t hi) {
  std::size_t n = 0;
  for (int c = 0; c < t.n_channels(); ++c)
    for (auto s : t.channel(c)) n += (s >= lo && s <= hi);
  return n;
}

}  // namespace

TEST_SUITE("culture") {
  TEST_CASE("built cultures are sparse, sign-consistent and free of self-connections") {
    const auto m = build_culture({}, 3);
    CHECK(m.n_neurons() == kChannels);
    CHECK(m.density() > 0.0);
    CHECK(m.density() < 0.05);
    CHECK(m.delays.size() == static_cast<std::size_t>(m.synapses.nonZeros()));
    CHECK(m.excitatory.size() == static_cast<std::size_t>(kChannels));
    int bad = 0;
    for (int pre = 0; pre < m.synapses.outerSize(); ++pre)
      for (Eigen::SparseMatrix<double>::InnerIterator it(m.synapses, pre); it; ++it) {
        bad += it.row() == it.col();
        bad += m.excitatory[static_cast<std::size_t>(it.col())] ? it.value() < 0 : it.value() > 0;
      }
    CHECK(bad == 0);
    CHECK(build_culture({}, 3).hash() == m.hash());
    CHECK(build_culture({}, 4).hash() != m.hash());
  }

  TEST_CASE("no drive and no stimulation coupling means no spikes") {
    CultureParams p;
    p.background_rate_hz = 0.0;
    p.coupling_gain = 0.0;
    const auto m = build_culture(p, 1);
    const auto patterns = make_digit_patterns({}, {});
    CHECK(simulate_trial(m, patterns[8], short_trial(), 5).spikes.empty());
    CHECK(record_spontaneous(m, 1.0, 5).empty());
  }

  TEST_CASE("simulation is deterministic in the seed") {
    const auto m = build_culture({}, 2);
    const auto patterns = make_digit_patterns({}, {});
    const auto a = simulate_trial(m, patterns[3], short_trial(), 11).spikes;
    const auto b = simulate_trial(m, patterns[3], short_trial(), 11).spikes;
    const auto c = simulate_trial(m, patterns[3], short_trial(), 12).spikes;
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.t0_offset_s() == doctest::Approx(-0.5));
    CHECK(a.n_samples() == 20000);
  }

  TEST_CASE("stimulation cannot change anything before its onset") {
    const auto m = build_culture({}, 5);
    const auto patterns = make_digit_patterns({}, {});
    StimulusPattern none;
    none.label = 8;
    const auto with = simulate_trial(m, patterns[8], short_trial(), 21).spikes;
    const auto without = simulate_trial(m, none, short_trial(), 21).spikes;
    const std::int64_t onset = 10000;
    for (int c = 0; c < kChannels; ++c) {
      std::vector<std::int64_t> a, b;
      for (auto s : with.channel(c))
        if (s < onset) a.push_back(s);
      for (auto s : without.channel(c))
        if (s < onset) b.push_back(s);
      REQUIRE(a == b);
    }
    CHECK(spikes_in(with, onset, onset + 100) > spikes_in(without, onset, onset + 100));
  }

  TEST_CASE("digit 8 evokes more spikes just after onset than any pre-onset window") {
    const auto m = build_culture({}, 7);
    const auto pattern = make_digit_pattern(8, {}, {});
    const std::int64_t onset = 10000, w = 100;
    std::vector<double> pre(onset / (w + 1), 0.0);
    double post = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      const auto t = simulate_trial(m, pattern, short_trial(), 100 + trial).spikes;
      post += static_cast<double>(spikes_in(t, onset, onset + w));
      for (std::size_t k = 0; k < pre.size(); ++k) {
        const auto lo = static_cast<std::int64_t>(k) * (w + 1);
        pre[k] += static_cast<double>(spikes_in(t, lo, lo + w));
      }
    }
    CHECK(post > *std::max_element(pre.begin(), pre.end()));
  }

  TEST_CASE("different digits evoke different responses") {
    const auto m = build_culture({}, 8);
    const auto patterns = make_digit_patterns({}, {});
    Eigen::VectorXd r1 = Eigen::VectorXd::Zero(kChannels), r8 = r1;
    for (std::uint64_t k = 0; k < 5; ++k) {
      r1 += extract_features(simulate_trial(m, patterns[1], short_trial(), k).spikes, 0.0, {}, patterns[1]).values;
      r8 += extract_features(simulate_trial(m, patterns[8], short_trial(), k).spikes, 0.0, {}, patterns[8]).values;
    }
    CHECK((r1 - r8).norm() > 0.0);
  }

  TEST_CASE("spontaneous rates sit in the culture band, also after drift") {
    const auto base = build_culture({}, 9);
    auto m = base;
    for (int day = 1; day <= 3; ++day) {
      const auto s = record_spontaneous(m, 10.0, 30 + static_cast<std::uint64_t>(day));
      const double rate = static_cast<double>(s.total_spikes()) / (kChannels * 10.0);
      CHECK(rate > 0.5);
      CHECK(rate < 5.0);
      m = advance_day(m, {}, derive_seed(9, {kTagDay, static_cast<std::uint64_t>(day + 1)}));
    }
  }

  TEST_CASE("zero drift leaves the model unchanged") {
    const auto m = build_culture({}, 10);
    const auto same = advance_day(m, {0.0, 0.0}, 99);
    CHECK(same.hash() == m.hash());
    CHECK(weight_distance(m, same) == 0.0);
    CHECK(same.day == m.day + 1);
  }

  TEST_CASE("drift does not touch its input and accumulates over days") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto m = build_culture({}, seed);
      const auto h = m.hash();
      const DriftParams d{0.1, 0.05};
      const auto one = advance_day(m, d, derive_seed(seed, {1}));
      const auto two = advance_day(one, d, derive_seed(seed, {2}));
      CHECK(m.hash() == h);
      CHECK(one.hash() != h);
      CHECK(weight_distance(m, two) > weight_distance(m, one));
      int bad = 0;
      for (int pre = 0; pre < two.synapses.outerSize(); ++pre)
        for (Eigen::SparseMatrix<double>::InnerIterator it(two.synapses, pre); it; ++it) {
          bad += it.row() == it.col();
          bad += two.excitatory[static_cast<std::size_t>(it.col())] ? it.value() < 0 : it.value() > 0;
        }
      CHECK(bad == 0);
      CHECK(two.delays.size() == static_cast<std::size_t>(two.synapses.nonZeros()));
    }
    CHECK_THROWS_AS(advance_day(build_culture({}, 1), {1.5, 0.0}, 1), std::invalid_argument);
  }

  TEST_CASE("invalid inputs are rejected") {
    const auto m = build_culture({}, 1);
    StimulusPattern bad;
    bad.pairs.push_back({5000, 1});
    CHECK_THROWS_AS(simulate_trial(m, bad, short_trial(), 1), std::out_of_range);
    CHECK_THROWS_AS(simulate_trial(m, make_digit_pattern(1, {}, {}), short_trial(0.1, 0.0), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(record_spontaneous(m, 0.0, 1), std::invalid_argument);
    CultureParams p;
    p.connection_peak = 0.0;
    CHECK_THROWS_AS(build_culture(p, 1), std::invalid_argument);
  }

  TEST_CASE("a non-finite membrane state raises a simulation error") {
    auto m = build_culture({}, 1);
    for (Eigen::Index k = 0; k < m.synapses.nonZeros(); ++k)
      m.synapses.valuePtr()[k] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(simulate_trial(m, make_digit_pattern(8, {}, {}), short_trial(0.05, 0.1), 1), SimulationError);
  }

  TEST_CASE("the trace path recovers the simulated spikes through the detector") {
    const auto m = build_culture({}, 12);
    auto o = short_trial(0.05, 0.1);
    const auto fast = simulate_trial(m, make_digit_pattern(8, {}, {}), o, 3);
    o.emit_trace = true;
    o.detect_from_trace = true;
    const auto full = simulate_trial(m, make_digit_pattern(8, {}, {}), o, 3);
    REQUIRE(full.trace.has_value());
    CHECK(full.trace->n_channels() == kChannels);
    CHECK(full.trace->n_samples() == fast.spikes.n_samples());
    int hits = 0;
    for (int c = 0; c < kChannels; ++c) hits += testsupport::matched(fast.spikes.channel(c), full.spikes.channel(c), 10);
    REQUIRE(fast.spikes.total_spikes() > 0);
    CHECK(static_cast<double>(hits) / static_cast<double>(fast.spikes.total_spikes()) > 0.9);
  }
}
