#include <doctest.h>

#include "mea/detection.hpp"
#include "mea/signal.hpp"
#include "support.hpp"

using namespace mea;

namespace {

RawRecording noisy_recording(int channels, std::int64_t n, double rate_hz, double amplitude, std::uint64_t seed) {
  const auto tr = testsupport::random_train(channels, n, rate_hz, 25, seed, 40);
  SpikeTemplate t;
  t.amplitude_uv = amplitude;
  return synthesize_trace(tr, 10.0, t, seed).recording;
}

bool is_subset(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("parameter validation") {
    DetectorParams p;
    CHECK_NOTHROW(p.validate());
    p.thr_high = 2.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.window_s = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.refractory_s = -1e-3;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK(DetectorParams{}.half_window(20000.0) == 20);
    CHECK(DetectorParams{}.refractory_samples(20000.0) == 20);
  }

  TEST_CASE("population sd matches the textbook formula") {
    std::vector<float> x{1.0f, 2.0f, 4.0f, 7.0f};
    const double mean = 3.5;
    double ss = 0.0;
    for (float v : x) ss += (v - mean) * (v - mean);
    CHECK(detail::population_sd(x) == doctest::Approx(std::sqrt(ss / 4.0)));
    std::vector<std::uint8_t> keep{1, 0, 1, 0};
    CHECK(detail::population_sd(x, keep) == doctest::Approx(1.5));
    CHECK(detail::population_sd(std::vector<float>{5.0f}) == 0.0);
  }

  TEST_CASE("constant and silent channels yield no spikes") {
    std::vector<float> zeros(5000, 0.0f), flat(5000, 3.0f);
    ChannelNoise noise;
    CHECK(detect_channel(zeros, 20000.0, {}, &noise).empty());
    CHECK(noise.sigma == 0.0);
    CHECK(detect_channel(flat, 20000.0, {}).empty());
    CHECK(detect_channel(std::vector<float>{}, 20000.0, {}).empty());
  }

  TEST_CASE("one large spike in noise is found within half a millisecond") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto tr = SpikeTrain::from_events(1, 20000.0, 0.0, 20000, {{0, 7000 + static_cast<std::int64_t>(seed)}});
      SpikeTemplate t;
      t.amplitude_uv = 150.0;
      const auto rec = synthesize_trace(tr, 10.0, t, seed).recording;
      const auto found = detect_channel(rec.channel(0), 20000.0, {});
      REQUIRE(found.size() == 1);
      CHECK(std::llabs(found[0] - tr.channel(0)[0]) <= 10);
    }
  }

  TEST_CASE("streaming detector agrees exactly with the reference") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const double amp = 20.0 + 12.0 * static_cast<double>(seed);
      const auto rec = noisy_recording(16, 20000, 15.0, amp, seed);
      CHECK(detect_spikes(rec, {}) == detect_spikes_reference(rec, {}));
      DetectorParams p;
      p.thr_low = 2.5;
      p.thr_high = 4.0;
      p.refractory_s = 0.003;
      CHECK(detect_spikes(rec, p) == detect_spikes_reference(rec, p));
    }
  }

  TEST_CASE("rescaling the trace by a positive constant leaves the output unchanged") {
    const auto rec = noisy_recording(8, 20000, 20.0, 60.0, 21);
    const auto base = detect_spikes(rec, {});
    for (float k : {0.25f, 3.0f, 4.0f, 1024.0f}) {
      auto scaled = rec;
      scaled.samples *= k;
      CHECK(detect_spikes(scaled, {}) == base);
    }
  }

  TEST_CASE("raising the high threshold never adds spikes") {
    const auto rec = noisy_recording(8, 20000, 30.0, 55.0, 31);
    SpikeTrain prev;
    bool first = true;
    for (double th : {3.0, 4.0, 5.0, 6.0, 8.0, 12.0}) {
      DetectorParams p;
      p.thr_high = th;
      const auto cur = detect_spikes(rec, p);
      if (!first)
        for (int c = 0; c < rec.n_channels(); ++c) CHECK(is_subset(cur.channel(c), prev.channel(c)));
      prev = cur;
      first = false;
    }
  }

  TEST_CASE("accepted spikes respect the refractory period") {
    const auto rec = noisy_recording(8, 20000, 150.0, 60.0, 41);
    for (double r : {0.001, 0.004}) {
      DetectorParams p;
      p.refractory_s = r;
      const auto out = detect_spikes(rec, p);
      for (int c = 0; c < out.n_channels(); ++c) {
        const auto t = out.channel(c);
        for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] - t[k - 1] >= p.refractory_samples(20000.0));
      }
    }
  }

  TEST_CASE("false positives on pure noise stay below 1 Hz per channel") {
    std::size_t total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const SpikeTrain quiet(8, 20000.0, 0.0, 40000);
      total += detect_spikes(synthesize_trace(quiet, 10.0, {}, seed).recording, {}).total_spikes();
    }
    CHECK(static_cast<double>(total) / (10 * 8 * 2.0) < 1.0);
  }

  TEST_CASE("noise estimate excludes spike segments") {
    const auto rec = noisy_recording(1, 40000, 40.0, 120.0, 51);
    ChannelNoise noise;
    detect_channel(rec.channel(0), 20000.0, {}, &noise);
    CHECK(noise.sigma > noise.sigma_n);
    CHECK(noise.sigma_n == doctest::Approx(10.0).epsilon(0.1));
  }

  TEST_CASE("detection is deterministic") {
    const auto rec = noisy_recording(4, 10000, 20.0, 70.0, 61);
    CHECK(detect_spikes(rec, {}) == detect_spikes(rec, {}));
  }
}
