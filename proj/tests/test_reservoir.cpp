#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mea/reservoir.hpp"
#include "support.hpp"

using namespace mea;

namespace {

const ARModel<double>& default_reservoir() {
  static const auto model = build_reservoir<double>(ReservoirParams{}, 5);
  return model;
}

}  // namespace

TEST_SUITE("reservoir") {
  TEST_CASE("the default reservoir has ten percent density") {
    const auto& m = default_reservoir();
    CHECK(m.n_units() == kChannels);
    CHECK(m.density() >= 0.095);
    CHECK(m.density() <= 0.105);
    const auto per_row = static_cast<Eigen::Index>(std::lround(0.1 * kChannels));
    for (Eigen::Index r = 0; r < m.recurrent.rows(); r += 97)
      CHECK(m.recurrent.outerIndexPtr()[r + 1] - m.recurrent.outerIndexPtr()[r] == per_row);
  }

  TEST_CASE("the spectral radius matches a dense eigendecomposition within 1 percent") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      ReservoirParams p;
      p.n_units = 500;
      p.spectral_radius = 0.9;
      const auto m = build_reservoir<double>(p, seed);
      const Eigen::MatrixXd dense(m.recurrent);
      const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(dense, false).eigenvalues().cwiseAbs().maxCoeff();
      CHECK(rho == doctest::Approx(0.9).epsilon(0.01));
    }
  }

  TEST_CASE("power iteration handles a dominant complex pair") {
    // 0.7 * rotation by 1 rad, plus a smaller real eigenvalue.
    std::vector<Eigen::Triplet<double>> t{{0, 0, 0.7 * std::cos(1.0)}, {0, 1, -0.7 * std::sin(1.0)},
                                          {1, 0, 0.7 * std::sin(1.0)}, {1, 1, 0.7 * std::cos(1.0)},
                                          {2, 2, 0.3}};
    SparseRowMatrix<double> a(3, 3);
    a.setFromTriplets(t.begin(), t.end());
    CHECK(estimate_spectral_radius(a, 50, 500, 1) == doctest::Approx(0.7).epsilon(1e-6));
    SparseRowMatrix<double> zero(4, 4);
    CHECK(estimate_spectral_radius(zero, 10, 10, 1) == 0.0);
  }

  TEST_CASE("a reservoir at rest stays at rest") {
    const auto& m = default_reservoir();
    const VectorX<double> zero = VectorX<double>::Zero(kChannels);
    CHECK(reservoir_response(m, zero).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(reservoir_response(m, VectorX<double>(VectorX<double>::Zero(10))), std::invalid_argument);
  }

  TEST_CASE("odd nonlinearities make the response odd in the input") {
    for (auto phi : {Nonlinearity::tanh, Nonlinearity::softsign}) {
      ReservoirParams p;
      p.n_units = 300;
      p.nonlinearity = phi;
      const auto m = build_reservoir<double>(p, 4);
      const VectorX<double> u = VectorX<double>::Random(300) * 3.0;
      const VectorX<double> up = reservoir_response(m, u);
      const VectorX<double> down = reservoir_response(m, VectorX<double>(-u));
      CHECK((up + down).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(up.cwiseAbs().maxCoeff() > 0.0);
      CHECK(up.cwiseAbs().maxCoeff() < 1.0);
    }
  }

  TEST_CASE("the stimulus map is signed by electrode polarity") {
    const auto p = make_digit_pattern(1, {}, {});
    const auto u = stimulation_input(p);
    for (const auto& pair : p.pairs) {
      CHECK(u[pair.positive] == p.pulse.amplitude_ua);
      CHECK(u[pair.negative] == -p.pulse.amplitude_ua);
    }
    CHECK(u.sum() == 0.0);
    CHECK((u.array() != 0.0).count() == 12);
  }

  TEST_CASE("reservoir features use the same mask as the culture readout") {
    const auto& m = default_reservoir();
    NoiseCalibration silent;
    for (int d = 0; d < kDigits; ++d) {
      const auto p = make_digit_pattern(d, {}, {});
      const auto fv = ar_forward(m, p, silent, ReadoutParams{}, 1, 0.0);
      CHECK(fv.masked == stimulation_mask(p, 2));
      CHECK(fv.label == d);
      for (int c = 0; c < kChannels; ++c)
        if (fv.masked[static_cast<std::size_t>(c)]) CHECK(fv.values[c] == 0.0);
      CHECK(fv.values.cwiseAbs().maxCoeff() > 0.0);
    }
  }

  TEST_CASE("noiseless digits give distinct reservoir states") {
    const auto& m = default_reservoir();
    NoiseCalibration silent;
    std::vector<Eigen::VectorXd> v;
    for (int d = 0; d < kDigits; ++d)
      v.push_back(ar_forward(m, make_digit_pattern(d, {}, {}), silent, ReadoutParams{}, 1, 0.0).values);
    for (int a = 0; a < kDigits; ++a)
      for (int b = a + 1; b < kDigits; ++b) CHECK((v[a] - v[b]).norm() > 1e-3);
  }

  TEST_CASE("reservoirs and noise draws are reproducible from their seeds") {
    ReservoirParams p;
    p.n_units = 400;
    const auto a = build_reservoir<double>(p, 8), b = build_reservoir<double>(p, 8), c = build_reservoir<double>(p, 9);
    CHECK(Eigen::MatrixXd(a.recurrent) == Eigen::MatrixXd(b.recurrent));
    CHECK(Eigen::MatrixXd(a.recurrent) != Eigen::MatrixXd(c.recurrent));
    NoiseCalibration cal;
    cal.mean_counts.setConstant(0.5);
    CHECK(draw_spontaneous_noise(cal, 1.0, 3) == draw_spontaneous_noise(cal, 1.0, 3));
    CHECK(draw_spontaneous_noise(cal, 1.0, 3) != draw_spontaneous_noise(cal, 1.0, 4));
    CHECK(draw_spontaneous_noise(cal, 0.0, 3).cwiseAbs().maxCoeff() == 0.0);
    const auto big = draw_spontaneous_noise(cal, 4.0, 5);
    CHECK(big.mean() == doctest::Approx(2.0).epsilon(0.05));
  }

  TEST_CASE("calibration recovers the Poisson rate of a spontaneous recording") {
    const double rate = 20.0;
    const auto t = testsupport::random_train(64, 400000, rate, 1, 12);
    const auto cal = calibrate_noise(t, 0.005, 100, 3);
    const double expected = rate * 101.0 / 20000.0;
    const double se = std::sqrt(expected / (100.0 * 64.0));
    CHECK(std::abs(cal.mean_counts.mean() - expected) < 4.0 * se);
    CHECK(cal.n_windows == 100);
    CHECK(calibrate_noise(t, 0.005, 100, 3).mean_counts == cal.mean_counts);
    const SpikeTrain silent(64, 20000.0, 0.0, 400000);
    CHECK(calibrate_noise(silent, 0.005, 100, 3).mean_counts.cwiseAbs().maxCoeff() == 0.0);
    const SpikeTrain tiny(64, 20000.0, 0.0, 1000);
    CHECK_THROWS_AS(calibrate_noise(tiny, 0.005, 100, 3), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_noise(t, 0.0, 100, 3), std::invalid_argument);
  }

  TEST_CASE("reservoir parameters are validated") {
    ReservoirParams p;
    p.density = 0.0;
    CHECK_THROWS_AS(build_reservoir<double>(p, 1), std::invalid_argument);
    p = {};
    p.spectral_radius = -1.0;
    CHECK_THROWS_AS(build_reservoir<double>(p, 1), std::invalid_argument);
  }
}
