// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "parahom/factorize.hpp"
#include "parahom/presets.hpp"
#include "support/oracles.hpp"

using namespace parahom;
using namespace parahom::testing;

TEST_CASE("skew potential: zero input, single-mode closed form, residual oracle") {
  const TorusGrid g(2, 32);

  SUBCASE("zero drift gives zero potential") {
    const auto B = build_skew_potential(PeriodicField(g, FieldRank::Vector));
    CHECK(max_abs(B) == 0.0);
  }

  SUBCASE("single-mode analytic solve") {
    const auto beta = PeriodicField::sample_vector(g, [](const std::array<double, 3>& y) {
      return std::array<double, 3>{std::sin(kTwoPi * y[1]), 0.0};
    });
    const auto B = build_skew_potential(beta);
    double err = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      const double y2 = g.coords(k)[1];
      err = std::max(err, std::abs(B.value(B.mat(0, 1), k) - std::cos(kTwoPi * y2) / kTwoPi));
      err = std::max(err, std::abs(B.value(B.mat(1, 0), k) + std::cos(kTwoPi * y2) / kTwoPi));
    }
    CHECK(err <= 1e-10);
  }

  SUBCASE("random divergence-free zero-mean drift: skewness and residual") {
    // beta = (d2 phi, -d1 phi) is exactly divergence-free with zero mean
    std::mt19937_64 rng(31);
    const TrigPoly phi = TrigPoly::random(2, 5, 6, rng);
    const auto phif = phi.sample(g);
    PeriodicField beta(g, FieldRank::Vector);
    const auto d2 = spectral_derivative(phif, 1);
    const auto d1 = spectral_derivative(phif, 0);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      beta.value(0, k) = d2.value(0, k);
      beta.value(1, k) = -d1.value(0, k);
    }
    const auto B = build_skew_potential(beta);
    double skew = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          skew = std::max(skew, std::abs(B.value(B.mat(i, j), k) + B.value(B.mat(j, i), k)));
    CHECK(skew == 0.0);  // exact by construction

    const auto divB = row_divergence(B);
    double res = 0.0;
    for (int i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < g.num_nodes(); ++k)
        res = std::max(res, std::abs(beta.value(i, k) + divB.value(i, k)));
    CHECK(res <= 1e-8);
  }

  SUBCASE("validation errors") {
    CHECK_THROWS_AS(build_skew_potential(PeriodicField::sample_vector(
                        g,
                        [](const std::array<double, 3>&) {
                          return std::array<double, 3>{0.5, 0.0};
                        })),
                    NonZeroMean);
    CHECK_THROWS_AS(build_skew_potential(PeriodicField::sample_vector(
                        g,
                        [](const std::array<double, 3>& y) {
                          return std::array<double, 3>{std::sin(kTwoPi * y[0]), 0.0};
                        })),
                    NotDivergenceFree);
  }
}

TEST_CASE("factorized model: classical reduction") {
  const TorusGrid g(1, 32);
  const auto coeffs = presets::classical(g);
  const CellEigenSolution eig = find_bloch_parameter(coeffs);
  const FactorizedModel fm = build_factorized_model(coeffs, eig);

  CHECK(max_abs(fm.beta) <= 1e-12);
  CHECK(max_abs(fm.B) == 0.0);
  double dev = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    dev = std::max(dev, std::abs(fm.sigma.value(0, k) - 1.0));
    dev = std::max(dev, std::abs(fm.M.value(0, k) - 1.0));
  }
  CHECK(dev <= 1e-10);
  CHECK(fm.ellipticity_b == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("factorized model: constant drift in 1d") {
  const TorusGrid g(1, 64);
  const auto coeffs = presets::constant_drift_1d(g);
  const CellEigenSolution eig = find_bloch_parameter(coeffs);
  const FactorizedModel fm = build_factorized_model(coeffs, eig);

  // closed-form eigenfunctions have constant periodic parts, so sigma = 1,
  // and 1d skew fields vanish identically, so M = alpha = A = 1
  double dev = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    dev = std::max(dev, std::abs(fm.sigma.value(0, k) - 1.0));
    dev = std::max(dev, std::abs(fm.M.value(0, k) - 1.0));
  }
  CHECK(dev <= 1e-7);
  CHECK(max_abs(fm.B) == 0.0);
  CHECK(max_abs(fm.beta) <= 1e-8);
}

TEST_CASE("factorized model: structural residuals for a smooth 2d problem") {
  const TorusGrid g(2, 64);
  const auto coeffs = presets::drift_2d(g);
  const CellEigenSolution eig = find_bloch_parameter(coeffs);
  const FactorizedModel fm = build_factorized_model(coeffs, eig);

  for (int i = 0; i < 2; ++i) CHECK(std::abs(cell_average(fm.beta, i)) <= 1e-8);
  CHECK(max_abs(divergence(fm.beta)) <= 1e-8);

  double skew = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        skew = std::max(skew, std::abs(fm.B.value(fm.B.mat(i, j), k) +
                                       fm.B.value(fm.B.mat(j, i), k)));
  CHECK(skew <= 1e-10);

  const auto divB = row_divergence(fm.B);
  double res = 0.0;
  for (int i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      res = std::max(res, std::abs(fm.beta.value(i, k) + divB.value(i, k)));
  CHECK(res <= 1e-8);

  // integral of sigma is 1 (the zeta normalization the section-2 theory needs)
  CHECK(std::abs(cell_average(fm.sigma) - 1.0) <= 1e-8);

  // M and alpha induce identical quadratic forms; M stays elliptic
  std::mt19937_64 rng(41);
  for (int q = 0; q < 20; ++q) {
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * g.num_nodes());
    double xi[2] = {2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0};
    const double nn = std::hypot(xi[0], xi[1]);
    xi[0] /= nn;
    xi[1] /= nn;
    double qm = 0.0, qa = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        qm += fm.M.value(fm.M.mat(i, j), k) * xi[i] * xi[j];
        qa += fm.alpha.value(fm.alpha.mat(i, j), k) * xi[i] * xi[j];
      }
    CHECK(std::abs(qm - qa) <= 1e-12 * (1.0 + std::abs(qa)));
    CHECK(qm >= fm.ellipticity_b - 1e-10);
  }

  // single assembly path: rebuilding beta reproduces the stored field bitwise
  const auto rebuilt = build_beta(coeffs, eig);
  for (int i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      CHECK(rebuilt.value(i, k) == fm.beta.value(i, k));
}

TEST_CASE("nondivergence front-end") {
  const TorusGrid g(2, 32);

  SUBCASE("identity matrix gives the trivial problem") {
    const auto ndc = NondivergenceCoefficients::make(
        PeriodicField::sample_matrix(g,
                                     [](const std::array<double, 3>&) {
                                       return std::array<double, 9>{1.0, 0.0, 0.0, 1.0};
                                     }),
        PeriodicField(g, FieldRank::Vector), PeriodicField(g, FieldRank::Scalar), 1.0);
    const auto abc = nondivergence_frontend(ndc);
    CHECK(max_abs(abc.b) <= 1e-12);
    CHECK(max_abs(abc.c) == 0.0);
    const CellEigenSolution eig = find_bloch_parameter(abc);
    CHECK(std::abs(eig.lambda) <= 1e-8);
    double dev = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      dev = std::max(dev, std::abs(eig.psi.value(0, k) - 1.0));
    CHECK(dev <= 1e-8);
  }

  SUBCASE("constant q passes through") {
    PeriodicField q(g, FieldRank::Vector);
    std::fill(q.component(0).begin(), q.component(0).end(), 0.75);
    const auto ndc = NondivergenceCoefficients::make(
        PeriodicField::sample_matrix(g,
                                     [](const std::array<double, 3>&) {
                                       return std::array<double, 9>{1.0, 0.0, 0.0, 1.0};
                                     }),
        std::move(q), PeriodicField(g, FieldRank::Scalar), 1.0);
    const auto abc = nondivergence_frontend(ndc);
    double dev = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      dev = std::max(dev, std::abs(abc.b.value(0, k) - 0.75));
      dev = std::max(dev, std::abs(abc.b.value(1, k)));
    }
    CHECK(dev <= 1e-12);
  }

  SUBCASE("variable K produces its row divergence") {
    const auto abc = nondivergence_frontend(presets::nondiv(g));
    constexpr double kPi = 3.14159265358979323846;
    double err = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      const double y1 = g.coords(k)[0];
      err = std::max(err, std::abs(abc.b.value(0, k) - kPi * std::cos(kTwoPi * y1)));
      err = std::max(err, std::abs(abc.b.value(1, k)));
    }
    CHECK(err <= 1e-10);
  }

  SUBCASE("asymmetric K is rejected") {
    auto K = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
      return std::array<double, 9>{1.0, 0.2 * std::sin(kTwoPi * y[0]), 0.0, 1.0};
    });
    CHECK_THROWS_AS(NondivergenceCoefficients::make(std::move(K),
                                                    PeriodicField(g, FieldRank::Vector),
                                                    PeriodicField(g, FieldRank::Scalar), 0.5),
                    NotSymmetric);
  }
}
