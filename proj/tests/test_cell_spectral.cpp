// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "parahom/cell_spectral.hpp"
#include "parahom/presets.hpp"
#include "support/oracles.hpp"

using namespace parahom;
using namespace parahom::testing;

namespace {
constexpr double kQuarterInvPi = 1.0 / (2.0 * kTwoPi);  // 1/(4 pi)
}

TEST_CASE("laplacian eigenpair: constants solve the problem") {
  const TorusGrid g(1, 32);
  const auto coeffs = presets::classical(g);
  const double theta[3] = {0.0, 0.0, 0.0};
  const Eigenpair ep = principal_eigenpair(coeffs, theta, EigenSide::Direct);
  CHECK(std::abs(ep.lambda) <= 1e-10);
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    CHECK(ep.eigenfunction.value(0, k) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("constant potential shifts the eigenvalue") {
  const TorusGrid g(1, 32);
  const auto coeffs = ProblemCoefficients::make(
      PeriodicField::sample_matrix(g, [](const std::array<double, 3>&) {
        return std::array<double, 9>{1.0};
      }),
      PeriodicField(g, FieldRank::Vector), PeriodicField::constant_scalar(g, 2.0), 1.0);
  const double theta[3] = {0.0, 0.0, 0.0};
  const Eigenpair ep = principal_eigenpair(coeffs, theta, EigenSide::Direct);
  CHECK(std::abs(ep.lambda - 2.0) <= 1e-9);
}

TEST_CASE("constant drift closed form: lambda = b0^2/4 at theta = b0/(4 pi)") {
  const TorusGrid g(1, 64);
  const auto coeffs = presets::constant_drift_1d(g);
  const double theta[3] = {kQuarterInvPi, 0.0, 0.0};
  const Eigenpair ep = principal_eigenpair(coeffs, theta, EigenSide::Direct);
  CHECK(std::abs(ep.lambda - 0.25) <= 1e-8);
  // the periodic part of e^{y/2} at this theta is constant
  double dev = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    dev = std::max(dev, std::abs(ep.eigenfunction.value(0, k) - 1.0));
  CHECK(dev <= 1e-8);
}

TEST_CASE("inverse power iteration matches the dense full eigensolve on 8^d grids") {
  for (int dim : {1, 2}) {
    for (int draw = 0; draw < 5; ++draw) {
      const std::uint64_t seed = 1000 * dim + draw;
      const TorusGrid g(dim, 8);
      const auto coeffs = presets::random_smooth(g, seed);
      std::mt19937_64 rng(seed ^ 0xabcdef);
      std::array<double, 3> theta{0.0, 0.0, 0.0};
      for (int a = 0; a < dim; ++a) theta[static_cast<std::size_t>(a)] = 0.6 * uniform01(rng) - 0.3;

      for (EigenSide side : {EigenSide::Direct, EigenSide::Adjoint}) {
        const DensePrincipal dense = dense_principal_eigenvalue(
            coeffs, std::span<const double>(theta.data(), 3), side);
        CHECK(dense.imag_part <= 1e-9 * (1.0 + std::abs(dense.lambda)));
        CHECK(dense.gap > 1.0);  // simple principal eigenvalue, well separated
        const Eigenpair ep =
            principal_eigenpair(coeffs, std::span<const double>(theta.data(), 3), side);
        CHECK(std::abs(ep.lambda - dense.lambda) <= 1e-8 * (1.0 + std::abs(dense.lambda)));
      }
    }
  }
}

TEST_CASE("normalize_pair: stated conventions") {
  const TorusGrid g(1, 16);
  SUBCASE("already normalized stays put") {
    const auto one = PeriodicField::constant_scalar(g, 1.0);
    const auto [p, q] = normalize_pair(one, one);
    CHECK(p.value(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.value(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("constants are forced to one") {
    const auto [p, q] = normalize_pair(PeriodicField::constant_scalar(g, 2.0),
                                       PeriodicField::constant_scalar(g, 3.0));
    CHECK(p.value(0, 5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.value(0, 5) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("negative pairs are sign-fixed") {
    const auto [p, q] = normalize_pair(PeriodicField::constant_scalar(g, -1.0),
                                       PeriodicField::constant_scalar(g, -1.0));
    CHECK(p.value(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.value(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("sign-changing input is rejected") {
    const auto bad = PeriodicField::sample_scalar(
        g, [](const std::array<double, 3>& y) { return std::sin(kTwoPi * y[0]); });
    CHECK_THROWS_AS(normalize_pair(bad, PeriodicField::constant_scalar(g, 1.0)), SignChange);
  }
  SUBCASE("pairing integral is one after normalization") {
    const auto a = PeriodicField::sample_scalar(
        g, [](const std::array<double, 3>& y) { return 2.0 + std::sin(kTwoPi * y[0]); });
    const auto b = PeriodicField::sample_scalar(
        g, [](const std::array<double, 3>& y) { return 1.5 + std::cos(kTwoPi * y[0]); });
    const auto [p, q] = normalize_pair(a, b);
    double pairing = 0.0, np = 0.0, nq = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      pairing += p.value(0, k) * q.value(0, k);
      np += p.value(0, k) * p.value(0, k);
      nq += q.value(0, k) * q.value(0, k);
    }
    pairing /= static_cast<double>(g.num_nodes());
    CHECK(std::abs(pairing - 1.0) <= 1e-12);
    CHECK(std::abs(np - nq) <= 1e-10 * np);
  }
}

TEST_CASE("drift-free symmetric problems sit at theta = 0 with psi = psi*") {
  const TorusGrid g(2, 16);
  const auto A = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    const double v = 1.0 + 0.3 * std::sin(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
    return std::array<double, 9>{v, 0.0, 0.0, v};
  });
  const auto c = PeriodicField::sample_scalar(
      g, [](const std::array<double, 3>& y) { return 0.5 * std::cos(kTwoPi * y[1]); });
  const auto coeffs = ProblemCoefficients::make(A, PeriodicField(g, FieldRank::Vector), c, 0.7);

  const CellEigenSolution sol = find_bloch_parameter(coeffs);
  CHECK(sol.theta[0] == 0.0);
  CHECK(sol.theta[1] == 0.0);
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    CHECK(sol.psi.value(0, k) == sol.psi_star.value(0, k));  // bitwise: same path
  const auto beta = assemble_effective_drift(
      coeffs, std::span<const double>(sol.theta.data(), 3), sol.psi, sol.psi_star);
  CHECK(max_abs(beta) == 0.0);
}

TEST_CASE("bloch parameter for the constant-drift problem") {
  const TorusGrid g(1, 64);
  const CellEigenSolution sol = find_bloch_parameter(presets::constant_drift_1d(g));
  CHECK(std::abs(sol.theta[0] - kQuarterInvPi) <= 1e-8);
  CHECK(std::abs(sol.lambda - 0.25) <= 1e-8);
  CHECK(sol.residuals.drift_mean <= 1e-8);
  CHECK(sol.lower_bound_a > 0.0);
}

TEST_CASE("2d constant drift separates into the 1d solution") {
  const TorusGrid g(2, 16);
  PeriodicField b(g, FieldRank::Vector);
  std::fill(b.component(0).begin(), b.component(0).end(), 1.0);
  const auto coeffs = ProblemCoefficients::make(
      PeriodicField::sample_matrix(g, [](const std::array<double, 3>&) {
        return std::array<double, 9>{1.0, 0.0, 0.0, 1.0};
      }),
      std::move(b), PeriodicField(g, FieldRank::Scalar), 1.0);
  const CellEigenSolution sol = find_bloch_parameter(coeffs);
  CHECK(std::abs(sol.theta[0] - kQuarterInvPi) <= 1e-8);
  CHECK(std::abs(sol.theta[1]) <= 1e-8);
  CHECK(std::abs(sol.lambda - 0.25) <= 1e-8);
}

TEST_CASE("constant shift of c moves lambda only") {
  const TorusGrid g(1, 64);
  const auto base = presets::drift_var_1d(g);
  const CellEigenSolution s0 = find_bloch_parameter(base);

  PeriodicField shifted_c = base.c;
  for (auto& v : shifted_c.component(0)) v += 0.7;
  const auto shifted = ProblemCoefficients::make(base.A, base.b, shifted_c, base.mu);
  const CellEigenSolution s1 = find_bloch_parameter(shifted);

  CHECK(std::abs(s1.lambda - (s0.lambda + 0.7)) <= 1e-8);
  CHECK(std::abs(s1.theta[0] - s0.theta[0]) <= 1e-8);
  double dev = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    dev = std::max(dev, std::abs(s1.psi.value(0, k) - s0.psi.value(0, k)));
  CHECK(dev <= 1e-8);
}

TEST_CASE("direct and adjoint eigenvalues agree along the solve") {
  const TorusGrid g(1, 64);
  const CellEigenSolution sol = find_bloch_parameter(presets::drift_var_1d(g));
  CHECK(sol.residuals.lambda_gap <= 1e-8 * (1.0 + std::abs(sol.lambda)));
  CHECK(sol.residuals.direct <= 1e-7);
  CHECK(sol.residuals.adjoint <= 1e-7);
  double pairing = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    pairing += sol.psi.value(0, k) * sol.psi_star.value(0, k);
  pairing /= static_cast<double>(g.num_nodes());
  CHECK(std::abs(pairing - 1.0) <= 1e-8);
}
