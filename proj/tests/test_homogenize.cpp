// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "parahom/homogenize.hpp"
#include "parahom/presets.hpp"
#include "support/oracles.hpp"

using namespace parahom;
using namespace parahom::testing;

namespace {

// Independent 1D oracle: Theta (omega' + 1) = const = harmonic mean, so
// omega(y) = int_0^y (Theta_h / Theta - 1), de-meaned.
double corrector_oracle_1d(double y) {
  auto theta = [](double s) { return 1.0 / (1.0 + 0.5 * std::sin(kTwoPi * s)); };
  const double theta_h = 1.0 / simpson([&](double s) { return 1.0 / theta(s); }, 0.0, 1.0);
  const double raw = simpson([&](double s) { return theta_h / theta(s) - 1.0; }, 0.0, y,
                             std::max(16, static_cast<int>(4096 * y) / 2 * 2 + 16));
  // mean of the raw primitive over [0,1]
  static const double mean = [] {
    auto th = [](double s) { return 1.0 / (1.0 + 0.5 * std::sin(kTwoPi * s)); };
    const double th_h = 1.0 / simpson([&](double s) { return 1.0 / th(s); }, 0.0, 1.0);
    return simpson(
        [&](double yy) {
          return simpson([&](double s) { return th_h / th(s) - 1.0; }, 0.0, yy,
                         std::max(16, static_cast<int>(2048 * yy) / 2 * 2 + 16));
        },
        0.0, 1.0, 512);
  }();
  return raw - mean;
}

} // namespace

TEST_CASE("oracle self-check: quadrature matches the closed form -cos(2 pi y)/(4 pi)") {
  for (double y : {0.1, 0.33, 0.5, 0.77}) {
    const double closed = -std::cos(kTwoPi * y) / (2.0 * kTwoPi);
    CHECK(std::abs(corrector_oracle_1d(y) - closed) <= 1e-8);
  }
}

TEST_CASE("corrector vanishes for constant tensors") {
  const TorusGrid g(2, 16);
  const auto gc = GeneralCoefficients::make(
      PeriodicField::constant_scalar(g, 1.0),
      PeriodicField::sample_matrix(g,
                                   [](const std::array<double, 3>&) {
                                     return std::array<double, 9>{2.0, 0.3, 0.3, 1.0};
                                   }),
      0.5);
  for (int j = 0; j < 2; ++j) {
    const auto cs = solve_corrector(gc, j);
    CHECK(max_abs(cs.omega) <= 1e-12);
  }
  const auto em = build_effective_model(gc);
  CHECK(em.tensor_h(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(em.tensor_h(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(max_abs(em.flux) <= 1e-12);
}

TEST_CASE("1d oscillatory corrector matches the quadrature oracle") {
  const TorusGrid g(1, 256);
  const auto gc = presets::oscillatory_1d(g);
  const auto cs = solve_corrector(gc, 0);
  double err = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); k += 8) {
    const double y = g.coords(k)[0];
    err = std::max(err, std::abs(cs.omega.value(0, k) + std::cos(kTwoPi * y) / (2.0 * kTwoPi)));
  }
  CHECK(err <= 1e-8);

  double zmean = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    zmean += gc.zeta.value(0, k) * cs.omega.value(0, k);
  zmean /= static_cast<double>(g.num_nodes());
  CHECK(std::abs(zmean) <= 1e-12);
}

TEST_CASE("harmonic mean in 1d and the layered 2d tensor") {
  {
    const TorusGrid g(1, 256);
    const auto em = build_effective_model(presets::oscillatory_1d(g));
    CHECK(std::abs(em.tensor_h(0, 0) - 1.0) <= 1e-8);
  }
  {
    const TorusGrid g(2, 64);
    const auto em = build_effective_model(presets::layered_2d(g));
    const double arith = 1.0 / std::sqrt(0.75);
    CHECK(std::abs(em.tensor_h(0, 0) - 1.0) <= 1e-6);
    CHECK(std::abs(em.tensor_h(1, 1) - arith) <= 1e-6);
    CHECK(std::abs(em.tensor_h(0, 1)) <= 1e-8);
    CHECK(std::abs(em.tensor_h(1, 0)) <= 1e-8);
  }
}

TEST_CASE("normalization weight only shifts the corrector by a constant") {
  const TorusGrid g(1, 64);
  const auto gc = presets::oscillatory_zeta_1d(g);
  CorrectorOptions plain;
  plain.weight = CorrectorWeight::Plain;
  const auto om_zeta = solve_corrector(gc, 0).omega;
  const auto om_plain = solve_corrector(gc, 0, plain).omega;

  const double shift = om_zeta.value(0, 0) - om_plain.value(0, 0);
  double dev = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    dev = std::max(dev, std::abs(om_zeta.value(0, k) - om_plain.value(0, k) - shift));
  CHECK(dev <= 1e-10);

  // and the homogenized tensor is unchanged
  const auto th_zeta = homogenized_tensor(gc, {om_zeta});
  const auto th_plain = homogenized_tensor(gc, {om_plain});
  CHECK(std::abs(th_zeta(0, 0) - th_plain(0, 0)) <= 1e-12);
}

TEST_CASE("flux corrector: antisymmetry and the divergence identity") {
  const TorusGrid g(2, 32);
  // smooth symmetric oscillatory tensor
  const auto gc = GeneralCoefficients::make(
      PeriodicField::constant_scalar(g, 1.0),
      PeriodicField::sample_matrix(g,
                                   [](const std::array<double, 3>& y) {
                                     const double s =
                                         0.3 * std::sin(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
                                     const double o = 0.1 * std::sin(kTwoPi * (y[0] + y[1]));
                                     return std::array<double, 9>{1.0 + s, o, o, 1.2 - s};
                                   }),
      0.4);
  const auto em = build_effective_model(gc);

  double skew = 0.0;
  for (std::size_t m = 0; m < g.num_nodes(); ++m)
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          skew = std::max(skew, std::abs(em.flux.value(em.flux.r3(k, i, j), m) +
                                         em.flux.value(em.flux.r3(i, k, j), m)));
  CHECK(skew <= 1e-10);
  CHECK(em.diagnostics.flux_identity_residual <= 1e-8);

  // zeta = 1 with symmetric Theta: the homogenized tensor is symmetric
  CHECK(std::abs(em.tensor_h(0, 1) - em.tensor_h(1, 0)) <= 1e-8);

  // harmonic-mean lower bound for the symmetric part
  double harm = 0.0;
  for (std::size_t m = 0; m < g.num_nodes(); ++m) {
    const double a = gc.Theta.value(gc.Theta.mat(0, 0), m);
    const double b = 0.5 * (gc.Theta.value(gc.Theta.mat(0, 1), m) +
                            gc.Theta.value(gc.Theta.mat(1, 0), m));
    const double c = gc.Theta.value(gc.Theta.mat(1, 1), m);
    const double mineig = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    harm += 1.0 / mineig;
  }
  harm = static_cast<double>(g.num_nodes()) / harm;
  const double ta = em.tensor_h(0, 0), tb = em.tensor_h(0, 1), tc = em.tensor_h(1, 1);
  const double tmin = 0.5 * (ta + tc) - std::sqrt(0.25 * (ta - tc) * (ta - tc) + tb * tb);
  CHECK(tmin >= harm - 1e-8);
}

TEST_CASE("flux corrector vanishes in 1d") {
  const TorusGrid g(1, 64);
  const auto em = build_effective_model(presets::oscillatory_1d(g));
  CHECK(em.flux.components() == 1);
  CHECK(max_abs(em.flux) == 0.0);
}

TEST_CASE("section-1 chain reproduces the classical tensor when b = c = 0") {
  const TorusGrid g(2, 32);
  const auto coeffs = presets::classical(g);
  const CellEigenSolution eig = find_bloch_parameter(coeffs);
  const auto gc = GeneralCoefficients::from_factorized(build_factorized_model(coeffs, eig));
  const auto em = build_effective_model(gc);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(em.tensor_h(i, j) - (i == j ? 1.0 : 0.0)) <= 1e-8);
}

TEST_CASE("spectral convergence under grid refinement") {
  const auto em64 = build_effective_model(presets::oscillatory_1d(TorusGrid(1, 64)));
  const auto em128 = build_effective_model(presets::oscillatory_1d(TorusGrid(1, 128)));
  CHECK(std::abs(em64.tensor_h(0, 0) - em128.tensor_h(0, 0)) <= 1e-8);
}

TEST_CASE("coefficient validation") {
  const TorusGrid g(1, 16);
  CHECK_THROWS_AS(GeneralCoefficients::make(
                      PeriodicField::constant_scalar(g, 1.1),  // mean != 1
                      PeriodicField::sample_matrix(g,
                                                   [](const std::array<double, 3>&) {
                                                     return std::array<double, 9>{1.0};
                                                   }),
                      0.5),
                  NonZeroMean);
  CHECK_THROWS_AS(GeneralCoefficients::make(
                      PeriodicField::constant_scalar(g, 1.0),
                      PeriodicField::sample_matrix(g,
                                                   [](const std::array<double, 3>&) {
                                                     return std::array<double, 9>{0.1};
                                                   }),
                      0.5),
                  InvalidArgument);
}
