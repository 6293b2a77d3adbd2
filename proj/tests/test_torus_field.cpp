// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <random>

#include "parahom/torus_field.hpp"
#include "support/oracles.hpp"

using namespace parahom;
using namespace parahom::testing;

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(TorusGrid(0, 64), InvalidArgument);
  CHECK_THROWS_AS(TorusGrid(4, 64), InvalidArgument);
  CHECK_THROWS_AS(TorusGrid(1, 48), InvalidArgument);
  CHECK_THROWS_AS(TorusGrid(1, 4), InvalidArgument);
  const TorusGrid g(2, 16);
  CHECK(g.num_nodes() == 256);
  CHECK(g.stride(0) == 16);
  CHECK(g.stride(1) == 1);
}

TEST_CASE("spectral derivative of a single mode is exact") {
  const TorusGrid g(1, 64);
  const auto f = PeriodicField::sample_scalar(
      g, [](const std::array<double, 3>& y) { return std::sin(kTwoPi * y[0]); });
  const auto df = spectral_derivative(f, 0);
  double err = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    const double y = g.coords(k)[0];
    err = std::max(err, std::abs(df.value(0, k) - kTwoPi * std::cos(kTwoPi * y)));
  }
  CHECK(err <= 1e-10);
}

TEST_CASE("derivative of a constant vanishes") {
  const TorusGrid g(2, 16);
  const auto f = PeriodicField::constant_scalar(g, 1.0);
  for (int axis = 0; axis < 2; ++axis) CHECK(max_abs(spectral_derivative(f, axis)) <= 1e-14);
}

TEST_CASE("derivative errors") {
  const TorusGrid g(1, 16);
  const auto f = PeriodicField::constant_scalar(g, 1.0);
  CHECK_THROWS_AS(spectral_derivative(f, 1), InvalidArgument);
  PeriodicField bad = f;
  bad.value(0, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(spectral_derivative(bad, 0), NonFiniteState);
}

TEST_CASE("random trig polynomials match the symbolic derivative oracle") {
  std::mt19937_64 rng(7);
  for (int dim = 1; dim <= 3; ++dim) {
    const int n = dim == 3 ? 16 : 32;
    const TorusGrid g(dim, n);
    const TrigPoly p = TrigPoly::random(dim, n / 4, 5, rng);
    const auto f = p.sample(g);
    for (int axis = 0; axis < dim; ++axis) {
      const TrigPoly dp = p.derivative(axis);
      const auto df = spectral_derivative(f, axis);
      double err = 0.0;
      for (std::size_t k = 0; k < g.num_nodes(); ++k)
        err = std::max(err, std::abs(df.value(0, k) - dp(g.coords(k))));
      CHECK(err <= 1e-10);
    }
  }
}

TEST_CASE("cell averages") {
  const TorusGrid g(1, 256);
  const auto s = PeriodicField::sample_scalar(
      g, [](const std::array<double, 3>& y) { return std::sin(kTwoPi * y[0]); });
  CHECK(std::abs(cell_average(s)) <= 1e-14);
  CHECK(cell_average(PeriodicField::constant_scalar(g, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));

  // analytic integral of 1/(1 + a sin 2 pi y) is 1/sqrt(1 - a^2)
  const auto f = PeriodicField::sample_scalar(g, [](const std::array<double, 3>& y) {
    return 1.0 / (1.0 + 0.5 * std::sin(kTwoPi * y[0]));
  });
  const double exact = 1.0 / std::sqrt(1.0 - 0.25);
  CHECK(std::abs(cell_average(f) - exact) <= 1e-10);
}

TEST_CASE("cell poisson solve: single mode and zero") {
  const TorusGrid g(1, 64);
  const auto rhs = PeriodicField::sample_scalar(
      g, [](const std::array<double, 3>& y) { return std::sin(kTwoPi * y[0]); });
  const auto u = solve_cell_poisson(rhs);
  double err = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    const double y = g.coords(k)[0];
    err = std::max(err, std::abs(u.value(0, k) + std::sin(kTwoPi * y) / (kTwoPi * kTwoPi)));
  }
  CHECK(err <= 1e-12);
  CHECK(max_abs(solve_cell_poisson(PeriodicField(g, FieldRank::Scalar))) == 0.0);
  CHECK_THROWS_AS(solve_cell_poisson(PeriodicField::constant_scalar(g, 0.5)), NonZeroMean);
}

TEST_CASE("cell poisson residual oracle on random zero-mean trig data") {
  std::mt19937_64 rng(11);
  for (int dim : {1, 2}) {
    const TorusGrid g(dim, 32);
    TrigPoly p = TrigPoly::random(dim, 4, 6, rng);
    auto rhs = p.sample(g);
    const double mean = cell_average(rhs);
    for (auto& v : rhs.component(0)) v -= mean;

    const auto u = solve_cell_poisson(rhs);
    CHECK(std::abs(cell_average(u)) <= 1e-12);

    PeriodicField lap(g, FieldRank::Scalar);
    for (int a = 0; a < dim; ++a) {
      const auto d2 = spectral_derivative(spectral_derivative(u, a), a);
      for (std::size_t k = 0; k < g.num_nodes(); ++k) lap.value(0, k) += d2.value(0, k);
    }
    double err = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      err = std::max(err, std::abs(lap.value(0, k) - rhs.value(0, k)));
    CHECK(err <= 1e-10);
  }
}

TEST_CASE("periodicity and linearity properties") {
  std::mt19937_64 rng(13);
  const TorusGrid g(2, 32);
  const TrigPoly pa = TrigPoly::random(2, 6, 5, rng);
  const TrigPoly pb = TrigPoly::random(2, 6, 5, rng);
  const auto fa = pa.sample(g);
  const auto fb = pb.sample(g);

  for (int axis = 0; axis < 2; ++axis) {
    CHECK(std::abs(cell_average(spectral_derivative(fa, axis))) <= 1e-12);

    PeriodicField combo(g, FieldRank::Scalar);
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      combo.value(0, k) = 2.5 * fa.value(0, k) - 0.75 * fb.value(0, k);
    const auto dc = spectral_derivative(combo, axis);
    const auto da = spectral_derivative(fa, axis);
    const auto db = spectral_derivative(fb, axis);
    double err = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      err = std::max(err, std::abs(dc.value(0, k) -
                                   (2.5 * da.value(0, k) - 0.75 * db.value(0, k))));
    CHECK(err <= 1e-11);
  }
}

TEST_CASE("poisson inverts the spectral laplacian on zero-mean band-limited fields") {
  std::mt19937_64 rng(17);
  const TorusGrid g(2, 32);
  TrigPoly p = TrigPoly::random(2, 6, 5, rng);
  auto f = p.sample(g);
  const double mean = cell_average(f);
  for (auto& v : f.component(0)) v -= mean;

  PeriodicField lap(g, FieldRank::Scalar);
  for (int a = 0; a < 2; ++a) {
    const auto d2 = spectral_derivative(spectral_derivative(f, a), a);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) lap.value(0, k) += d2.value(0, k);
  }
  const auto back = solve_cell_poisson(lap);
  double err = 0.0;
  for (std::size_t k = 0; k < g.num_nodes(); ++k)
    err = std::max(err, std::abs(back.value(0, k) - f.value(0, k)));
  CHECK(err <= 1e-10);
}

TEST_CASE("trig interpolant reproduces samples and band-limited values") {
  std::mt19937_64 rng(19);
  const TorusGrid g(2, 16);
  const TrigPoly p = TrigPoly::random(2, 3, 4, rng);
  const auto f = p.sample(g);
  const TrigInterpolant interp(f);

  for (std::size_t k = 0; k < g.num_nodes(); k += 37) {
    const auto y = g.coords(k);
    CHECK(std::abs(interp(std::span<const double>(y.data(), 2)) - f.value(0, k)) <= 1e-12);
  }
  for (int q = 0; q < 10; ++q) {
    const std::array<double, 3> y{uniform01(rng), uniform01(rng), 0.0};
    CHECK(std::abs(interp(std::span<const double>(y.data(), 2)) - p(y)) <= 1e-11);
  }
}

TEST_CASE("csv round trip is exact; aliasing flag trips on rough data") {
  const TorusGrid g(2, 16);
  std::mt19937_64 rng(23);
  const auto f = PeriodicField::sample_vector(g, [&](const std::array<double, 3>& y) {
    return std::array<double, 3>{std::sin(kTwoPi * y[0]), std::cos(kTwoPi * y[1])};
  });
  const auto dir = std::filesystem::temp_directory_path() / "parahom_test_csv";
  std::filesystem::create_directories(dir);
  const auto path = dir / "field.csv";
  export_csv_field(path, f, {"b1", "b2"});
  const auto imported = import_csv_field(path, 2, FieldRank::Vector);
  REQUIRE(imported.field.num_nodes() == f.num_nodes());
  for (int c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      CHECK(imported.field.value(c, k) == f.value(c, k));
  CHECK_FALSE(imported.aliasing_risk);

  // top-of-spectrum content must trip the aliasing gauge
  const auto rough = PeriodicField::sample_scalar(g, [&](const std::array<double, 3>& y) {
    return std::cos(kTwoPi * 7.0 * y[0]);
  });
  const auto rough_path = dir / "rough.csv";
  export_csv_field(rough_path, rough, {"v"});
  CHECK(import_csv_field(rough_path, 2, FieldRank::Scalar).aliasing_risk);
}
