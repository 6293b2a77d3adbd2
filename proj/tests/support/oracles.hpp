// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles, independent of the solver paths they check:
//  - symbolic trigonometric polynomials (exact derivatives/integrals)
//  - dense full-spectrum eigensolver for the assembled cell operator
//  - 1D quadrature for the corrector closed forms

#ifndef PARAHOM_TESTS_ORACLES_HPP
#define PARAHOM_TESTS_ORACLES_HPP

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "parahom/cell_spectral.hpp"
#include "parahom/torus_field.hpp"

namespace parahom::testing {

constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Sum of cosine modes a cos(2 pi k.y + phase); closed under differentiation.
struct TrigPoly {
  struct Mode {
    std::array<int, 3> k{0, 0, 0};
    double amp = 0.0;
    double phase = 0.0;
  };
  int dim = 1;
  std::vector<Mode> modes;

  double operator()(const std::array<double, 3>& y) const {
    double v = 0.0;
    for (const Mode& m : modes) {
      double arg = m.phase;
      for (int a = 0; a < dim; ++a)
        arg += kTwoPi * m.k[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(a)];
      v += m.amp * std::cos(arg);
    }
    return v;
  }

  /// d/dy_axis: cos -> -2 pi k sin = 2 pi k cos(. + pi/2)
  TrigPoly derivative(int axis) const {
    TrigPoly d = *this;
    for (Mode& m : d.modes) {
      m.amp *= kTwoPi * m.k[static_cast<std::size_t>(axis)];
      m.phase += kTwoPi / 4.0;
    }
    return d;
  }

  /// Exact cell average: only the k = 0 modes survive.
  double cell_average() const {
    double v = 0.0;
    for (const Mode& m : modes) {
      bool zero = true;
      for (int a = 0; a < dim; ++a)
        if (m.k[static_cast<std::size_t>(a)] != 0) zero = false;
      if (zero) v += m.amp * std::cos(m.phase);
    }
    return v;
  }

  static TrigPoly random(int dim, int max_mode, int count, std::mt19937_64& rng,
                         double amp_scale = 1.0) {
    TrigPoly p;
    p.dim = dim;
    for (int q = 0; q < count; ++q) {
      Mode m;
      for (int a = 0; a < dim; ++a)
        m.k[static_cast<std::size_t>(a)] =
            static_cast<int>(uniform01(rng) * (2 * max_mode + 1)) - max_mode;
      m.amp = amp_scale * (2.0 * uniform01(rng) - 1.0);
      m.phase = kTwoPi * uniform01(rng);
      p.modes.push_back(m);
    }
    return p;
  }

  PeriodicField sample(const TorusGrid& g) const {
    return PeriodicField::sample_scalar(g, [this](const std::array<double, 3>& y) {
      return (*this)(y);
    });
  }
};

struct DensePrincipal {
  double lambda = 0.0;
  double imag_part = 0.0;
  double gap = 0.0;  // distance of the real parts of the two smallest
  Eigen::VectorXd eigenvector;
};

/// Assembles the spectrally discretized cell operator column by column and
/// takes its full dense spectrum. The operator acts on the de-aliased
/// subspace (no Nyquist content) and annihilates its complement, so the
/// spectrum carries exact zeros for the complement; the principal eigenvalue
/// is the smallest real part among eigenvectors living in the subspace.
inline DensePrincipal dense_principal_eigenvalue(const ProblemCoefficients& coeffs,
                                                 std::span<const double> theta,
                                                 EigenSide side) {
  const TorusGrid& g = coeffs.grid();
  const std::size_t N = g.num_nodes();
  Eigen::MatrixXd L(N, N);
  std::vector<double> e(N, 0.0), col(N, 0.0);
  for (std::size_t j = 0; j < N; ++j) {
    e[j] = 1.0;
    apply_cell_operator(coeffs, theta, side, e, col);
    for (std::size_t i = 0; i < N; ++i) L(static_cast<long>(i), static_cast<long>(j)) = col[i];
    e[j] = 0.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(L);
  const auto& ev = es.eigenvalues();

  auto genuine = [&](long i) {
    PeriodicField v(g, FieldRank::Scalar);
    double norm = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double re = es.eigenvectors()(static_cast<long>(k), i).real();
      v.value(0, k) = re;
      norm += re * re;
    }
    if (norm == 0.0) return false;
    const PeriodicField f = drop_nyquist(v);
    double fn = 0.0;
    for (std::size_t k = 0; k < N; ++k) fn += f.value(0, k) * f.value(0, k);
    return fn >= 0.25 * norm;
  };

  long best = -1, second = -1;
  for (long i = 0; i < ev.size(); ++i) {
    if (!genuine(i)) continue;
    if (best < 0 || ev(i).real() < ev(best).real()) {
      second = best;
      best = i;
    } else if (second < 0 || ev(i).real() < ev(second).real()) {
      second = i;
    }
  }
  DensePrincipal out;
  out.lambda = ev(best).real();
  out.imag_part = std::abs(ev(best).imag());
  out.gap = second >= 0 ? ev(second).real() - ev(best).real() : 0.0;
  out.eigenvector = es.eigenvectors().col(best).real();
  return out;
}

/// Composite-Simpson quadrature on [0, x] for smooth 1D integrands.
template <class F>
double simpson(F&& f, double a, double b, int panels = 4096) {
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

} // namespace parahom::testing

#endif
