// SPDX-License-Identifier: Apache-2.0

#include "parahom/factorize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace parahom {

PeriodicField build_beta(const ProblemCoefficients& coeffs,
                         const CellEigenSolution& eig) {
  return assemble_effective_drift(coeffs,
                                  std::span<const double>(eig.theta.data(), 3),
                                  eig.psi, eig.psi_star);
}

PeriodicField build_skew_potential(const PeriodicField& beta) {
  if (beta.rank() != FieldRank::Vector)
    throw InvalidArgument("build_skew_potential: vector field expected");
  const TorusGrid& g = beta.grid();
  const int d = g.dim;

  for (int i = 0; i < d; ++i)
    if (std::abs(cell_average(beta, i)) > 1e-8)
      throw NonZeroMean("build_skew_potential: beta has nonzero average");
  if (max_abs(divergence(beta)) > 1e-8)
    throw NotDivergenceFree("build_skew_potential: input beta is not divergence-free");

  PeriodicField B(g, FieldRank::Matrix);
  if (d == 1) return B;  // no nonzero skew-symmetric 1x1 field

  std::vector<PeriodicField> u;
  u.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    PeriodicField rhs = component_field(beta, i);
    const double mean = cell_average(rhs);
    for (auto& v : rhs.component(0)) v -= mean;
    u.push_back(solve_cell_poisson(rhs));
  }

  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const PeriodicField diuj = spectral_derivative(u[static_cast<std::size_t>(j)], i);
      const PeriodicField djui = spectral_derivative(u[static_cast<std::size_t>(i)], j);
      auto bij = B.component(B.mat(i, j));
      auto bji = B.component(B.mat(j, i));
      for (std::size_t k = 0; k < g.num_nodes(); ++k) {
        const double v = diuj.value(0, k) - djui.value(0, k);
        bij[k] = v;
        bji[k] = -v;
      }
    }

  // -div B = beta must hold to working precision
  const PeriodicField div_b = row_divergence(B);
  double res = 0.0;
  for (int i = 0; i < d; ++i) {
    const auto bi = beta.component(i);
    const auto di = div_b.component(i);
    for (std::size_t k = 0; k < g.num_nodes(); ++k)
      res = std::max(res, std::abs(bi[k] + di[k]));
  }
  if (res > 1e-8)
    throw NotDivergenceFree("build_skew_potential: residual ||beta + div B|| = " +
                            std::to_string(res));
  return B;
}

FactorizedModel build_factorized_model(const ProblemCoefficients& coeffs,
                                       const CellEigenSolution& eig) {
  require_same_grid(eig.psi, coeffs.A, "build_factorized_model");
  const TorusGrid& g = coeffs.grid();
  const int d = g.dim;
  const std::size_t N = g.num_nodes();

  FactorizedModel fm;
  fm.sigma = PeriodicField(g, FieldRank::Scalar);
  for (std::size_t k = 0; k < N; ++k)
    fm.sigma.value(0, k) = eig.psi.value(0, k) * eig.psi_star.value(0, k);

  fm.alpha = PeriodicField(g, FieldRank::Matrix);
  for (int c = 0; c < d * d; ++c) {
    const auto a = coeffs.A.component(c);
    auto out = fm.alpha.component(c);
    for (std::size_t k = 0; k < N; ++k) out[k] = fm.sigma.value(0, k) * a[k];
  }

  fm.beta = build_beta(coeffs, eig);
  fm.B = build_skew_potential(fm.beta);

  fm.M = PeriodicField(g, FieldRank::Matrix);
  for (int c = 0; c < d * d; ++c) {
    const auto a = fm.alpha.component(c);
    const auto b = fm.B.component(c);
    auto out = fm.M.component(c);
    for (std::size_t k = 0; k < N; ++k) out[k] = a[k] + b[k];
  }

  fm.ellipticity_b = coeffs.mu * min_value(fm.sigma);
  if (!(fm.ellipticity_b > 0.0))
    throw NonPositiveEigenfunction("build_factorized_model: sigma lost positivity");
  return fm;
}

NondivergenceCoefficients NondivergenceCoefficients::make(PeriodicField K,
                                                          PeriodicField q,
                                                          PeriodicField r,
                                                          double ellipticity) {
  if (K.rank() != FieldRank::Matrix || q.rank() != FieldRank::Vector ||
      r.rank() != FieldRank::Scalar)
    throw InvalidArgument("NondivergenceCoefficients: ranks must be matrix/vector/scalar");
  require_same_grid(K, q, "NondivergenceCoefficients");
  require_same_grid(K, r, "NondivergenceCoefficients");
  const int d = K.grid().dim;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const auto kij = K.component(K.mat(i, j));
      const auto kji = K.component(K.mat(j, i));
      for (std::size_t k = 0; k < K.num_nodes(); ++k)
        if (std::abs(kij[k] - kji[k]) > 1e-10)
          throw NotSymmetric("NondivergenceCoefficients: K is not symmetric");
    }
  if (ellipticity <= 0.0)
    throw InvalidArgument("NondivergenceCoefficients: ellipticity must be positive");
  return NondivergenceCoefficients{std::move(K), std::move(q), std::move(r), ellipticity};
}

ProblemCoefficients nondivergence_frontend(const NondivergenceCoefficients& ndc) {
  const TorusGrid& g = ndc.K.grid();
  PeriodicField b = row_divergence(ndc.K);
  for (int i = 0; i < g.dim; ++i) {
    auto bi = b.component(i);
    const auto qi = ndc.q.component(i);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) bi[k] += qi[k];
  }
  return ProblemCoefficients::make(ndc.K, std::move(b), ndc.r, ndc.ellipticity);
}

} // namespace parahom
