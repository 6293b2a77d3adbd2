// SPDX-License-Identifier: Apache-2.0
//
// Factorized coefficient set sigma, alpha, beta, the skew-symmetric potential
// B with beta = -div B, and M = alpha + B; plus the nondivergence-form
// front-end that rewrites (K, q, r) as (A, b, c).

#ifndef PARAHOM_FACTORIZE_HPP
#define PARAHOM_FACTORIZE_HPP

#include "parahom/cell_spectral.hpp"
#include "parahom/torus_field.hpp"

namespace parahom {

struct FactorizedModel {
  PeriodicField sigma;  // psi psi*, scalar
  PeriodicField alpha;  // sigma A, matrix
  PeriodicField beta;   // effective drift, vector
  PeriodicField B;      // skew-symmetric potential, matrix
  PeriodicField M;      // alpha + B, matrix
  double ellipticity_b = 0.0;  // mu * min sigma
};

/// beta per the phi/phi* pairing at the solution's theta. Delegates to the
/// single assembly path in cell_spectral.
PeriodicField build_beta(const ProblemCoefficients& coeffs,
                         const CellEigenSolution& eig);

/// Solves Laplace(u_i) = beta_i componentwise and sets
/// B_ij = d_i u_j - d_j u_i, so that -div B = beta (row-wise divergence).
/// Requires |integral beta| <= 1e-8 and ||div beta||_inf <= 1e-8.
PeriodicField build_skew_potential(const PeriodicField& beta);

FactorizedModel build_factorized_model(const ProblemCoefficients& coeffs,
                                       const CellEigenSolution& eig);

struct NondivergenceCoefficients {
  PeriodicField K;  // symmetric matrix
  PeriodicField q;  // vector
  PeriodicField r;  // scalar
  double ellipticity = 0.0;

  static NondivergenceCoefficients make(PeriodicField K, PeriodicField q,
                                        PeriodicField r, double ellipticity);
};

/// A = K, b = div_y K + q (row-wise divergence), c = r.
ProblemCoefficients nondivergence_frontend(const NondivergenceCoefficients& ndc);

} // namespace parahom

#endif
