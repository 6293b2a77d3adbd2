// SPDX-License-Identifier: Apache-2.0
//
// Direct and adjoint exponential cell eigenvalue problems parameterized by
// the Bloch vector theta, and the Newton search for the unique theta that
// kills the effective drift.

#ifndef PARAHOM_CELL_SPECTRAL_HPP
#define PARAHOM_CELL_SPECTRAL_HPP

#include <array>
#include <span>
#include <utility>

#include "parahom/torus_field.hpp"

namespace parahom {

/// Cell coefficients (A, b, c) with ellipticity constant mu. The symmetric
/// part of A must satisfy A_sym(y) >= mu at every node.
struct ProblemCoefficients {
  PeriodicField A; // matrix
  PeriodicField b; // vector
  PeriodicField c; // scalar
  double mu = 0.0;

  int dim() const { return A.grid().dim; }
  const TorusGrid& grid() const { return A.grid(); }

  /// Validating factory; throws InvalidArgument on grid mismatch or loss of
  /// nodewise ellipticity.
  static ProblemCoefficients make(PeriodicField A, PeriodicField b,
                                  PeriodicField c, double mu);
};

enum class EigenSide { Direct, Adjoint };

/// Applies the periodic operator obtained from the exponential eigenvalue
/// problem by the substitution psi = e^{2 pi theta . y} p (direct side) or
/// psi* = e^{-2 pi theta . y} p* (adjoint side). Exposed so tests can
/// assemble the same operator densely.
void apply_cell_operator(const ProblemCoefficients& coeffs,
                         std::span<const double> theta, EigenSide side,
                         std::span<const double> p, std::span<double> out);

struct EigenpairOptions {
  double shift_estimate = 0.0;      // inverse iteration shift = estimate - 1
  const PeriodicField* warm_start = nullptr;
  double eig_tol = 1e-10;           // relative eigenvalue tolerance
  long max_iterations = 10000;
  double linear_tol = 1e-12;        // shifted Krylov solve tolerance
};

struct Eigenpair {
  double lambda = 0.0;
  PeriodicField eigenfunction;      // strictly positive, sup-normalized to 1
  double residual = 0.0;            // ||L p - lambda p||_2 / ||p||_2
  long iterations = 0;
};

/// Principal (smallest-real-part, simple) eigenpair by shifted inverse power
/// iteration on the spectrally discretized operator.
Eigenpair principal_eigenpair(const ProblemCoefficients& coeffs,
                              std::span<const double> theta, EigenSide side,
                              const EigenpairOptions& opts = {});

/// Sign-fixes both inputs to be positive and rescales so that
/// integral(psi psi*) = 1 with equal L2 norms (deterministic convention).
std::pair<PeriodicField, PeriodicField> normalize_pair(const PeriodicField& psi,
                                                       const PeriodicField& psi_star);

/// beta(y) = psi psi* b + psi A^T grad(psi*) - psi* A grad(psi), assembled
/// from the periodic parts and theta (the exponential factors cancel in
/// every product). Single assembly path shared with module factorize.
PeriodicField assemble_effective_drift(const ProblemCoefficients& coeffs,
                                       std::span<const double> theta,
                                       const PeriodicField& psi,
                                       const PeriodicField& psi_star);

struct EigenResiduals {
  double direct = 0.0;
  double adjoint = 0.0;
  double lambda_gap = 0.0;  // |lambda_direct - lambda_adjoint|
  double drift_mean = 0.0;  // max_j |integral beta_j|
};

struct CellEigenSolution {
  std::array<double, 3> theta{0.0, 0.0, 0.0};
  double lambda = 0.0;
  PeriodicField psi;       // periodic part of the direct eigenfunction
  PeriodicField psi_star;  // periodic part of the adjoint eigenfunction
  double lower_bound_a = 0.0;
  EigenResiduals residuals;
  int dim() const { return psi.grid().dim; }
};

struct BlochOptions {
  double drift_tol = 1e-8;   // componentwise |integral beta| target
  int max_newton_steps = 50;
  double fd_step = 1e-5;     // finite-difference Jacobian step
  int max_halvings = 20;
  EigenpairOptions eigen{};
};

/// Damped Newton iteration on F(theta) = integral_Y beta_theta, starting at
/// theta = 0. Returns the normalized solution at the root.
CellEigenSolution find_bloch_parameter(const ProblemCoefficients& coeffs,
                                       const BlochOptions& opts = {});

} // namespace parahom

#endif
