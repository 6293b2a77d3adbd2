// SPDX-License-Identifier: Apache-2.0
//
// Corrector cell problems, homogenized tensor assembly and the third-order
// anti-symmetric flux corrector.

#ifndef PARAHOM_HOMOGENIZE_HPP
#define PARAHOM_HOMOGENIZE_HPP

#include <array>
#include <filesystem>
#include <vector>

#include "parahom/factorize.hpp"
#include "parahom/torus_field.hpp"

namespace parahom {

/// Constant d x d tensor (stored with stride 3 for any d <= 3).
struct ConstTensor {
  int dim = 1;
  std::array<double, 9> v{};

  explicit ConstTensor(int d = 1) : dim(d) {}
  double& operator()(int i, int j) { return v[static_cast<std::size_t>(i * 3 + j)]; }
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(i * 3 + j)]; }
  static ConstTensor identity(int d);
};

/// (zeta, Theta) with integral(zeta) = 1 and Theta elliptic with constant
/// kappa, the general coefficients of the section-2 problem.
struct GeneralCoefficients {
  PeriodicField zeta;
  PeriodicField Theta;
  double kappa = 0.0;

  int dim() const { return Theta.grid().dim; }
  const TorusGrid& grid() const { return Theta.grid(); }

  static GeneralCoefficients make(PeriodicField zeta, PeriodicField Theta,
                                  double kappa);
  /// Section-1 pipeline feed: zeta = sigma, Theta = M, kappa = ellipticity_b.
  static GeneralCoefficients from_factorized(const FactorizedModel& fm);
};

/// Normalization weight for the corrector average: Eq-13 style (plain
/// average) or Eq-19 style (zeta-weighted). The two solutions differ by an
/// additive constant only.
enum class CorrectorWeight { Plain, Zeta };

struct CorrectorOptions {
  CorrectorWeight weight = CorrectorWeight::Zeta;
  double tol = 1e-10;
  long max_iterations = 20000;
};

struct CorrectorSolve {
  PeriodicField omega;
  double relative_residual = 0.0;
  long iterations = 0;
};

/// Solves div(Theta grad(omega_j + y_j)) = 0 with the weighted average of
/// omega_j set to zero.
CorrectorSolve solve_corrector(const GeneralCoefficients& gc, int j,
                               const CorrectorOptions& opts = {});

/// Theta_h = integral(Theta + Theta grad(omega)).
ConstTensor homogenized_tensor(const GeneralCoefficients& gc,
                               const std::vector<PeriodicField>& correctors);

/// phi_kij with d_k phi_kij = (Theta + Theta grad omega - Theta_h)_ij and
/// phi_kij = -phi_ikj, built by the skew-potential construction per column.
PeriodicField flux_corrector(const GeneralCoefficients& gc,
                             const std::vector<PeriodicField>& correctors,
                             const ConstTensor& tensor_h);

struct EffectiveDiagnostics {
  std::vector<double> corrector_residuals;
  std::vector<long> corrector_iterations;
  double flux_identity_residual = 0.0;
  double max_weighted_mean = 0.0;  // max_j |integral(w omega_j)| post solve
};

struct EffectiveModel {
  std::vector<PeriodicField> correctors;
  ConstTensor tensor_h{1};
  PeriodicField flux;  // rank-3
  CorrectorWeight weight = CorrectorWeight::Zeta;
  EffectiveDiagnostics diagnostics;
};

EffectiveModel build_effective_model(const GeneralCoefficients& gc,
                                     const CorrectorOptions& opts = {});

/// JSON export: tensor entries, residual diagnostics, grid metadata.
void export_effective_model_json(const std::filesystem::path& path,
                                 const EffectiveModel& em, const TorusGrid& grid);
/// Corrector fields as CSV (one file per direction) on request.
void export_correctors_csv(const std::filesystem::path& dir,
                           const EffectiveModel& em);

} // namespace parahom

#endif
