// SPDX-License-Identifier: Apache-2.0

#ifndef PARAHOM_KRYLOV_HPP
#define PARAHOM_KRYLOV_HPP

#include <functional>
#include <span>
#include <vector>

namespace parahom {

using LinearOp = std::function<void(std::span<const double>, std::span<double>)>;

struct GmresOptions {
  double tol = 1e-10;     // relative residual target, ||b - A x|| <= tol * ||b||
  int restart = 60;
  long max_iterations = 20000;
};

struct GmresResult {
  long iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES with optional right preconditioning: solves A x = b where
/// A is available only as an apply. x holds the initial guess on entry and
/// the solution on exit. precond may be empty (identity).
GmresResult gmres(const LinearOp& apply, std::span<const double> b,
                  std::span<double> x, const GmresOptions& opts,
                  const LinearOp& precond = nullptr);

} // namespace parahom

#endif
