// SPDX-License-Identifier: Apache-2.0

#include "parahom/cell_spectral.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "parahom/krylov.hpp"

namespace parahom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double min_sym_eigenvalue(const PeriodicField& A, std::size_t node) {
  const int d = A.grid().dim;
  if (d == 1) return A.value(0, node);
  if (d == 2) {
    const double a = A.value(A.mat(0, 0), node);
    const double b = 0.5 * (A.value(A.mat(0, 1), node) + A.value(A.mat(1, 0), node));
    const double c = A.value(A.mat(1, 1), node);
    const double tr = 0.5 * (a + c);
    const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    return tr - disc;
  }
  Eigen::Matrix3d s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s(i, j) = 0.5 * (A.value(A.mat(i, j), node) + A.value(A.mat(j, i), node));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

PeriodicField scalar_from(std::span<const double> v, const TorusGrid& g) {
  PeriodicField f(g, FieldRank::Scalar);
  std::copy(v.begin(), v.end(), f.component(0).begin());
  return f;
}

// Gaussian elimination with partial pivoting for the tiny Newton systems.
std::vector<double> solve_small(std::vector<std::vector<double>> J,
                                std::vector<double> rhs) {
  const std::size_t d = rhs.size();
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(J[r][col]) > std::abs(J[piv][col])) piv = r;
    std::swap(J[col], J[piv]);
    std::swap(rhs[col], rhs[piv]);
    if (J[col][col] == 0.0) throw SolverFailure("singular Newton Jacobian");
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = J[r][col] / J[col][col];
      for (std::size_t k = col; k < d; ++k) J[r][k] -= f * J[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(d);
  for (std::size_t i = d; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= J[i][k] * x[k];
    x[i] = s / J[i][i];
  }
  return x;
}

} // namespace

ProblemCoefficients ProblemCoefficients::make(PeriodicField A, PeriodicField b,
                                              PeriodicField c, double mu) {
  if (A.rank() != FieldRank::Matrix || b.rank() != FieldRank::Vector ||
      c.rank() != FieldRank::Scalar)
    throw InvalidArgument("ProblemCoefficients: ranks must be matrix/vector/scalar");
  require_same_grid(A, b, "ProblemCoefficients");
  require_same_grid(A, c, "ProblemCoefficients");
  if (!(A.all_finite() && b.all_finite() && c.all_finite()))
    throw NonFiniteState("ProblemCoefficients: non-finite samples");
  if (mu <= 0.0) throw InvalidArgument("ProblemCoefficients: mu must be positive");
  for (std::size_t node = 0; node < A.num_nodes(); ++node)
    if (min_sym_eigenvalue(A, node) < mu - 1e-12)
      throw InvalidArgument("ProblemCoefficients: symmetric part of A drops below mu");
  return ProblemCoefficients{std::move(A), std::move(b), std::move(c), mu};
}

void apply_cell_operator(const ProblemCoefficients& coeffs,
                         std::span<const double> theta, EigenSide side,
                         std::span<const double> p_in, std::span<double> out) {
  const TorusGrid& g = coeffs.grid();
  const int d = g.dim;
  const std::size_t N = g.num_nodes();
  const double sgn = (side == EigenSide::Direct) ? 1.0 : -1.0;

  // de-aliased Galerkin action: the first-derivative multiplier vanishes at
  // the Nyquist frequency, so the operator is restricted to the subspace
  // without Nyquist content (input and output are both projected)
  const PeriodicField pf = drop_nyquist(scalar_from(p_in, g));
  const auto p = pf.component(0);

  // G_a = d_a p + sgn 2 pi theta_a p  (the twisted gradient)
  std::vector<PeriodicField> G;
  G.reserve(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    PeriodicField da = spectral_derivative(pf, a);
    const double tw = sgn * kTwoPi * theta[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < N; ++i) da.value(0, i) += tw * p[i];
    G.push_back(std::move(da));
  }

  // F_i = sum_a A_ia G_a (direct) or sum_a A_ai G_a (adjoint transposes A)
  std::vector<PeriodicField> F;
  F.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    PeriodicField fi(g, FieldRank::Scalar);
    for (int a = 0; a < d; ++a) {
      const int comp = (side == EigenSide::Direct) ? coeffs.A.mat(i, a)
                                                   : coeffs.A.mat(a, i);
      const auto Ac = coeffs.A.component(comp);
      const auto Gc = G[static_cast<std::size_t>(a)].component(0);
      auto fc = fi.component(0);
      for (std::size_t k = 0; k < N; ++k) fc[k] += Ac[k] * Gc[k];
    }
    F.push_back(std::move(fi));
  }

  // out = -div F - sgn 2 pi theta . F + zero-order and drift parts
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < d; ++i) {
    const PeriodicField divi = spectral_derivative(F[static_cast<std::size_t>(i)], i);
    const double tw = sgn * kTwoPi * theta[static_cast<std::size_t>(i)];
    const auto Fc = F[static_cast<std::size_t>(i)].component(0);
    for (std::size_t k = 0; k < N; ++k) out[k] -= divi.value(0, k) + tw * Fc[k];
  }

  if (side == EigenSide::Direct) {
    // + b . (grad p + 2 pi theta p)
    for (int a = 0; a < d; ++a) {
      const auto bc = coeffs.b.component(a);
      const auto Gc = G[static_cast<std::size_t>(a)].component(0);
      for (std::size_t k = 0; k < N; ++k) out[k] += bc[k] * Gc[k];
    }
  } else {
    // - div(b p) + 2 pi (theta . b) p
    for (int a = 0; a < d; ++a) {
      PeriodicField bp(g, FieldRank::Scalar);
      const auto bc = coeffs.b.component(a);
      for (std::size_t k = 0; k < N; ++k) bp.value(0, k) = bc[k] * p[k];
      const PeriodicField dbp = spectral_derivative(bp, a);
      const double tw = kTwoPi * theta[static_cast<std::size_t>(a)];
      for (std::size_t k = 0; k < N; ++k) out[k] += -dbp.value(0, k) + tw * bc[k] * p[k];
    }
  }

  const auto cc = coeffs.c.component(0);
  for (std::size_t k = 0; k < N; ++k) out[k] += cc[k] * p[k];

  const PeriodicField filtered = drop_nyquist(scalar_from(out, g));
  std::copy(filtered.component(0).begin(), filtered.component(0).end(), out.begin());
}

Eigenpair principal_eigenpair(const ProblemCoefficients& coeffs,
                              std::span<const double> theta, EigenSide side,
                              const EigenpairOptions& opts) {
  const TorusGrid& g = coeffs.grid();
  const std::size_t N = g.num_nodes();
  const double shift = opts.shift_estimate - 1.0;

  double abar = 0.0;
  for (int a = 0; a < g.dim; ++a) abar += cell_average(coeffs.A, coeffs.A.mat(a, a));
  abar /= g.dim;
  const double c0 = std::max(1.0, cell_average(coeffs.c) - shift);

  LinearOp apply_shifted = [&](std::span<const double> in, std::span<double> out) {
    apply_cell_operator(coeffs, theta, side, in, out);
    for (std::size_t k = 0; k < N; ++k) out[k] -= shift * in[k];
  };
  LinearOp precond = [&](std::span<const double> in, std::span<double> out) {
    const PeriodicField f = scalar_from(in, g);
    const PeriodicField r = spectral_multiplier(f, [&](const std::array<long, 3>& k) {
      double k2 = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        const double kw = kTwoPi * static_cast<double>(k[static_cast<std::size_t>(a)]);
        k2 += kw * kw;
      }
      return 1.0 / (abar * k2 + c0);
    });
    std::copy(r.component(0).begin(), r.component(0).end(), out.begin());
  };

  std::vector<double> x(N, 1.0);
  if (opts.warm_start) {
    const auto w = opts.warm_start->component(0);
    std::copy(w.begin(), w.end(), x.begin());
  }
  {
    const PeriodicField fx = drop_nyquist(scalar_from(x, g));
    std::copy(fx.component(0).begin(), fx.component(0).end(), x.begin());
  }
  const double xn = norm2(x);
  for (auto& v : x) v /= xn;

  std::vector<double> z(N), Lx(N);
  double lambda = opts.shift_estimate;
  double residual = 0.0;
  long it = 0;
  bool converged = false;

  GmresOptions gopts;
  gopts.tol = opts.linear_tol;
  gopts.restart = 60;
  gopts.max_iterations = 5000;

  for (it = 1; it <= opts.max_iterations; ++it) {
    const double gap = std::max(lambda - shift, 0.1);
    for (std::size_t k = 0; k < N; ++k) z[k] = x[k] / gap;
    const GmresResult gr = gmres(apply_shifted, x, z, gopts, precond);
    if (!gr.converged)
      throw NoConvergence("principal_eigenpair: shifted Krylov solve stalled");

    {
      // keep the iterate in the de-aliased subspace (rounding leaks only)
      const PeriodicField fz = drop_nyquist(scalar_from(z, g));
      std::copy(fz.component(0).begin(), fz.component(0).end(), z.begin());
    }
    const double zn = norm2(z);
    if (!(zn > 0.0) || !std::isfinite(zn))
      throw NoConvergence("principal_eigenpair: inverse iteration broke down");
    for (std::size_t k = 0; k < N; ++k) x[k] = z[k] / zn;

    std::size_t imax = 0;
    for (std::size_t k = 1; k < N; ++k)
      if (std::abs(x[k]) > std::abs(x[imax])) imax = k;
    if (x[imax] < 0.0)
      for (auto& v : x) v = -v;

    apply_cell_operator(coeffs, theta, side, x, Lx);
    const double lambda_new = dot(Lx, x);
    double rn = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double rk = Lx[k] - lambda_new * x[k];
      rn += rk * rk;
    }
    residual = std::sqrt(rn);

    const bool lam_ok = std::abs(lambda_new - lambda) <= opts.eig_tol * (1.0 + std::abs(lambda_new));
    lambda = lambda_new;
    if (it >= 2 && lam_ok) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NoConvergence("principal_eigenpair: iteration cap reached");

  double maxv = x[0], minv = x[0];
  for (double v : x) {
    maxv = std::max(maxv, v);
    minv = std::min(minv, v);
  }
  if (!(maxv > 0.0) || minv < -1e-8 * maxv)
    throw NonPositiveEigenfunction(
        "principal_eigenpair: converged eigenfunction changes sign (grid too coarse?)");

  PeriodicField ef(g, FieldRank::Scalar);
  for (std::size_t k = 0; k < N; ++k) ef.value(0, k) = x[k] / maxv;
  return Eigenpair{lambda, std::move(ef), residual, it};
}

std::pair<PeriodicField, PeriodicField> normalize_pair(const PeriodicField& psi,
                                                       const PeriodicField& psi_star) {
  require_same_grid(psi, psi_star, "normalize_pair");
  auto sign_fix = [](const PeriodicField& f, const char* name) {
    PeriodicField out = f;
    auto v = out.component(0);
    std::size_t imax = 0;
    for (std::size_t k = 1; k < v.size(); ++k)
      if (std::abs(v[k]) > std::abs(v[imax])) imax = k;
    if (v[imax] < 0.0)
      for (auto& x : v) x = -x;
    double maxv = 0.0, minv = v[0];
    for (double x : v) {
      maxv = std::max(maxv, std::abs(x));
      minv = std::min(minv, x);
    }
    if (minv < -1e-8 * maxv)
      throw SignChange(std::string("normalize_pair: ") + name + " changes sign");
    return out;
  };

  PeriodicField p = sign_fix(psi, "psi");
  PeriodicField q = sign_fix(psi_star, "psi_star");

  const std::size_t N = p.num_nodes();
  double pairing = 0.0, np2 = 0.0, nq2 = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    pairing += p.value(0, k) * q.value(0, k);
    np2 += p.value(0, k) * p.value(0, k);
    nq2 += q.value(0, k) * q.value(0, k);
  }
  pairing /= static_cast<double>(N);
  const double np = std::sqrt(np2 / static_cast<double>(N));
  const double nq = std::sqrt(nq2 / static_cast<double>(N));
  if (!(pairing > 0.0))
    throw SignChange("normalize_pair: nonpositive pairing integral");

  // s t = 1/pairing with ||s psi|| = ||t psi*||
  const double s = std::sqrt(nq / (np * pairing));
  const double t = std::sqrt(np / (nq * pairing));
  for (auto& v : p.component(0)) v *= s;
  for (auto& v : q.component(0)) v *= t;
  return {std::move(p), std::move(q)};
}

PeriodicField assemble_effective_drift(const ProblemCoefficients& coeffs,
                                       std::span<const double> theta,
                                       const PeriodicField& psi,
                                       const PeriodicField& psi_star) {
  require_same_grid(psi, coeffs.A, "assemble_effective_drift");
  require_same_grid(psi_star, coeffs.A, "assemble_effective_drift");
  const TorusGrid& g = coeffs.grid();
  const int d = g.dim;
  const std::size_t N = g.num_nodes();

  // twisted gradients of the full eigenfunctions, exponentials cancelled:
  // Dp_a = d_a psi + 2 pi theta_a psi, Dq_a = d_a psi* - 2 pi theta_a psi*
  std::vector<PeriodicField> Dp, Dq;
  for (int a = 0; a < d; ++a) {
    PeriodicField dp = spectral_derivative(psi, a);
    PeriodicField dq = spectral_derivative(psi_star, a);
    const double tw = kTwoPi * theta[static_cast<std::size_t>(a)];
    for (std::size_t k = 0; k < N; ++k) {
      dp.value(0, k) += tw * psi.value(0, k);
      dq.value(0, k) -= tw * psi_star.value(0, k);
    }
    Dp.push_back(std::move(dp));
    Dq.push_back(std::move(dq));
  }

  PeriodicField beta(g, FieldRank::Vector);
  for (int i = 0; i < d; ++i) {
    auto out = beta.component(i);
    const auto bc = coeffs.b.component(i);
    for (std::size_t k = 0; k < N; ++k)
      out[k] = psi.value(0, k) * psi_star.value(0, k) * bc[k];
    for (int a = 0; a < d; ++a) {
      const auto Aia = coeffs.A.component(coeffs.A.mat(i, a));
      const auto Aai = coeffs.A.component(coeffs.A.mat(a, i));
      const auto dq = Dq[static_cast<std::size_t>(a)].component(0);
      const auto dp = Dp[static_cast<std::size_t>(a)].component(0);
      for (std::size_t k = 0; k < N; ++k)
        out[k] += psi.value(0, k) * Aai[k] * dq[k] - psi_star.value(0, k) * Aia[k] * dp[k];
    }
  }
  return beta;
}

namespace {

struct BlochState {
  std::array<double, 3> theta{0.0, 0.0, 0.0};
  PeriodicField psi, psi_star;  // normalized pair
  double lambda_d = 0.0, lambda_a = 0.0;
  double res_d = 0.0, res_a = 0.0;
  std::vector<double> F;  // integral of beta, componentwise
  double f_norm2 = 0.0, f_norm_inf = 0.0;
};

} // namespace

CellEigenSolution find_bloch_parameter(const ProblemCoefficients& coeffs,
                                       const BlochOptions& opts) {
  const int d = coeffs.dim();
  double lambda_est = opts.eigen.shift_estimate;
  const PeriodicField* warm_d = nullptr;
  const PeriodicField* warm_a = nullptr;

  auto eval = [&](const std::array<double, 3>& theta) {
    EigenpairOptions eo = opts.eigen;
    eo.shift_estimate = lambda_est;
    eo.warm_start = warm_d;
    Eigenpair direct = principal_eigenpair(coeffs, std::span<const double>(theta.data(), 3),
                                           EigenSide::Direct, eo);
    eo.warm_start = warm_a;
    Eigenpair adjoint = principal_eigenpair(coeffs, std::span<const double>(theta.data(), 3),
                                            EigenSide::Adjoint, eo);
    auto [p, q] = normalize_pair(direct.eigenfunction, adjoint.eigenfunction);
    const PeriodicField beta = assemble_effective_drift(
        coeffs, std::span<const double>(theta.data(), 3), p, q);

    BlochState st;
    st.theta = theta;
    st.psi = std::move(p);
    st.psi_star = std::move(q);
    st.lambda_d = direct.lambda;
    st.lambda_a = adjoint.lambda;
    st.res_d = direct.residual;
    st.res_a = adjoint.residual;
    st.F.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      st.F[static_cast<std::size_t>(j)] = cell_average(beta, j);
      st.f_norm2 += st.F[static_cast<std::size_t>(j)] * st.F[static_cast<std::size_t>(j)];
      st.f_norm_inf = std::max(st.f_norm_inf, std::abs(st.F[static_cast<std::size_t>(j)]));
    }
    st.f_norm2 = std::sqrt(st.f_norm2);
    lambda_est = direct.lambda;
    return st;
  };

  BlochState cur = eval({0.0, 0.0, 0.0});
  warm_d = &cur.psi;
  warm_a = &cur.psi_star;

  int step = 0;
  while (cur.f_norm_inf > opts.drift_tol) {
    if (++step > opts.max_newton_steps)
      throw NoConvergence("find_bloch_parameter: Newton cap reached");

    // forward-difference Jacobian of F
    std::vector<std::vector<double>> J(static_cast<std::size_t>(d),
                                       std::vector<double>(static_cast<std::size_t>(d)));
    for (int j = 0; j < d; ++j) {
      std::array<double, 3> tp = cur.theta;
      tp[static_cast<std::size_t>(j)] += opts.fd_step;
      const BlochState pert = eval(tp);
      for (int i = 0; i < d; ++i)
        J[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            (pert.F[static_cast<std::size_t>(i)] - cur.F[static_cast<std::size_t>(i)]) /
            opts.fd_step;
    }
    std::vector<double> rhs(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) rhs[static_cast<std::size_t>(i)] = -cur.F[static_cast<std::size_t>(i)];
    const std::vector<double> delta = solve_small(J, rhs);

    bool accepted = false;
    double t = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      std::array<double, 3> trial = cur.theta;
      for (int i = 0; i < d; ++i)
        trial[static_cast<std::size_t>(i)] += t * delta[static_cast<std::size_t>(i)];
      BlochState next = eval(trial);
      if (next.f_norm2 < cur.f_norm2) {
        cur = std::move(next);
        warm_d = &cur.psi;
        warm_a = &cur.psi_star;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw NoConvergence("find_bloch_parameter: damped step failed to reduce |F|");
  }

  CellEigenSolution sol;
  sol.theta = cur.theta;
  sol.lambda = cur.lambda_d;
  sol.psi = cur.psi;
  sol.psi_star = cur.psi_star;
  sol.lower_bound_a = std::min(min_value(sol.psi), min_value(sol.psi_star));
  sol.residuals.direct = cur.res_d;
  sol.residuals.adjoint = cur.res_a;
  sol.residuals.lambda_gap = std::abs(cur.lambda_d - cur.lambda_a);
  sol.residuals.drift_mean = cur.f_norm_inf;

  if (sol.residuals.lambda_gap > 1e-8 * (1.0 + std::abs(sol.lambda)))
    throw NoConvergence("find_bloch_parameter: direct/adjoint eigenvalues disagree");
  if (!(sol.lower_bound_a > 0.0))
    throw NonPositiveEigenfunction("find_bloch_parameter: eigenfunction lower bound not positive");
  const double pairing = [&] {
    double s = 0.0;
    for (std::size_t k = 0; k < sol.psi.num_nodes(); ++k)
      s += sol.psi.value(0, k) * sol.psi_star.value(0, k);
    return s / static_cast<double>(sol.psi.num_nodes());
  }();
  if (std::abs(pairing - 1.0) > 1e-8)
    throw SolverFailure("find_bloch_parameter: pair normalization drifted");
  return sol;
}

} // namespace parahom
