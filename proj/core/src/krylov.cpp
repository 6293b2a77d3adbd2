// SPDX-License-Identifier: Apache-2.0

#include "parahom/krylov.hpp"

#include <cmath>

#include "parahom/errors.hpp"

namespace parahom {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

} // namespace

GmresResult gmres(const LinearOp& apply, std::span<const double> b,
                  std::span<double> x, const GmresOptions& opts,
                  const LinearOp& precond) {
  const std::size_t n = b.size();
  const int m = opts.restart;

  const double bnorm = norm2(b);
  const double target = opts.tol * (bnorm > 0.0 ? bnorm : 1.0);

  std::vector<std::vector<double>> V(static_cast<std::size_t>(m) + 1,
                                     std::vector<double>(n));
  // Hessenberg in column-major packets: H[j] holds column j (j+2 entries).
  std::vector<std::vector<double>> H(static_cast<std::size_t>(m));
  std::vector<double> cs(static_cast<std::size_t>(m)), sn(static_cast<std::size_t>(m));
  std::vector<double> g(static_cast<std::size_t>(m) + 1);
  std::vector<double> w(n), z(n), r(n);

  GmresResult res;

  auto apply_precond = [&](std::span<const double> in, std::span<double> out) {
    if (precond) precond(in, out);
    else std::copy(in.begin(), in.end(), out.begin());
  };

  while (res.iterations < opts.max_iterations) {
    // r = b - A x
    apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    double beta = norm2(r);
    res.relative_residual = beta / (bnorm > 0.0 ? bnorm : 1.0);
    if (beta <= target) {
      res.converged = true;
      return res;
    }

    for (std::size_t i = 0; i < n; ++i) V[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;

    int j = 0;
    for (; j < m && res.iterations < opts.max_iterations; ++j) {
      ++res.iterations;
      apply_precond(V[static_cast<std::size_t>(j)], z);
      apply(z, w);

      auto& h = H[static_cast<std::size_t>(j)];
      h.assign(static_cast<std::size_t>(j) + 2, 0.0);
      for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
        const double hij = dot(w, V[static_cast<std::size_t>(i)]);
        h[static_cast<std::size_t>(i)] = hij;
        for (std::size_t k = 0; k < n; ++k) w[k] -= hij * V[static_cast<std::size_t>(i)][k];
      }
      const double hlast = norm2(w);
      h[static_cast<std::size_t>(j) + 1] = hlast;
      if (hlast > 0.0)
        for (std::size_t k = 0; k < n; ++k) V[static_cast<std::size_t>(j) + 1][k] = w[k] / hlast;

      // apply stored Givens rotations, then create a new one
      for (int i = 0; i < j; ++i) {
        const double t = cs[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] +
                         sn[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i) + 1];
        h[static_cast<std::size_t>(i) + 1] =
            -sn[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)] +
            cs[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i) + 1];
        h[static_cast<std::size_t>(i)] = t;
      }
      const double denom = std::hypot(h[static_cast<std::size_t>(j)],
                                      h[static_cast<std::size_t>(j) + 1]);
      if (denom == 0.0) break;  // dead column: restart from the true residual
      cs[static_cast<std::size_t>(j)] = h[static_cast<std::size_t>(j)] / denom;
      sn[static_cast<std::size_t>(j)] = h[static_cast<std::size_t>(j) + 1] / denom;
      h[static_cast<std::size_t>(j)] = denom;
      h[static_cast<std::size_t>(j) + 1] = 0.0;

      g[static_cast<std::size_t>(j) + 1] = -sn[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(j)];
      g[static_cast<std::size_t>(j)] *= cs[static_cast<std::size_t>(j)];

      if (std::abs(g[static_cast<std::size_t>(j) + 1]) <= target) { ++j; break; }
    }

    // back-substitute y and update x += M^{-1} (V y)
    std::vector<double> y(static_cast<std::size_t>(j));
    for (int i = j - 1; i >= 0; --i) {
      double s = g[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < j; ++k)
        s -= H[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] = s / H[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < j; ++i)
      for (std::size_t k = 0; k < n; ++k)
        w[k] += y[static_cast<std::size_t>(i)] * V[static_cast<std::size_t>(i)][k];
    apply_precond(w, z);
    for (std::size_t k = 0; k < n; ++k) x[k] += z[k];

    apply(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double true_res = norm2(r);
    res.relative_residual = true_res / (bnorm > 0.0 ? bnorm : 1.0);
    if (true_res <= target) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

} // namespace parahom
