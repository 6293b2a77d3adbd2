// SPDX-License-Identifier: Apache-2.0

#include "parahom/homogenize.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "parahom/krylov.hpp"

namespace parahom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double min_sym_eig(const PeriodicField& T, std::size_t node) {
  const int d = T.grid().dim;
  if (d == 1) return T.value(0, node);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      s(i, j) = 0.5 * (T.value(T.mat(i, j), node) + T.value(T.mat(j, i), node));
  if (d == 2) {
    const double a = s(0, 0), b = s(0, 1), c = s(1, 1);
    return 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

// Theta(grad omega + e_j) as a vector field, minus the constant column when
// tensor_h is provided.
PeriodicField corrected_flux_column(const GeneralCoefficients& gc,
                                    const PeriodicField& omega, int j,
                                    const ConstTensor* tensor_h) {
  const TorusGrid& g = gc.grid();
  const int d = g.dim;
  const std::size_t N = g.num_nodes();
  std::vector<PeriodicField> grad;
  for (int a = 0; a < d; ++a) grad.push_back(spectral_derivative(omega, a));

  PeriodicField out(g, FieldRank::Vector);
  for (int i = 0; i < d; ++i) {
    auto oi = out.component(i);
    const auto tij = gc.Theta.component(gc.Theta.mat(i, j));
    for (std::size_t k = 0; k < N; ++k) oi[k] = tij[k];
    for (int a = 0; a < d; ++a) {
      const auto tia = gc.Theta.component(gc.Theta.mat(i, a));
      const auto ga = grad[static_cast<std::size_t>(a)].component(0);
      for (std::size_t k = 0; k < N; ++k) oi[k] += tia[k] * ga[k];
    }
    if (tensor_h) {
      const double c = (*tensor_h)(i, j);
      for (std::size_t k = 0; k < N; ++k) oi[k] -= c;
    }
  }
  return out;
}

} // namespace

ConstTensor ConstTensor::identity(int d) {
  ConstTensor t(d);
  for (int i = 0; i < d; ++i) t(i, i) = 1.0;
  return t;
}

GeneralCoefficients GeneralCoefficients::make(PeriodicField zeta,
                                              PeriodicField Theta, double kappa) {
  if (zeta.rank() != FieldRank::Scalar || Theta.rank() != FieldRank::Matrix)
    throw InvalidArgument("GeneralCoefficients: ranks must be scalar/matrix");
  require_same_grid(zeta, Theta, "GeneralCoefficients");
  if (std::abs(cell_average(zeta) - 1.0) > 1e-10)
    throw NonZeroMean("GeneralCoefficients: integral(zeta) must equal 1");
  if (kappa <= 0.0) throw InvalidArgument("GeneralCoefficients: kappa must be positive");
  for (std::size_t node = 0; node < Theta.num_nodes(); ++node)
    if (min_sym_eig(Theta, node) < kappa - 1e-12)
      throw InvalidArgument("GeneralCoefficients: Theta loses ellipticity kappa");
  return GeneralCoefficients{std::move(zeta), std::move(Theta), kappa};
}

GeneralCoefficients GeneralCoefficients::from_factorized(const FactorizedModel& fm) {
  return make(fm.sigma, fm.M, fm.ellipticity_b);
}

CorrectorSolve solve_corrector(const GeneralCoefficients& gc, int j,
                               const CorrectorOptions& opts) {
  const TorusGrid& g = gc.grid();
  const int d = g.dim;
  if (j < 0 || j >= d) throw InvalidArgument("solve_corrector: axis out of range");
  const std::size_t N = g.num_nodes();

  // rhs = -div(Theta e_j), componentwise spectral divergence of column j
  std::vector<double> rhs(N, 0.0);
  for (int i = 0; i < d; ++i) {
    const PeriodicField di = spectral_derivative(gc.Theta, i, gc.Theta.mat(i, j));
    for (std::size_t k = 0; k < N; ++k) rhs[k] -= di.value(0, k);
  }

  double theta_bar = 0.0;
  for (int a = 0; a < d; ++a) theta_bar += cell_average(gc.Theta, gc.Theta.mat(a, a));
  theta_bar /= d;

  LinearOp apply = [&](std::span<const double> in, std::span<double> out) {
    PeriodicField w(g, FieldRank::Scalar);
    std::copy(in.begin(), in.end(), w.component(0).begin());
    std::vector<PeriodicField> grad;
    for (int a = 0; a < d; ++a) grad.push_back(spectral_derivative(w, a));
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < d; ++i) {
      PeriodicField flux(g, FieldRank::Scalar);
      auto fc = flux.component(0);
      for (int a = 0; a < d; ++a) {
        const auto tia = gc.Theta.component(gc.Theta.mat(i, a));
        const auto ga = grad[static_cast<std::size_t>(a)].component(0);
        for (std::size_t k = 0; k < N; ++k) fc[k] += tia[k] * ga[k];
      }
      const PeriodicField di = spectral_derivative(flux, i);
      for (std::size_t k = 0; k < N; ++k) out[k] += di.value(0, k);
    }
  };
  LinearOp precond = [&](std::span<const double> in, std::span<double> out) {
    PeriodicField f(g, FieldRank::Scalar);
    std::copy(in.begin(), in.end(), f.component(0).begin());
    const PeriodicField r = spectral_multiplier(f, [&](const std::array<long, 3>& k) {
      double k2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double kw = kTwoPi * static_cast<double>(k[static_cast<std::size_t>(a)]);
        k2 += kw * kw;
      }
      return k2 == 0.0 ? 0.0 : -1.0 / (theta_bar * k2);
    });
    std::copy(r.component(0).begin(), r.component(0).end(), out.begin());
  };

  std::vector<double> x(N, 0.0);
  GmresOptions gopts;
  gopts.tol = opts.tol;
  gopts.restart = 80;
  gopts.max_iterations = opts.max_iterations;
  const GmresResult gr = gmres(apply, rhs, x, gopts, precond);
  if (!gr.converged)
    throw NoConvergence("solve_corrector: Krylov iteration did not reach tolerance");

  PeriodicField omega(g, FieldRank::Scalar);
  std::copy(x.begin(), x.end(), omega.component(0).begin());

  // subtract the normalization constant: weighted average of omega is zero
  double wmean = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const double w = (opts.weight == CorrectorWeight::Zeta) ? gc.zeta.value(0, k) : 1.0;
    wmean += w * omega.value(0, k);
    wsum += w;
  }
  const double shift = wmean / wsum;
  for (auto& v : omega.component(0)) v -= shift;

  return CorrectorSolve{std::move(omega), gr.relative_residual, gr.iterations};
}

ConstTensor homogenized_tensor(const GeneralCoefficients& gc,
                               const std::vector<PeriodicField>& correctors) {
  const int d = gc.dim();
  if (static_cast<int>(correctors.size()) != d)
    throw InvalidArgument("homogenized_tensor: one corrector per direction expected");
  ConstTensor t(d);
  for (int j = 0; j < d; ++j) {
    const PeriodicField col =
        corrected_flux_column(gc, correctors[static_cast<std::size_t>(j)], j, nullptr);
    for (int i = 0; i < d; ++i) t(i, j) = cell_average(col, i);
  }
  // symmetric part must stay positive definite
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i, j) = 0.5 * (t(i, j) + t(j, i));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= 0.0)
    throw SolverFailure("homogenized_tensor: symmetric part not positive definite");
  return t;
}

PeriodicField flux_corrector(const GeneralCoefficients& gc,
                             const std::vector<PeriodicField>& correctors,
                             const ConstTensor& tensor_h) {
  const TorusGrid& g = gc.grid();
  const int d = g.dim;
  const std::size_t N = g.num_nodes();
  PeriodicField phi(g, FieldRank::Rank3);
  if (d == 1) return phi;

  for (int j = 0; j < d; ++j) {
    const PeriodicField r =
        corrected_flux_column(gc, correctors[static_cast<std::size_t>(j)], j, &tensor_h);
    if (max_abs(divergence(r)) > 1e-8)
      throw NotDivergenceFree("flux_corrector: corrected flux residual too large");

    std::vector<PeriodicField> u;
    for (int i = 0; i < d; ++i) {
      PeriodicField rhs = component_field(r, i);
      const double mean = cell_average(rhs);
      if (std::abs(mean) > 1e-8)
        throw NonZeroMean("flux_corrector: corrected flux has nonzero mean");
      for (auto& v : rhs.component(0)) v -= mean;
      u.push_back(solve_cell_poisson(rhs));
    }

    for (int k = 0; k < d; ++k)
      for (int i = k + 1; i < d; ++i) {
        const PeriodicField dkui = spectral_derivative(u[static_cast<std::size_t>(i)], k);
        const PeriodicField diuk = spectral_derivative(u[static_cast<std::size_t>(k)], i);
        auto pki = phi.component(phi.r3(k, i, j));
        auto pik = phi.component(phi.r3(i, k, j));
        for (std::size_t m = 0; m < N; ++m) {
          const double v = dkui.value(0, m) - diuk.value(0, m);
          pki[m] = v;
          pik[m] = -v;
        }
      }
  }
  return phi;
}

EffectiveModel build_effective_model(const GeneralCoefficients& gc,
                                     const CorrectorOptions& opts) {
  const int d = gc.dim();
  EffectiveModel em;
  em.weight = opts.weight;
  for (int j = 0; j < d; ++j) {
    CorrectorSolve cs = solve_corrector(gc, j, opts);
    em.diagnostics.corrector_residuals.push_back(cs.relative_residual);
    em.diagnostics.corrector_iterations.push_back(cs.iterations);
    em.correctors.push_back(std::move(cs.omega));
  }
  em.tensor_h = homogenized_tensor(gc, em.correctors);
  em.flux = flux_corrector(gc, em.correctors, em.tensor_h);

  // flux identity residual: max over (i,j) of ||d_k phi_kij - r_ij||_inf
  double flux_res = 0.0;
  if (d > 1) {
    for (int j = 0; j < d; ++j) {
      const PeriodicField r =
          corrected_flux_column(gc, em.correctors[static_cast<std::size_t>(j)], j, &em.tensor_h);
      for (int i = 0; i < d; ++i) {
        PeriodicField div_phi(gc.grid(), FieldRank::Scalar);
        for (int k = 0; k < d; ++k) {
          const PeriodicField dk = spectral_derivative(em.flux, k, em.flux.r3(k, i, j));
          for (std::size_t m = 0; m < gc.grid().num_nodes(); ++m)
            div_phi.value(0, m) += dk.value(0, m);
        }
        const auto ri = r.component(i);
        for (std::size_t m = 0; m < gc.grid().num_nodes(); ++m)
          flux_res = std::max(flux_res, std::abs(div_phi.value(0, m) - ri[m]));
      }
    }
  }
  em.diagnostics.flux_identity_residual = flux_res;

  for (int j = 0; j < d; ++j) {
    double wmean = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < gc.grid().num_nodes(); ++k) {
      const double w = (opts.weight == CorrectorWeight::Zeta) ? gc.zeta.value(0, k) : 1.0;
      wmean += w * em.correctors[static_cast<std::size_t>(j)].value(0, k);
      wsum += w;
    }
    em.diagnostics.max_weighted_mean =
        std::max(em.diagnostics.max_weighted_mean, std::abs(wmean / wsum));
  }
  return em;
}

void export_effective_model_json(const std::filesystem::path& path,
                                 const EffectiveModel& em, const TorusGrid& grid) {
  nlohmann::ordered_json j;
  j["grid"] = {{"dim", grid.dim}, {"n", grid.n}};
  j["normalization"] = em.weight == CorrectorWeight::Zeta ? "zeta" : "plain";
  nlohmann::ordered_json tensor = nlohmann::ordered_json::array();
  for (int r = 0; r < em.tensor_h.dim; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < em.tensor_h.dim; ++c) row.push_back(em.tensor_h(r, c));
    tensor.push_back(row);
  }
  j["tensor_h"] = tensor;
  j["diagnostics"] = {
      {"corrector_residuals", em.diagnostics.corrector_residuals},
      {"corrector_iterations", em.diagnostics.corrector_iterations},
      {"flux_identity_residual", em.diagnostics.flux_identity_residual},
      {"max_weighted_mean", em.diagnostics.max_weighted_mean},
  };
  std::ofstream out(path);
  if (!out) throw IoError("export_effective_model_json: cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("export_effective_model_json: write failed " + path.string());
}

void export_correctors_csv(const std::filesystem::path& dir, const EffectiveModel& em) {
  for (std::size_t j = 0; j < em.correctors.size(); ++j) {
    const auto path = dir / ("corrector_" + std::to_string(j + 1) + ".csv");
    export_csv_field(path, em.correctors[j], {"omega" + std::to_string(j + 1)});
  }
}

} // namespace parahom
