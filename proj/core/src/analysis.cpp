// SPDX-License-Identifier: Apache-2.0

#include "parahom/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace parahom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double bump(double u) {
  const double u2 = u * u;
  if (u2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u2));
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Centered-difference spatial gradient component at a node (one-sided at
/// the boundary); matches the spacetime_norm H1 convention.
double grad_at(const DomainSpec& dom, const std::vector<double>& u,
               const std::array<int, 3>& idx, std::size_t node, int a) {
  const int N = dom.cells_per_axis();
  const int i = idx[static_cast<std::size_t>(a)];
  std::array<int, 3> up = idx, dn = idx;
  if (i == 0) {
    up[static_cast<std::size_t>(a)] = 1;
    return (u[dom.pack(up)] - u[node]) / dom.h;
  }
  if (i == N) {
    dn[static_cast<std::size_t>(a)] = N - 1;
    return (u[node] - u[dom.pack(dn)]) / dom.h;
  }
  up[static_cast<std::size_t>(a)] += 1;
  dn[static_cast<std::size_t>(a)] -= 1;
  return (u[dom.pack(up)] - u[dom.pack(dn)]) / (2.0 * dom.h);
}

enum class Seminorm { Grad, Hess, TimeDeriv };

/// L2(Omega_T) seminorms by trapezoid quadrature. Hessian entries use
/// centered second differences and are restricted to fully interior nodes.
double st_seminorm(const SpaceTimeField& f, Seminorm which) {
  const DomainSpec& dom = f.domain;
  const int d = dom.dim;
  const int N = dom.cells_per_axis();
  const double h = dom.h;
  const std::size_t M = f.levels.size() - 1;

  double acc = 0.0;
  for (std::size_t m = 0; m <= M; ++m) {
    const double wt = (m == 0 || m == M) ? 0.5 : 1.0;
    const std::vector<double>& u = f.levels[m];
    double lvl = 0.0;
    for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
      const auto idx = dom.unpack(node);
      double w = 1.0;
      for (int a = 0; a < d; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        if (i == 0 || i == N) w *= 0.5;
      }
      double val = 0.0;
      switch (which) {
        case Seminorm::Grad:
          for (int a = 0; a < d; ++a) {
            const double g = grad_at(dom, u, idx, node, a);
            val += g * g;
          }
          break;
        case Seminorm::Hess: {
          bool interior = true;
          for (int a = 0; a < d; ++a) {
            const int i = idx[static_cast<std::size_t>(a)];
            if (i < 1 || i > N - 1) interior = false;
          }
          if (!interior) break;
          for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
              double s;
              if (a == b) {
                std::array<int, 3> up = idx, dn = idx;
                up[static_cast<std::size_t>(a)] += 1;
                dn[static_cast<std::size_t>(a)] -= 1;
                s = (u[dom.pack(up)] - 2.0 * u[node] + u[dom.pack(dn)]) / (h * h);
              } else {
                std::array<int, 3> pp = idx, pm = idx, mp = idx, mm = idx;
                pp[static_cast<std::size_t>(a)] += 1; pp[static_cast<std::size_t>(b)] += 1;
                pm[static_cast<std::size_t>(a)] += 1; pm[static_cast<std::size_t>(b)] -= 1;
                mp[static_cast<std::size_t>(a)] -= 1; mp[static_cast<std::size_t>(b)] += 1;
                mm[static_cast<std::size_t>(a)] -= 1; mm[static_cast<std::size_t>(b)] -= 1;
                s = (u[dom.pack(pp)] - u[dom.pack(pm)] - u[dom.pack(mp)] + u[dom.pack(mm)]) /
                    (4.0 * h * h);
              }
              val += s * s;
            }
          break;
        }
        case Seminorm::TimeDeriv: {
          double g;
          if (m == 0)
            g = (f.levels[1][node] - u[node]) / dom.tau;
          else if (m == M)
            g = (u[node] - f.levels[M - 1][node]) / dom.tau;
          else
            g = (f.levels[m + 1][node] - f.levels[m - 1][node]) / (2.0 * dom.tau);
          val = g * g;
          break;
        }
      }
      lvl += w * val;
    }
    acc += wt * lvl * std::pow(h, d) * dom.tau;
  }
  return std::sqrt(acc);
}

/// Masked L2 over a time window and a space predicate.
double masked_l2(const SpaceTimeField& f, double t_lo, double t_hi,
                 const std::function<bool(std::size_t)>& in_space) {
  const DomainSpec& dom = f.domain;
  const int N = dom.cells_per_axis();
  const std::size_t M = f.levels.size() - 1;
  double acc = 0.0;
  for (std::size_t m = 0; m <= M; ++m) {
    const double t = static_cast<double>(m) * dom.tau;
    if (t < t_lo || t > t_hi) continue;
    const double wt = (m == 0 || m == M) ? 0.5 : 1.0;
    const std::vector<double>& u = f.levels[m];
    double lvl = 0.0;
    for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
      if (!in_space(node)) continue;
      const auto idx = dom.unpack(node);
      double w = 1.0;
      for (int a = 0; a < dom.dim; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        if (i == 0 || i == N) w *= 0.5;
      }
      lvl += w * u[node] * u[node];
    }
    acc += wt * lvl * std::pow(dom.h, dom.dim) * dom.tau;
  }
  return std::sqrt(acc);
}

/// Degeneracy-tolerant cut-off profiles (no admissibility pre); the public
/// build_cutoffs wraps this with the paper's constraints enforced.
CutoffPair cutoff_profiles(const DomainSpec& dom) {
  const double eps = dom.epsilon;
  const double sq = std::sqrt(eps);
  CutoffPair cp;
  cp.epsilon = eps;
  cp.eta1.resize(dom.num_nodes());
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    const double dist = dom.boundary_distance(node);
    cp.eta1[node] = std::clamp((dist - 3.0 * sq) / sq, 0.0, 1.0);
  }
  const int M = dom.time_steps();
  cp.eta2.resize(static_cast<std::size_t>(M) + 1);
  for (int m = 0; m <= M; ++m) {
    const double t = m * dom.tau;
    double up = 0.0, down = 0.0;
    if (t > 4.0 * eps) up = smoothstep((t - 4.0 * eps) / (4.0 * eps));
    if (t < dom.T - 4.0 * eps) down = smoothstep((dom.T - 4.0 * eps - t) / (4.0 * eps));
    cp.eta2[static_cast<std::size_t>(m)] = std::min(up, down);
  }
  return cp;
}

} // namespace

SmoothingKernel SmoothingKernel::parabolic_default() {
  SmoothingKernel k;
  k.time_halfwidth = 0.5;
  k.space_radius = 1.0 / std::sqrt(2.0);
  k.time_profile = [](double s) { return bump(2.0 * s); };
  k.space_profile = [](double r) { return bump(r * std::sqrt(2.0)); };
  return k;
}

DiscreteKernel discretize_kernel(const SmoothingKernel& kernel,
                                 const DomainSpec& dom) {
  const double eps = dom.epsilon;
  if (eps * eps / dom.tau < 4.0 - 1e-12 || eps / dom.h < 4.0 - 1e-12)
    throw KernelUnderresolved(
        "discretize_kernel: kernel support must span >= 4 grid cells per axis");

  DiscreteKernel dk;
  dk.time_taps = static_cast<int>(std::floor(kernel.time_halfwidth * eps * eps / dom.tau));
  double tsum = 0.0;
  for (int j = -dk.time_taps; j <= dk.time_taps; ++j) {
    const double w = kernel.time_profile(static_cast<double>(j) * dom.tau / (eps * eps));
    dk.time_weights.push_back(w);
    tsum += w;
  }
  for (double& w : dk.time_weights) w /= tsum;

  const int ks = static_cast<int>(std::floor(kernel.space_radius * eps / dom.h));
  double ssum = 0.0;
  std::array<int, 3> o{0, 0, 0};
  std::function<void(int)> rec = [&](int axis) {
    if (axis == dom.dim) {
      double r2 = 0.0;
      for (int a = 0; a < dom.dim; ++a) {
        const double y = o[static_cast<std::size_t>(a)] * dom.h / eps;
        r2 += y * y;
      }
      const double w = kernel.space_profile(std::sqrt(r2));
      if (w > 0.0) {
        dk.space_offsets.push_back(o);
        dk.space_weights.push_back(w);
        ssum += w;
      }
      return;
    }
    for (int i = -ks; i <= ks; ++i) {
      o[static_cast<std::size_t>(axis)] = i;
      rec(axis + 1);
    }
  };
  rec(0);
  for (double& w : dk.space_weights) w /= ssum;
  return dk;
}

SpaceTimeField smooth(const SpaceTimeField& g, double eps,
                      const SmoothingKernel& kernel) {
  DomainSpec dom = g.domain;
  if (std::abs(eps - dom.epsilon) > 1e-14) {
    dom.epsilon = eps;  // smooth at a scale other than the grid's own
  }
  const DiscreteKernel dk = discretize_kernel(kernel, dom);
  const std::size_t M = g.levels.size() - 1;
  const int N = dom.cells_per_axis();

  // time pass (separable), zero-extension outside [0, M]
  std::vector<std::vector<double>> tmp(M + 1,
                                       std::vector<double>(dom.num_nodes(), 0.0));
  for (std::size_t m = 0; m <= M; ++m) {
    for (int j = -dk.time_taps; j <= dk.time_taps; ++j) {
      const long src = static_cast<long>(m) - j;
      if (src < 0 || src > static_cast<long>(M)) continue;
      const double w = dk.time_weights[static_cast<std::size_t>(j + dk.time_taps)];
      const auto& u = g.levels[static_cast<std::size_t>(src)];
      auto& t = tmp[m];
      for (std::size_t k = 0; k < t.size(); ++k) t[k] += w * u[k];
    }
  }

  // space pass, zero-extension outside the box
  SpaceTimeField out;
  out.domain = g.domain;
  out.levels.assign(M + 1, std::vector<double>(dom.num_nodes(), 0.0));
  for (std::size_t m = 0; m <= M; ++m) {
    const auto& src = tmp[m];
    auto& dst = out.levels[m];
    for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
      const auto idx = dom.unpack(node);
      double acc = 0.0;
      for (std::size_t q = 0; q < dk.space_offsets.size(); ++q) {
        std::array<int, 3> s = idx;
        bool inside = true;
        for (int a = 0; a < dom.dim; ++a) {
          s[static_cast<std::size_t>(a)] -=
              dk.space_offsets[q][static_cast<std::size_t>(a)];
          if (s[static_cast<std::size_t>(a)] < 0 || s[static_cast<std::size_t>(a)] > N)
            inside = false;
        }
        if (inside) acc += dk.space_weights[q] * src[dom.pack(s)];
      }
      dst[node] = acc;
    }
  }
  return out;
}

CutoffPair build_cutoffs(const DomainSpec& dom) {
  const double eps = dom.epsilon;
  const double diam = std::sqrt(static_cast<double>(dom.dim));
  if (!(4.0 * std::sqrt(eps) < 0.5 * diam))
    throw EpsilonTooLarge("build_cutoffs: 4 sqrt(eps) must stay below diam(Omega)/2");
  if (!(8.0 * eps < 0.5 * dom.T))
    throw EpsilonTooLarge("build_cutoffs: 8 eps must stay below T/2");
  return cutoff_profiles(dom);
}

CutoffPair clamped_cutoffs(const DomainSpec& dom) { return cutoff_profiles(dom); }

WepsResult build_w_eps(const SpaceTimeField& f_eps, const SpaceTimeField& f0,
                       const EffectiveModel& em, const DomainSpec& dom,
                       const SmoothingKernel& kernel) {
  if (f_eps.levels.size() != f0.levels.size() ||
      f_eps.levels.at(0).size() != dom.num_nodes() ||
      f0.levels.at(0).size() != dom.num_nodes())
    throw GridMismatch("build_w_eps: fields must share the domain grid");
  const int d = dom.dim;
  const std::size_t M = f_eps.levels.size() - 1;

  const CutoffPair cp = cutoff_profiles(dom);

  std::vector<std::vector<double>> omega_scaled;
  for (int a = 0; a < d; ++a)
    omega_scaled.push_back(
        periodic_on_domain_nodes(em.correctors[static_cast<std::size_t>(a)], 0, dom));

  WepsResult res;
  res.w.domain = dom;
  res.w.levels.assign(M + 1, std::vector<double>(dom.num_nodes(), 0.0));

  for (int a = 0; a < d; ++a) {
    SpaceTimeField v;
    v.domain = dom;
    v.levels.assign(M + 1, std::vector<double>(dom.num_nodes(), 0.0));
    for (std::size_t m = 0; m <= M; ++m) {
      const double e2 = cp.eta2[m];
      if (e2 == 0.0) continue;
      const auto& u = f0.levels[m];
      auto& lvl = v.levels[m];
      for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
        const double e1 = cp.eta1[node];
        if (e1 == 0.0) continue;
        lvl[node] = e1 * e2 * grad_at(dom, u, dom.unpack(node), node, a);
      }
    }
    const SpaceTimeField s = smooth(v, dom.epsilon, kernel);
    for (std::size_t m = 0; m <= M; ++m) {
      const auto& sv = s.levels[m];
      auto& w = res.w.levels[m];
      const auto& om = omega_scaled[static_cast<std::size_t>(a)];
      for (std::size_t node = 0; node < dom.num_nodes(); ++node)
        w[node] += om[node] * sv[node];
    }
  }

  for (std::size_t m = 0; m <= M; ++m) {
    auto& w = res.w.levels[m];
    const auto& fe = f_eps.levels[m];
    const auto& f_0 = f0.levels[m];
    for (std::size_t node = 0; node < dom.num_nodes(); ++node)
      w[node] = fe[node] - f_0[node] - dom.epsilon * w[node];
  }
  res.l2h1_norm = spacetime_norm(res.w, NormKind::H1);
  return res;
}

SpaceTimeField random_test_field(const DomainSpec& dom, std::uint64_t seed,
                                 int max_mode) {
  std::mt19937_64 rng(seed);
  struct Mode {
    std::array<int, 3> k;
    int wt;
    double amp, phase;
  };
  std::vector<Mode> modes;
  const int count = 6;
  for (int q = 0; q < count; ++q) {
    Mode mo;
    for (int a = 0; a < dom.dim; ++a)
      mo.k[static_cast<std::size_t>(a)] =
          static_cast<int>(uniform01(rng) * (2 * max_mode + 1)) - max_mode;
    mo.wt = static_cast<int>(uniform01(rng) * (2 * max_mode + 1)) - max_mode;
    mo.amp = 2.0 * uniform01(rng) - 1.0;
    mo.phase = kTwoPi * uniform01(rng);
    modes.push_back(mo);
  }

  const std::size_t M = static_cast<std::size_t>(dom.time_steps());
  SpaceTimeField f;
  f.domain = dom;
  f.levels.assign(M + 1, std::vector<double>(dom.num_nodes(), 0.0));
  for (std::size_t m = 0; m <= M; ++m) {
    const double t = static_cast<double>(m) * dom.tau;
    const double env_t = bump((t - 0.5 * dom.T) / (0.35 * dom.T));
    if (env_t == 0.0) continue;
    auto& lvl = f.levels[m];
    for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
      const auto x = dom.coords(node);
      double env = env_t;
      for (int a = 0; a < dom.dim; ++a)
        env *= bump((x[static_cast<std::size_t>(a)] - 0.5) / 0.35);
      if (env == 0.0) continue;
      double val = 0.0;
      for (const Mode& mo : modes) {
        double arg = mo.phase + kTwoPi * mo.wt * t / dom.T;
        for (int a = 0; a < dom.dim; ++a)
          arg += kTwoPi * mo.k[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
        val += mo.amp * std::cos(arg);
      }
      lvl[node] = env * val;
    }
  }
  return f;
}

std::vector<AppendixRow> appendix_constants(int sample_count,
                                            const std::vector<double>& eps_list,
                                            int dim, double T,
                                            const SmoothingKernel& kernel,
                                            std::uint64_t seed) {
  if (sample_count < 30)
    throw InvalidArgument("appendix_constants: at least 30 samples per eps required");

  std::vector<AppendixRow> rows;
  const std::vector<std::string> lemmas = {"lemma1_l2",  "lemma1_grad", "lemma1_hess",
                                           "lemma2",     "lemma3_l2",   "lemma3_grad"};

  for (std::size_t ei = 0; ei < eps_list.size(); ++ei) {
    const double eps = eps_list[ei];
    const DomainSpec dom =
        DomainSpec::make(dim, T, eps / 8.0, eps * eps / 8.0, eps);

    std::vector<std::vector<double>> ratios(lemmas.size());

    // periodic weight for the lemma-3 suite, fixed per rung
    const TorusGrid cell(dim, 32);
    std::mt19937_64 grng(seed ^ (0xa076'1d64'78bd'642fULL + ei));
    PeriodicField gper(cell, FieldRank::Scalar);
    for (std::size_t k = 0; k < cell.num_nodes(); ++k) {
      const auto y = cell.coords(k);
      double v = 1.0;
      for (int q = 0; q < 3; ++q) {
        double arg = kTwoPi * uniform01(grng);
        for (int a = 0; a < dim; ++a)
          arg += kTwoPi * (1 + q) * y[static_cast<std::size_t>(a)];
        v += (2.0 * uniform01(grng) - 1.0) * std::cos(arg);
      }
      gper.value(0, k) = v;
    }
    double g_l2 = 0.0;
    for (std::size_t k = 0; k < cell.num_nodes(); ++k)
      g_l2 += gper.value(0, k) * gper.value(0, k);
    g_l2 = std::sqrt(g_l2 / static_cast<double>(cell.num_nodes()));
    const std::vector<double> g_nodes = periodic_on_domain_nodes(gper, 0, dom);

    // lemma-3 windows: omega = [1/4,3/4]^d, (s,tau) = (T/4, 3T/4); the
    // dilation omega(eps) is realized as a grid-index dilation.
    const int dil = static_cast<int>(std::ceil(eps / dom.h));
    const int N = dom.cells_per_axis();
    auto in_omega = [&](std::size_t node) {
      const auto idx = dom.unpack(node);
      for (int a = 0; a < dim; ++a) {
        const double x = static_cast<double>(idx[static_cast<std::size_t>(a)]) * dom.h;
        if (x < 0.25 || x > 0.75) return false;
      }
      return true;
    };
    auto in_omega_eps = [&](std::size_t node) {
      const auto idx = dom.unpack(node);
      for (int a = 0; a < dim; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        const int lo = static_cast<int>(std::lround(0.25 * N)) - dil;
        const int hi = static_cast<int>(std::lround(0.75 * N)) + dil;
        if (i < lo || i > hi) return false;
      }
      return true;
    };

    for (int s = 0; s < sample_count; ++s) {
      const std::uint64_t sseed =
          seed ^ (0x9e37'79b9'7f4a'7c15ULL * (static_cast<std::uint64_t>(s) + 1) + ei);
      const SpaceTimeField phi = random_test_field(dom, sseed);
      const double phi_l2 = spacetime_norm(phi, NormKind::L2);
      if (phi_l2 < 1e-12) continue;

      const SpaceTimeField sphi = smooth(phi, eps, kernel);
      const double s_l2 = spacetime_norm(sphi, NormKind::L2);
      const double s_grad = st_seminorm(sphi, Seminorm::Grad);
      const double s_hess = st_seminorm(sphi, Seminorm::Hess);
      ratios[0].push_back(s_l2 / phi_l2);
      ratios[1].push_back(eps * s_grad / phi_l2);
      ratios[2].push_back(eps * eps * s_hess / phi_l2);

      // lemma 2: || grad S_eps f - grad f || <= C eps (||hess f|| + ||d_t f||)
      SpaceTimeField diff = sphi;
      for (std::size_t m = 0; m < diff.levels.size(); ++m)
        for (std::size_t k = 0; k < diff.levels[m].size(); ++k)
          diff.levels[m][k] -= phi.levels[m][k];
      const double num = st_seminorm(diff, Seminorm::Grad);
      const double den =
          eps * (st_seminorm(phi, Seminorm::Hess) + st_seminorm(phi, Seminorm::TimeDeriv));
      if (den > 1e-12) ratios[3].push_back(num / den);

      // lemma 3 with p = 2
      SpaceTimeField weighted = sphi;
      for (std::size_t m = 0; m < weighted.levels.size(); ++m)
        for (std::size_t k = 0; k < weighted.levels[m].size(); ++k)
          weighted.levels[m][k] *= g_nodes[k];
      const double lhs = masked_l2(weighted, 0.25 * T, 0.75 * T, in_omega);
      const double rhs = masked_l2(phi, 0.25 * T - eps * eps, 0.75 * T + eps * eps,
                                   in_omega_eps);
      if (rhs > 1e-12) ratios[4].push_back(lhs / (g_l2 * rhs));

      // gradient variant: eps ||g(x/eps) grad S_eps(f)||
      SpaceTimeField wgrad = sphi;
      for (std::size_t m = 0; m < wgrad.levels.size(); ++m) {
        const auto& u = sphi.levels[m];
        auto& lvl = wgrad.levels[m];
        for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
          double g2 = 0.0;
          for (int a = 0; a < dim; ++a) {
            const double g = grad_at(dom, u, dom.unpack(node), node, a);
            g2 += g * g;
          }
          lvl[node] = g_nodes[node] * std::sqrt(g2);
        }
      }
      const double lhs_g = eps * masked_l2(wgrad, 0.25 * T, 0.75 * T, in_omega);
      if (rhs > 1e-12) ratios[5].push_back(lhs_g / (g_l2 * rhs));
    }

    for (std::size_t li = 0; li < lemmas.size(); ++li) {
      auto& r = ratios[li];
      if (r.empty()) continue;
      std::sort(r.begin(), r.end());
      AppendixRow row;
      row.epsilon = eps;
      row.lemma = lemmas[li];
      row.ratio_max = r.back();
      row.ratio_median = (r.size() % 2 == 1)
                             ? r[r.size() / 2]
                             : 0.5 * (r[r.size() / 2 - 1] + r[r.size() / 2]);
      row.samples = static_cast<int>(r.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_appendix_csv(const std::filesystem::path& path,
                        const std::vector<AppendixRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("write_appendix_csv: cannot open " + path.string());
  out << "# lemma3 weight g is normed over one periodicity cell Y\n";
  out << "epsilon,lemma,ratio_max,ratio_median,samples\n";
  char buf[96];
  for (const AppendixRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%d", r.epsilon,
                  r.lemma.c_str(), r.ratio_max, r.ratio_median, r.samples);
    out << buf << "\n";
  }
  if (!out) throw IoError("write_appendix_csv: write failed " + path.string());
}

} // namespace parahom
