// SPDX-License-Identifier: Apache-2.0
//
// Proof-side computable objects: the parabolic smoothing operator S_eps,
// the space/time cut-offs, the corrected difference w_eps, and measured
// constants for the appendix lemma suites.

#ifndef PARAHOM_ANALYSIS_HPP
#define PARAHOM_ANALYSIS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "parahom/homogenize.hpp"
#include "parahom/parabolic.hpp"

namespace parahom {

/// Mollifier profile for S_eps: a separable product of an even smooth bump
/// in scaled time (support |s| <= 1/2) and a radial smooth bump in scaled
/// space (support |y| <= 1/sqrt(2)), so the product is supported inside the
/// parabolic unit set {|t| + |x|^2 <= 1}. Discrete weights are renormalized
/// to unit mass on the target grid.
struct SmoothingKernel {
  std::function<double(double)> time_profile;   // even, of s~ in [-1/2, 1/2]
  std::function<double(double)> space_profile;  // radial, of r~ in [0, 1/sqrt(2)]
  double time_halfwidth = 0.5;
  double space_radius = 0.7071067811865476;

  static SmoothingKernel parabolic_default();
};

/// Tap weights of S_eps on a given space-time grid; each family sums to 1.
struct DiscreteKernel {
  int time_taps = 0;  // j in [-time_taps, time_taps]
  std::vector<double> time_weights;
  std::vector<std::array<int, 3>> space_offsets;
  std::vector<double> space_weights;
};

/// Throws KernelUnderresolved unless eps^2/tau >= 4 and eps/h >= 4.
DiscreteKernel discretize_kernel(const SmoothingKernel& kernel,
                                 const DomainSpec& domain);

/// S_eps(g): discrete convolution with the scaled kernel, zero-extension
/// outside Omega_T, output on the same grid.
SpaceTimeField smooth(const SpaceTimeField& g, double eps,
                      const SmoothingKernel& kernel);

struct CutoffPair {
  std::vector<double> eta1;  // per space node
  std::vector<double> eta2;  // per time level
  double epsilon = 0.0;
};

/// eta1: clamped linear ramp from 0 on Omega_{3 sqrt(eps)} to 1 off
/// Omega_{4 sqrt(eps)} (|grad eta1| <= 1/sqrt(eps) holds with equality; any
/// smooth profile over that window would exceed the bound). eta2: cubic
/// smoothstep, 0 on (0,4 eps] and (T-4 eps, T), 1 on (8 eps, T-8 eps).
/// Throws EpsilonTooLarge unless 4 sqrt(eps) < diam(Omega)/2 and 8 eps < T/2.
CutoffPair build_cutoffs(const DomainSpec& domain);

/// Same profiles without the admissibility pre: clamped so the pair stays
/// well defined at desk-scale eps (the eta1 plateau may be unreachable and
/// eta2 may vanish identically).
CutoffPair clamped_cutoffs(const DomainSpec& domain);

struct WepsResult {
  SpaceTimeField w;
  double l2h1_norm = 0.0;
};

/// w_eps = f_eps - f0 - eps omega(x/eps) . S_eps(eta1 eta2 grad f0).
/// Cut-offs are built internally with degeneracy-tolerant clamping so the
/// diagnostic stays defined at desk-scale eps; w_eps(0,.) == 0 whenever the
/// two inputs share the initial level.
WepsResult build_w_eps(const SpaceTimeField& f_eps, const SpaceTimeField& f0,
                       const EffectiveModel& em, const DomainSpec& domain,
                       const SmoothingKernel& kernel);

/// Random band-limited space-time field with a smooth compactly supported
/// envelope; deterministic per seed.
SpaceTimeField random_test_field(const DomainSpec& domain, std::uint64_t seed,
                                 int max_mode = 3);

struct AppendixRow {
  double epsilon = 0.0;
  std::string lemma;
  double ratio_max = 0.0;
  double ratio_median = 0.0;
  int samples = 0;
};

/// Measures the appendix lemma ratios over random samples: lemma1_l2,
/// lemma1_grad, lemma1_hess (operator bounds), lemma2 (commutator with the
/// gradient) and lemma3_l2 / lemma3_grad (periodic-weight bounds, with g
/// normed over one periodicity cell). Grid policy per rung: h = eps/8,
/// tau = eps^2/8.
std::vector<AppendixRow> appendix_constants(int sample_count,
                                            const std::vector<double>& eps_list,
                                            int dim, double T,
                                            const SmoothingKernel& kernel,
                                            std::uint64_t seed);

void write_appendix_csv(const std::filesystem::path& path,
                        const std::vector<AppendixRow>& rows);

} // namespace parahom

#endif
