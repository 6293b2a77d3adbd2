// SPDX-License-Identifier: Apache-2.0
//
// Named coefficient presets and initial-datum profiles used by the CLI, the
// experiment harness and the test corpus.

#ifndef PARAHOM_PRESETS_HPP
#define PARAHOM_PRESETS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "parahom/factorize.hpp"
#include "parahom/homogenize.hpp"
#include "parahom/parabolic.hpp"

namespace parahom::presets {

enum class PipelineKind { SectionOne, SectionTwo, Nondivergence };

struct CoefficientSet {
  PipelineKind pipeline = PipelineKind::SectionTwo;
  int dim = 1;
  std::optional<ProblemCoefficients> abc;
  std::optional<GeneralCoefficients> gc;
  std::optional<NondivergenceCoefficients> ndc;
};

// section-1 (A, b, c)
ProblemCoefficients classical(const TorusGrid& g);         // A=I, b=0, c=0
ProblemCoefficients constant_drift_1d(const TorusGrid& g); // A=1, b=1, c=0
ProblemCoefficients drift_var_1d(const TorusGrid& g);      // smooth variable 1D
ProblemCoefficients drift_2d(const TorusGrid& g);          // smooth 2D with drift
ProblemCoefficients random_smooth(const TorusGrid& g, std::uint64_t seed);

// section-2 (zeta, Theta)
GeneralCoefficients oscillatory_1d(const TorusGrid& g);      // zeta = 1
GeneralCoefficients oscillatory_zeta_1d(const TorusGrid& g); // zeta = 1 + 0.4 cos
GeneralCoefficients layered_2d(const TorusGrid& g);

// nondivergence (K, q, r)
NondivergenceCoefficients nondiv(const TorusGrid& g);  // K = (1+0.5 sin 2pi y1) I

/// Lookup by name ("classical-1d", "classical-2d", "constant-drift-1d",
/// "drift-var-1d", "drift-2d", "random-1d", "random-2d", "osc-1d",
/// "osc-zeta-1d", "layered-2d", "nondiv-1d", "nondiv-2d").
CoefficientSet by_name(const std::string& name, int n_cell, std::uint64_t seed);

/// Names of every shipped preset, for enumeration-style checks.
std::vector<std::string> shipped_names();

/// Initial-datum profile on the domain grid: "bump" (smooth, compactly
/// supported) or "sine" (first Dirichlet mode). Boundary nodes are exactly 0.
std::vector<double> datum(const std::string& expr, const DomainSpec& dom);

} // namespace parahom::presets

#endif
