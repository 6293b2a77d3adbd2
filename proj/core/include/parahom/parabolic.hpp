// SPDX-License-Identifier: Apache-2.0
//
// Implicit-Euler finite-volume solvers on the unit box for the oscillatory
// divergence-form problem, the full oscillatory problem (validation role),
// and the homogenized problem; space-time norms; factorization rebuild.

#ifndef PARAHOM_PARABOLIC_HPP
#define PARAHOM_PARABOLIC_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "parahom/cell_spectral.hpp"
#include "parahom/homogenize.hpp"
#include "parahom/torus_field.hpp"

namespace parahom {

/// Space-time discretization of Omega x (0,T) with Omega = (0,1)^d.
/// Cells tile the box exactly: 1/h and 1/epsilon are integers; h <= eps/8
/// keeps the oscillations resolved and tau <= h balances the error orders.
struct DomainSpec {
  int dim = 1;
  double T = 0.5;
  double h = 1.0 / 64;
  double tau = 1.0 / 4096;
  double epsilon = 0.125;

  static DomainSpec make(int dim, double T, double h, double tau, double epsilon);

  int cells_per_axis() const;           // N = 1/h
  int nodes_per_axis() const;           // N + 1
  std::size_t num_nodes() const;        // (N+1)^d
  int time_steps() const;               // M = T/tau
  std::size_t interior_nodes() const;   // (N-1)^d

  std::size_t pack(const std::array<int, 3>& idx) const;
  std::array<int, 3> unpack(std::size_t node) const;
  std::array<double, 3> coords(std::size_t node) const;
  bool on_boundary(std::size_t node) const;
  /// Distance to the boundary of the unit box.
  double boundary_distance(std::size_t node) const;
};

enum class DatumMode { WellPrepared, IllPrepared, Plain };

struct InitialDatum {
  DatumMode mode = DatumMode::Plain;
  std::vector<double> base;  // values at grid nodes, zero on the boundary
};

/// Throws InvalidArgument unless the datum matches the grid and vanishes on
/// the boundary.
void validate_initial(const DomainSpec& domain, const std::vector<double>& base);

enum class ProblemKind { OscillatoryDivform, FullOscillatory, Homogenized };
enum class TimeScheme { ImplicitEuler, CrankNicolson };

struct ParabolicProblem {
  DomainSpec domain;
  ProblemKind kind = ProblemKind::Homogenized;
  TimeScheme scheme = TimeScheme::ImplicitEuler;

  std::optional<PeriodicField> zeta;    // oscillatory-divform
  std::optional<PeriodicField> Theta;   // oscillatory-divform
  std::optional<ConstTensor> tensor;    // homogenized
  std::optional<ProblemCoefficients> abc;  // full-oscillatory

  InitialDatum initial;

  static ParabolicProblem oscillatory(DomainSpec domain, PeriodicField zeta,
                                      PeriodicField Theta, InitialDatum initial);
  static ParabolicProblem homogenized(DomainSpec domain, ConstTensor tensor,
                                      InitialDatum initial);
  static ParabolicProblem full_oscillatory(DomainSpec domain,
                                           ProblemCoefficients abc,
                                           InitialDatum initial);
};

struct SolveInfo {
  bool energy_monotone = true;
  double max_energy_increase = 0.0;   // largest E(m+1) - E(m) observed, if any
  bool m_matrix = false;              // nonpositive off-diagonals + diagonal dominance
  long max_linear_iterations = 0;
  double max_linear_error = 0.0;
};

struct SpaceTimeField {
  DomainSpec domain;
  std::vector<std::vector<double>> levels;  // [time level][node], full grid
  SolveInfo info;
};

/// One implicit time-stepping engine behind all solve_* entry points; also
/// usable directly for streaming runs that must not store every level.
class ParabolicStepper {
public:
  explicit ParabolicStepper(const ParabolicProblem& problem);
  ~ParabolicStepper();
  ParabolicStepper(ParabolicStepper&&) noexcept;
  ParabolicStepper& operator=(ParabolicStepper&&) noexcept;

  void step();
  int level() const;
  double time() const;
  double energy() const;  // sum zeta_eps f^2 h^d
  const SolveInfo& info() const;
  const DomainSpec& domain() const;
  /// Writes the current state on the full grid (boundary zeros included).
  void copy_state(std::vector<double>& out) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Implicit Euler for zeta(x/eps) d_t f = div(Theta(x/eps) grad f); also the
/// homogenized constant-tensor case (same assembly and code path).
SpaceTimeField solve_divform(const ParabolicProblem& p);

/// Validation-only direct solve of the full oscillatory problem; capped at
/// eps >= 1/8 and requires h <= eps/16.
SpaceTimeField solve_full_oscillatory(const ParabolicProblem& p);

/// u(t,x) = e^{-lambda t / eps^2} v(t,x) psi(x/eps), psi evaluated through
/// the trigonometric interpolant of its periodic part times the exponential.
SpaceTimeField reconstruct_u(const SpaceTimeField& v, const CellEigenSolution& eig,
                             const DomainSpec& domain);

enum class NormKind { L2, H1, L2Subset };

/// Composite trapezoid in space and time; H1 adds centered-difference
/// gradients; L2Subset restricts to Omega_{T,delta}.
double spacetime_norm(const SpaceTimeField& f, NormKind kind, double delta = 0.0);

/// Single-level trapezoid integrals matching spacetime_norm's conventions
/// (exposed for streaming accumulation of space-time norms).
double level_l2_sq(const DomainSpec& dom, const std::vector<double>& u);
double level_h1_sq(const DomainSpec& dom, const std::vector<double>& u);

/// Pointwise psi(x/eps) on the domain grid (periodic part interpolated,
/// exponential factor exact).
std::vector<double> eigenfunction_on_grid(const CellEigenSolution& eig,
                                          const DomainSpec& domain);

/// Values of one periodic-field component at x/eps over the domain grid;
/// positions landing exactly on cell nodes are gathered, others go through
/// the trigonometric interpolant.
std::vector<double> periodic_on_domain_nodes(const PeriodicField& f, int comp,
                                             const DomainSpec& domain);

/// Snapshot export: binary row-major dump plus JSON manifest; CSV (t,x,f)
/// for 1D fields.
void export_snapshots(const std::filesystem::path& dir, const std::string& tag,
                      const SpaceTimeField& f, std::uint64_t problem_hash,
                      bool csv_slice = false);

} // namespace parahom

#endif
