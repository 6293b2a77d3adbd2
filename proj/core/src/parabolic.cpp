// SPDX-License-Identifier: Apache-2.0

#include "parahom/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <json.hpp>

namespace parahom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool near_integer(double x, double tol = 1e-9) {
  return std::abs(x - std::lround(x)) <= tol;
}

/// Exact rational position of a grid point mapped to the unit cell:
/// val = num/den in [0,1).
struct AxisPos {
  long num = 0;
  long den = 1;
  double val = 0.0;
};

AxisPos node_pos(long i, long N, long E) {
  AxisPos p;
  p.den = N;
  p.num = ((i * E) % N + N) % N;
  p.val = static_cast<double>(p.num) / static_cast<double>(p.den);
  return p;
}

AxisPos face_pos(long i, long N, long E) {
  AxisPos p;
  p.den = 2 * N;
  p.num = (((2 * i + 1) * E) % (2 * N) + 2 * N) % (2 * N);
  p.val = static_cast<double>(p.num) / static_cast<double>(p.den);
  return p;
}

/// Evaluate one component of a periodic field on the tensor grid of the
/// given per-axis cell positions. Positions that land exactly on cell nodes
/// are gathered directly; otherwise the trigonometric interpolant is used.
std::vector<double> eval_on_positions(const PeriodicField& f, int comp,
                                      const std::vector<std::vector<AxisPos>>& pos) {
  const TorusGrid& g = f.grid();
  const int d = g.dim;
  const long n = g.n;

  bool all_snapped = true;
  std::vector<std::vector<long>> snapped(static_cast<std::size_t>(d));
  for (int a = 0; a < d && all_snapped; ++a) {
    for (const AxisPos& p : pos[static_cast<std::size_t>(a)]) {
      if ((p.num * n) % p.den != 0) {
        all_snapped = false;
        break;
      }
      snapped[static_cast<std::size_t>(a)].push_back(((p.num * n) / p.den) % n);
    }
  }

  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= pos[static_cast<std::size_t>(a)].size();

  std::vector<double> out(total);
  if (all_snapped) {
    std::array<int, 3> idx{0, 0, 0};
    std::vector<std::size_t> counter(static_cast<std::size_t>(d), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      for (int a = d - 1; a >= 0; --a) {
        const std::size_t m = pos[static_cast<std::size_t>(a)].size();
        idx[static_cast<std::size_t>(a)] =
            static_cast<int>(snapped[static_cast<std::size_t>(a)][rem % m]);
        rem /= m;
      }
      out[flat] = f.value(comp, g.pack(idx));
    }
    return out;
  }

  TrigInterpolant interp(f, comp);
  std::vector<std::vector<double>> dpos(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a)
    for (const AxisPos& p : pos[static_cast<std::size_t>(a)])
      dpos[static_cast<std::size_t>(a)].push_back(p.val);
  return interp.eval_tensor(dpos);
}

using SpMat = Eigen::SparseMatrix<double>;

} // namespace

DomainSpec DomainSpec::make(int dim, double T, double h, double tau, double epsilon) {
  if (dim < 1 || dim > 3) throw InvalidArgument("DomainSpec: dim must be 1, 2 or 3");
  if (!(T > 0.0) || !(h > 0.0) || !(tau > 0.0))
    throw InvalidArgument("DomainSpec: T, h, tau must be positive");
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw InvalidArgument("DomainSpec: epsilon must lie in (0,1)");
  if (!near_integer(1.0 / h)) throw InvalidArgument("DomainSpec: 1/h must be an integer");
  if (!near_integer(1.0 / epsilon))
    throw InvalidArgument("DomainSpec: 1/epsilon must be an integer (cells tile the box)");
  if (h > epsilon / 8.0 + 1e-12)
    throw InvalidArgument("DomainSpec: h must not exceed epsilon/8");
  if (tau > h + 1e-12) throw InvalidArgument("DomainSpec: tau must not exceed h");
  if (!near_integer(T / tau, 1e-6))
    throw InvalidArgument("DomainSpec: T/tau must be an integer");
  return DomainSpec{dim, T, h, tau, epsilon};
}

int DomainSpec::cells_per_axis() const { return static_cast<int>(std::lround(1.0 / h)); }
int DomainSpec::nodes_per_axis() const { return cells_per_axis() + 1; }

std::size_t DomainSpec::num_nodes() const {
  std::size_t t = 1;
  for (int a = 0; a < dim; ++a) t *= static_cast<std::size_t>(nodes_per_axis());
  return t;
}

int DomainSpec::time_steps() const { return static_cast<int>(std::lround(T / tau)); }

std::size_t DomainSpec::interior_nodes() const {
  std::size_t t = 1;
  for (int a = 0; a < dim; ++a) t *= static_cast<std::size_t>(cells_per_axis() - 1);
  return t;
}

std::size_t DomainSpec::pack(const std::array<int, 3>& idx) const {
  const int np = nodes_per_axis();
  std::size_t node = 0;
  for (int a = 0; a < dim; ++a)
    node = node * static_cast<std::size_t>(np) +
           static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]);
  return node;
}

std::array<int, 3> DomainSpec::unpack(std::size_t node) const {
  const std::size_t np = static_cast<std::size_t>(nodes_per_axis());
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim - 1; a >= 0; --a) {
    idx[static_cast<std::size_t>(a)] = static_cast<int>(node % np);
    node /= np;
  }
  return idx;
}

std::array<double, 3> DomainSpec::coords(std::size_t node) const {
  const auto idx = unpack(node);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a)
    x[static_cast<std::size_t>(a)] = static_cast<double>(idx[static_cast<std::size_t>(a)]) * h;
  return x;
}

bool DomainSpec::on_boundary(std::size_t node) const {
  const auto idx = unpack(node);
  const int N = cells_per_axis();
  for (int a = 0; a < dim; ++a) {
    const int i = idx[static_cast<std::size_t>(a)];
    if (i == 0 || i == N) return true;
  }
  return false;
}

double DomainSpec::boundary_distance(std::size_t node) const {
  const auto x = coords(node);
  double dist = 1.0;
  for (int a = 0; a < dim; ++a) {
    const double xa = x[static_cast<std::size_t>(a)];
    dist = std::min({dist, xa, 1.0 - xa});
  }
  return dist;
}

void validate_initial(const DomainSpec& domain, const std::vector<double>& base) {
  if (base.size() != domain.num_nodes())
    throw InvalidArgument("initial datum: wrong number of node values");
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (!std::isfinite(base[k])) throw NonFiniteState("initial datum: non-finite value");
    if (domain.on_boundary(k) && base[k] != 0.0)
      throw InvalidArgument("initial datum: must vanish on the boundary");
  }
}

ParabolicProblem ParabolicProblem::oscillatory(DomainSpec domain, PeriodicField zeta,
                                               PeriodicField Theta, InitialDatum initial) {
  if (zeta.rank() != FieldRank::Scalar || Theta.rank() != FieldRank::Matrix)
    throw InvalidArgument("ParabolicProblem: zeta scalar and Theta matrix expected");
  if (zeta.grid().dim != domain.dim)
    throw GridMismatch("ParabolicProblem: coefficient dimension mismatch");
  require_same_grid(zeta, Theta, "ParabolicProblem");
  validate_initial(domain, initial.base);
  ParabolicProblem p;
  p.domain = domain;
  p.kind = ProblemKind::OscillatoryDivform;
  p.zeta = std::move(zeta);
  p.Theta = std::move(Theta);
  p.initial = std::move(initial);
  return p;
}

ParabolicProblem ParabolicProblem::homogenized(DomainSpec domain, ConstTensor tensor,
                                               InitialDatum initial) {
  if (tensor.dim != domain.dim)
    throw GridMismatch("ParabolicProblem: tensor dimension mismatch");
  validate_initial(domain, initial.base);
  ParabolicProblem p;
  p.domain = domain;
  p.kind = ProblemKind::Homogenized;
  p.tensor = tensor;
  p.initial = std::move(initial);
  return p;
}

ParabolicProblem ParabolicProblem::full_oscillatory(DomainSpec domain,
                                                    ProblemCoefficients abc,
                                                    InitialDatum initial) {
  if (abc.dim() != domain.dim)
    throw GridMismatch("ParabolicProblem: coefficient dimension mismatch");
  validate_initial(domain, initial.base);
  ParabolicProblem p;
  p.domain = domain;
  p.kind = ProblemKind::FullOscillatory;
  p.abc = std::move(abc);
  p.initial = std::move(initial);
  return p;
}

// ---------------------------------------------------------------------------
// stepping engine

struct ParabolicStepper::Impl {
  DomainSpec domain;
  TimeScheme scheme = TimeScheme::ImplicitEuler;
  int level = 0;
  double hd = 1.0;

  std::vector<std::size_t> interior_to_full;
  std::vector<long> full_to_interior;  // -1 for boundary
  std::vector<double> zeta_int;

  SpMat S;       // system matrix
  SpMat K;       // stiffness (kept for Crank-Nicolson)
  Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> solver;
  Eigen::VectorXd f;
  double energy_prev = 0.0;
  SolveInfo info;

  double compute_energy() const {
    double e = 0.0;
    for (long k = 0; k < f.size(); ++k)
      e += zeta_int[static_cast<std::size_t>(k)] * f[k] * f[k];
    return e * hd;
  }
};

namespace {

/// Per-axis face tensors: faces[a] holds d*d entries per face point, the
/// face grid replacing axis a's nodes by its N cell midpoints.
struct FaceData {
  std::array<std::vector<double>, 3> faces;
  std::array<std::array<std::size_t, 3>, 3> shape;  // [axis][b] grid extents
};

std::size_t face_index(const FaceData& fd, int a, const std::array<int, 3>& idx, int dim) {
  std::size_t flat = 0;
  for (int b = 0; b < dim; ++b)
    flat = flat * fd.shape[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +
           static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
  return flat;
}

FaceData build_face_tensors(const DomainSpec& dom, const PeriodicField* Theta,
                            const ConstTensor* constant) {
  const int d = dom.dim;
  const long N = dom.cells_per_axis();
  const long E = std::lround(1.0 / dom.epsilon);

  FaceData fd;
  for (int a = 0; a < d; ++a) {
    std::size_t total = 1;
    for (int b = 0; b < d; ++b) {
      fd.shape[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          static_cast<std::size_t>(b == a ? N : N + 1);
      total *= fd.shape[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
    fd.faces[static_cast<std::size_t>(a)].assign(total * static_cast<std::size_t>(d * d), 0.0);

    if (constant) {
      for (std::size_t p = 0; p < total; ++p)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j)
            fd.faces[static_cast<std::size_t>(a)][p * static_cast<std::size_t>(d * d) +
                                                  static_cast<std::size_t>(i * d + j)] =
                (*constant)(i, j);
      continue;
    }

    std::vector<std::vector<AxisPos>> pos(static_cast<std::size_t>(d));
    for (int b = 0; b < d; ++b) {
      const long count = (b == a) ? N : N + 1;
      for (long i = 0; i < count; ++i)
        pos[static_cast<std::size_t>(b)].push_back(b == a ? face_pos(i, N, E)
                                                          : node_pos(i, N, E));
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const auto vals = eval_on_positions(*Theta, Theta->mat(i, j), pos);
        for (std::size_t p = 0; p < total; ++p)
          fd.faces[static_cast<std::size_t>(a)][p * static_cast<std::size_t>(d * d) +
                                                static_cast<std::size_t>(i * d + j)] = vals[p];
      }
  }
  return fd;
}

std::vector<double> node_values_scaled(const PeriodicField& field, int comp,
                                       const DomainSpec& dom) {
  const int d = dom.dim;
  const long N = dom.cells_per_axis();
  const long E = std::lround(1.0 / dom.epsilon);
  std::vector<std::vector<AxisPos>> pos(static_cast<std::size_t>(d));
  for (int b = 0; b < d; ++b)
    for (long i = 0; i <= N; ++i)
      pos[static_cast<std::size_t>(b)].push_back(node_pos(i, N, E));
  return eval_on_positions(field, comp, pos);
}

} // namespace

std::vector<double> periodic_on_domain_nodes(const PeriodicField& f, int comp,
                                             const DomainSpec& domain) {
  if (f.grid().dim != domain.dim)
    throw GridMismatch("periodic_on_domain_nodes: dimension mismatch");
  return node_values_scaled(f, comp, domain);
}

ParabolicStepper::ParabolicStepper(const ParabolicProblem& problem)
    : impl_(std::make_unique<Impl>()) {
  const DomainSpec& dom = problem.domain;
  const int d = dom.dim;
  const int N = dom.cells_per_axis();
  const double h = dom.h;
  const double tau = dom.tau;

  impl_->domain = dom;
  impl_->scheme = problem.scheme;
  impl_->hd = std::pow(h, d);

  // interior index maps
  impl_->full_to_interior.assign(dom.num_nodes(), -1);
  for (std::size_t node = 0; node < dom.num_nodes(); ++node)
    if (!dom.on_boundary(node)) {
      impl_->full_to_interior[node] = static_cast<long>(impl_->interior_to_full.size());
      impl_->interior_to_full.push_back(node);
    }
  const std::size_t n_int = impl_->interior_to_full.size();

  // coefficient data on the domain grid
  const PeriodicField* Theta = nullptr;
  const ConstTensor* constant = nullptr;
  std::vector<double> zeta_nodes(dom.num_nodes(), 1.0);
  std::vector<std::vector<double>> drift_nodes;
  std::vector<double> reaction_nodes;

  switch (problem.kind) {
    case ProblemKind::OscillatoryDivform:
      Theta = &*problem.Theta;
      zeta_nodes = node_values_scaled(*problem.zeta, 0, dom);
      break;
    case ProblemKind::Homogenized:
      constant = &*problem.tensor;
      break;
    case ProblemKind::FullOscillatory: {
      Theta = &problem.abc->A;
      for (int a = 0; a < d; ++a)
        drift_nodes.push_back(node_values_scaled(problem.abc->b, a, dom));
      reaction_nodes = node_values_scaled(problem.abc->c, 0, dom);
      break;
    }
  }

  const FaceData fd = build_face_tensors(dom, Theta, constant);

  impl_->zeta_int.resize(n_int);
  for (std::size_t r = 0; r < n_int; ++r)
    impl_->zeta_int[r] = zeta_nodes[impl_->interior_to_full[r]];

  // stiffness assembly: K f = -div(Theta grad f) with face-midpoint
  // coefficients and averaged cross-gradients; drift centered, reaction
  // mass-lumped (full-oscillatory only)
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n_int * static_cast<std::size_t>(3 * d * d + 1));
  const double inv_eps = 1.0 / dom.epsilon;
  const double inv_eps2 = inv_eps * inv_eps;

  for (std::size_t r = 0; r < n_int; ++r) {
    const std::size_t node = impl_->interior_to_full[r];
    const auto P = dom.unpack(node);
    std::map<std::size_t, double> row;

    auto add = [&](std::array<int, 3> idx, double w) {
      for (int b = 0; b < d; ++b) {
        const int i = idx[static_cast<std::size_t>(b)];
        if (i == 0 || i == N) return;  // homogeneous Dirichlet, eliminated
      }
      row[dom.pack(idx)] += w;
    };

    for (int a = 0; a < d; ++a) {
      for (int side = 0; side < 2; ++side) {
        // face between L and R = L + e_a; P is R for side 0, L for side 1
        std::array<int, 3> L = P;
        if (side == 0) L[static_cast<std::size_t>(a)] -= 1;
        std::array<int, 3> R = L;
        R[static_cast<std::size_t>(a)] += 1;
        std::array<int, 3> fidx = L;  // face index along axis a equals L's index
        const std::size_t fp = face_index(fd, a, fidx, d);
        const double* Tf =
            fd.faces[static_cast<std::size_t>(a)].data() + fp * static_cast<std::size_t>(d * d);
        // K = -div(flux): row(P) += (F_minus - F_plus)/h, so the plus face
        // (side 1, P == L) enters with -1 and the minus face with +1.
        const double sgn = (side == 1) ? -1.0 : 1.0;

        // normal gradient: (f_R - f_L)/h
        const double wa = sgn * Tf[a * d + a] / (h * h);
        add(R, wa);
        add(L, -wa);

        // cross gradients at the face: averaged centered differences
        for (int b = 0; b < d; ++b) {
          if (b == a) continue;
          const double wb = sgn * Tf[a * d + b] / (4.0 * h * h);
          for (const auto& base : {L, R}) {
            std::array<int, 3> up = base, dn = base;
            up[static_cast<std::size_t>(b)] += 1;
            dn[static_cast<std::size_t>(b)] -= 1;
            add(up, wb);
            add(dn, -wb);
          }
        }
      }
      if (!drift_nodes.empty()) {
        // centered drift: (b_a/eps) (f_{P+e_a} - f_{P-e_a}) / (2h)
        const double ba = drift_nodes[static_cast<std::size_t>(a)][node] * inv_eps / (2.0 * h);
        std::array<int, 3> up = P, dn = P;
        up[static_cast<std::size_t>(a)] += 1;
        dn[static_cast<std::size_t>(a)] -= 1;
        add(up, ba);
        add(dn, -ba);
      }
    }
    if (!reaction_nodes.empty()) row[node] += reaction_nodes[node] * inv_eps2;

    for (const auto& [col_full, w] : row) {
      const long c = impl_->full_to_interior[col_full];
      if (c >= 0) trips.emplace_back(static_cast<int>(r), static_cast<int>(c), w);
    }
  }

  impl_->K.resize(static_cast<long>(n_int), static_cast<long>(n_int));
  impl_->K.setFromTriplets(trips.begin(), trips.end());

  // S = diag(zeta)/tau + K (implicit Euler) or + K/2 (Crank-Nicolson)
  const double kfac = (problem.scheme == TimeScheme::CrankNicolson) ? 0.5 : 1.0;
  impl_->S = impl_->K * kfac;
  for (std::size_t r = 0; r < n_int; ++r)
    impl_->S.coeffRef(static_cast<long>(r), static_cast<long>(r)) += impl_->zeta_int[r] / tau;
  impl_->S.makeCompressed();

  // diagonal dominance / sign pattern check (discrete maximum principle)
  bool m_matrix = true;
  for (int col = 0; col < impl_->S.outerSize() && m_matrix; ++col)
    for (SpMat::InnerIterator it(impl_->S, col); it; ++it) {
      if (it.row() != it.col() && it.value() > 1e-13) m_matrix = false;
    }
  if (m_matrix) {
    Eigen::VectorXd diag = impl_->S.diagonal();
    Eigen::VectorXd offsum = Eigen::VectorXd::Zero(static_cast<long>(n_int));
    for (int col = 0; col < impl_->S.outerSize(); ++col)
      for (SpMat::InnerIterator it(impl_->S, col); it; ++it)
        if (it.row() != it.col()) offsum[it.row()] += std::abs(it.value());
    for (long r = 0; r < diag.size() && m_matrix; ++r)
      if (diag[r] < offsum[r] - 1e-12 * std::abs(diag[r])) m_matrix = false;
  }
  impl_->info.m_matrix = m_matrix;

  impl_->solver.setTolerance(1e-10);
  impl_->solver.setMaxIterations(10000);
  impl_->solver.compute(impl_->S);
  if (impl_->solver.info() != Eigen::Success)
    throw SolverFailure("ParabolicStepper: preconditioner setup failed");

  impl_->f.resize(static_cast<long>(n_int));
  for (std::size_t r = 0; r < n_int; ++r)
    impl_->f[static_cast<long>(r)] = problem.initial.base[impl_->interior_to_full[r]];
  impl_->energy_prev = impl_->compute_energy();
}

ParabolicStepper::~ParabolicStepper() = default;
ParabolicStepper::ParabolicStepper(ParabolicStepper&&) noexcept = default;
ParabolicStepper& ParabolicStepper::operator=(ParabolicStepper&&) noexcept = default;

void ParabolicStepper::step() {
  Impl& im = *impl_;
  const double tau = im.domain.tau;
  Eigen::VectorXd rhs(im.f.size());
  if (im.scheme == TimeScheme::CrankNicolson) {
    rhs = -0.5 * (im.K * im.f);
    for (long r = 0; r < im.f.size(); ++r)
      rhs[r] += im.zeta_int[static_cast<std::size_t>(r)] / tau * im.f[r];
  } else {
    for (long r = 0; r < im.f.size(); ++r)
      rhs[r] = im.zeta_int[static_cast<std::size_t>(r)] / tau * im.f[r];
  }

  im.f = im.solver.solveWithGuess(rhs, im.f);
  if (im.solver.info() != Eigen::Success)
    throw SolverFailure("ParabolicStepper: linear solve failed at level " +
                        std::to_string(im.level + 1));
  if (!im.f.allFinite())
    throw NonFiniteState("ParabolicStepper: non-finite state at level " +
                         std::to_string(im.level + 1));
  im.info.max_linear_iterations =
      std::max(im.info.max_linear_iterations, static_cast<long>(im.solver.iterations()));
  im.info.max_linear_error = std::max(im.info.max_linear_error, im.solver.error());

  const double e = im.compute_energy();
  if (e > im.energy_prev) {
    im.info.energy_monotone = false;
    im.info.max_energy_increase = std::max(im.info.max_energy_increase, e - im.energy_prev);
  }
  im.energy_prev = e;
  ++im.level;
}

int ParabolicStepper::level() const { return impl_->level; }
double ParabolicStepper::time() const { return impl_->level * impl_->domain.tau; }
double ParabolicStepper::energy() const { return impl_->energy_prev; }
const SolveInfo& ParabolicStepper::info() const { return impl_->info; }
const DomainSpec& ParabolicStepper::domain() const { return impl_->domain; }

void ParabolicStepper::copy_state(std::vector<double>& out) const {
  const Impl& im = *impl_;
  out.assign(im.domain.num_nodes(), 0.0);
  for (std::size_t r = 0; r < im.interior_to_full.size(); ++r)
    out[im.interior_to_full[r]] = im.f[static_cast<long>(r)];
}

namespace {

SpaceTimeField run_to_end(const ParabolicProblem& p) {
  ParabolicStepper st(p);
  SpaceTimeField out;
  out.domain = p.domain;
  const int M = p.domain.time_steps();
  out.levels.reserve(static_cast<std::size_t>(M) + 1);
  std::vector<double> buf;
  st.copy_state(buf);
  out.levels.push_back(buf);
  for (int m = 0; m < M; ++m) {
    st.step();
    st.copy_state(buf);
    out.levels.push_back(buf);
  }
  out.info = st.info();
  return out;
}

} // namespace

SpaceTimeField solve_divform(const ParabolicProblem& p) {
  if (p.kind != ProblemKind::OscillatoryDivform && p.kind != ProblemKind::Homogenized)
    throw InvalidArgument("solve_divform: oscillatory-divform or homogenized kind expected");
  return run_to_end(p);
}

SpaceTimeField solve_full_oscillatory(const ParabolicProblem& p) {
  if (p.kind != ProblemKind::FullOscillatory)
    throw InvalidArgument("solve_full_oscillatory: full-oscillatory kind expected");
  if (p.domain.epsilon < 0.125 - 1e-12)
    throw StiffnessCap("solve_full_oscillatory: eps below the 1/8 validation threshold");
  if (p.domain.h > p.domain.epsilon / 16.0 + 1e-12)
    throw StiffnessCap("solve_full_oscillatory: h must not exceed eps/16");
  return run_to_end(p);
}

std::vector<double> eigenfunction_on_grid(const CellEigenSolution& eig,
                                          const DomainSpec& domain) {
  if (eig.dim() != domain.dim)
    throw GridMismatch("eigenfunction_on_grid: dimension mismatch");
  std::vector<double> periodic = periodic_on_domain_nodes(eig.psi, 0, domain);
  for (std::size_t node = 0; node < domain.num_nodes(); ++node) {
    const auto x = domain.coords(node);
    double phase = 0.0;
    for (int a = 0; a < domain.dim; ++a)
      phase += eig.theta[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
    periodic[node] *= std::exp(kTwoPi * phase / domain.epsilon);
  }
  return periodic;
}

SpaceTimeField reconstruct_u(const SpaceTimeField& v, const CellEigenSolution& eig,
                             const DomainSpec& domain) {
  if (v.domain.dim != domain.dim || v.domain.nodes_per_axis() != domain.nodes_per_axis() ||
      v.domain.time_steps() != domain.time_steps() ||
      std::abs(v.domain.epsilon - domain.epsilon) > 1e-14)
    throw GridMismatch("reconstruct_u: v does not live on the given domain");

  const std::vector<double> psi = eigenfunction_on_grid(eig, domain);
  SpaceTimeField out;
  out.domain = domain;
  out.levels.resize(v.levels.size());
  const double eps2 = domain.epsilon * domain.epsilon;
  for (std::size_t m = 0; m < v.levels.size(); ++m) {
    const double factor = std::exp(-eig.lambda * (static_cast<double>(m) * domain.tau) / eps2);
    out.levels[m].resize(v.levels[m].size());
    for (std::size_t k = 0; k < v.levels[m].size(); ++k)
      out.levels[m][k] = factor * v.levels[m][k] * psi[k];
  }
  return out;
}

namespace {

double node_gradient(const DomainSpec& dom, const std::vector<double>& u,
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

double level_quadrature(const SpaceTimeField& f, std::size_t m, NormKind kind,
                        double delta) {
  const DomainSpec& dom = f.domain;
  const int d = dom.dim;
  const int N = dom.cells_per_axis();
  const std::vector<double>& u = f.levels[m];
  const double t = static_cast<double>(m) * dom.tau;

  const bool time_in_subset = (t < delta * delta) || (t > dom.T - delta * delta);

  double acc = 0.0;
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    const auto idx = dom.unpack(node);
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      if (i == 0 || i == N) w *= 0.5;
    }
    if (kind == NormKind::L2Subset &&
        !(time_in_subset || dom.boundary_distance(node) < delta))
      continue;

    double val = u[node] * u[node];
    if (kind == NormKind::H1)
      for (int a = 0; a < d; ++a) {
        const double g = node_gradient(dom, u, idx, node, a);
        val += g * g;
      }
    acc += w * val;
  }
  return acc * std::pow(dom.h, d);
}

} // namespace

double level_l2_sq(const DomainSpec& dom, const std::vector<double>& u) {
  const int N = dom.cells_per_axis();
  double acc = 0.0;
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    const auto idx = dom.unpack(node);
    double w = 1.0;
    for (int a = 0; a < dom.dim; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      if (i == 0 || i == N) w *= 0.5;
    }
    acc += w * u[node] * u[node];
  }
  return acc * std::pow(dom.h, dom.dim);
}

double level_h1_sq(const DomainSpec& dom, const std::vector<double>& u) {
  const int N = dom.cells_per_axis();
  double acc = 0.0;
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    const auto idx = dom.unpack(node);
    double w = 1.0;
    for (int a = 0; a < dom.dim; ++a) {
      const int i = idx[static_cast<std::size_t>(a)];
      if (i == 0 || i == N) w *= 0.5;
    }
    double val = u[node] * u[node];
    for (int a = 0; a < dom.dim; ++a) {
      const double g = node_gradient(dom, u, idx, node, a);
      val += g * g;
    }
    acc += w * val;
  }
  return acc * std::pow(dom.h, dom.dim);
}

double spacetime_norm(const SpaceTimeField& f, NormKind kind, double delta) {
  if (f.levels.empty()) throw InvalidArgument("spacetime_norm: empty field");
  if (f.levels.size() != static_cast<std::size_t>(f.domain.time_steps()) + 1)
    throw GridMismatch("spacetime_norm: level count does not match the domain");
  double acc = 0.0;
  const std::size_t M = f.levels.size() - 1;
  for (std::size_t m = 0; m <= M; ++m) {
    const double wt = (m == 0 || m == M) ? 0.5 : 1.0;
    acc += wt * level_quadrature(f, m, kind, delta) * f.domain.tau;
  }
  return std::sqrt(acc);
}

void export_snapshots(const std::filesystem::path& dir, const std::string& tag,
                      const SpaceTimeField& f, std::uint64_t problem_hash,
                      bool csv_slice) {
  std::filesystem::create_directories(dir);
  const auto bin_path = dir / (tag + ".bin");
  {
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw IoError("export_snapshots: cannot open " + bin_path.string());
    const char magic[8] = {'P', 'H', 'S', 'N', 'A', 'P', '0', '1'};
    out.write(magic, 8);
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(f.domain.dim),
                                   static_cast<std::uint64_t>(f.domain.nodes_per_axis())};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    const std::uint64_t levels = f.levels.size();
    out.write(reinterpret_cast<const char*>(&levels), sizeof(levels));
    for (const auto& lvl : f.levels)
      out.write(reinterpret_cast<const char*>(lvl.data()),
                static_cast<std::streamsize>(lvl.size() * sizeof(double)));
    if (!out) throw IoError("export_snapshots: write failed " + bin_path.string());
  }
  {
    nlohmann::ordered_json j;
    j["grid"] = {{"dim", f.domain.dim},
                 {"nodes_per_axis", f.domain.nodes_per_axis()},
                 {"h", f.domain.h},
                 {"tau", f.domain.tau},
                 {"T", f.domain.T},
                 {"epsilon", f.domain.epsilon}};
    j["levels"] = f.levels.size();
    j["problem_hash"] = problem_hash;
    j["data"] = tag + ".bin";
    const auto manifest = dir / (tag + ".json");
    std::ofstream out(manifest);
    if (!out) throw IoError("export_snapshots: cannot open " + manifest.string());
    out << j.dump(2) << "\n";
  }
  if (csv_slice && f.domain.dim == 1) {
    const auto csv = dir / (tag + ".csv");
    std::ofstream out(csv);
    if (!out) throw IoError("export_snapshots: cannot open " + csv.string());
    out << "t,x,f\n";
    char buf[96];
    for (std::size_t m = 0; m < f.levels.size(); ++m)
      for (std::size_t k = 0; k < f.levels[m].size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g",
                      static_cast<double>(m) * f.domain.tau,
                      static_cast<double>(k) * f.domain.h, f.levels[m][k]);
        out << buf << "\n";
      }
  }
}

} // namespace parahom
