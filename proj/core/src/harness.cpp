// SPDX-License-Identifier: Apache-2.0

#include "parahom/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <thread>

namespace parahom {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_dyadic(double eps) {
  const double k = std::log2(1.0 / eps);
  return std::abs(k - std::lround(k)) < 1e-9;
}

} // namespace

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_field(const PeriodicField& f, std::uint64_t seed) {
  std::uint64_t h = seed;
  const int meta[3] = {f.grid().dim, f.grid().n, static_cast<int>(f.rank())};
  h = fnv1a(meta, sizeof(meta), h);
  h = fnv1a(f.data().data(), f.data().size() * sizeof(double), h);
  return h;
}

double GridPolicy::h_of(double eps) const {
  if (h_policy == "eps/8") return eps / 8.0;
  if (h_policy == "eps/16") return eps / 16.0;
  throw InvalidArgument("GridPolicy: unknown h_policy " + h_policy);
}

double GridPolicy::tau_of(double h) const {
  if (tau_policy == "h^2") return h * h;
  if (tau_policy == "h") return h;
  throw InvalidArgument("GridPolicy: unknown tau_policy " + tau_policy);
}

void SweepConfig::validate() const {
  if (pipeline != "section-1" && pipeline != "section-2" && pipeline != "nondivergence")
    throw InvalidArgument("SweepConfig: unknown pipeline " + pipeline);
  if (epsilons.size() < 3)
    throw InvalidArgument("SweepConfig: epsilon ladder must have at least 3 rungs");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0) || !(epsilons[i] < 1.0) || !is_dyadic(epsilons[i]))
      throw InvalidArgument("SweepConfig: each epsilon must be 1/2^k in (0,1)");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
      throw InvalidArgument("SweepConfig: epsilon ladder must be descending");
  }
  if (!(T > 0.0)) throw InvalidArgument("SweepConfig: T must be positive");
  if (datum.mode != DatumMode::Plain && pipeline == "section-2")
    throw InvalidArgument("SweepConfig: prepared datum modes require a section-1 pipeline");
  (void)GridPolicy{grid}.h_of(0.5);         // validates policy strings
  (void)GridPolicy{grid}.tau_of(0.5);
  const int dim = import.active() ? import.dim
                                  : presets::by_name(preset, grid.n_cell, seed).dim;
  for (double eps : epsilons) {
    const double h = grid.h_of(eps);
    (void)DomainSpec::make(dim, T, h, grid.tau_of(h), eps);
  }
  if (workers < 0) throw InvalidArgument("SweepConfig: workers must be >= 0");
}

nlohmann::ordered_json SweepConfig::to_json() const {
  nlohmann::ordered_json j;
  j["pipeline"] = pipeline;
  if (import.active()) {
    nlohmann::ordered_json imp;
    imp["dim"] = import.dim;
    imp["ellipticity"] = import.ellipticity;
    if (!import.zeta_csv.empty()) imp["zeta_csv"] = import.zeta_csv;
    if (!import.theta_csv.empty()) imp["theta_csv"] = import.theta_csv;
    if (!import.a_csv.empty()) imp["a_csv"] = import.a_csv;
    if (!import.b_csv.empty()) imp["b_csv"] = import.b_csv;
    if (!import.c_csv.empty()) imp["c_csv"] = import.c_csv;
    if (!import.k_csv.empty()) imp["k_csv"] = import.k_csv;
    if (!import.q_csv.empty()) imp["q_csv"] = import.q_csv;
    if (!import.r_csv.empty()) imp["r_csv"] = import.r_csv;
    j["import"] = imp;
  } else {
    j["preset"] = preset;
  }
  j["epsilons"] = epsilons;
  j["grid"] = {{"n_cell", grid.n_cell},
               {"h_policy", grid.h_policy},
               {"tau_policy", grid.tau_policy}};
  const char* mode = datum.mode == DatumMode::WellPrepared  ? "well-prepared"
                     : datum.mode == DatumMode::IllPrepared ? "ill-prepared"
                                                            : "plain";
  j["datum"] = {{"mode", mode}, {"expr", datum.expr}};
  j["T"] = T;
  j["seed"] = seed;
  j["workers"] = workers;
  j["emit_timings"] = emit_timings;
  j["plot"] = plot;
  return j;
}

SweepConfig SweepConfig::from_json(const nlohmann::json& j) {
  SweepConfig cfg;
  cfg.pipeline = j.at("pipeline").get<std::string>();
  if (j.contains("import")) {
    const auto& imp = j.at("import");
    cfg.import.dim = imp.at("dim").get<int>();
    cfg.import.ellipticity = imp.value("ellipticity", 0.0);
    cfg.import.zeta_csv = imp.value("zeta_csv", "");
    cfg.import.theta_csv = imp.value("theta_csv", "");
    cfg.import.a_csv = imp.value("a_csv", "");
    cfg.import.b_csv = imp.value("b_csv", "");
    cfg.import.c_csv = imp.value("c_csv", "");
    cfg.import.k_csv = imp.value("k_csv", "");
    cfg.import.q_csv = imp.value("q_csv", "");
    cfg.import.r_csv = imp.value("r_csv", "");
  } else {
    cfg.preset = j.at("preset").get<std::string>();
  }
  cfg.epsilons = j.at("epsilons").get<std::vector<double>>();
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    cfg.grid.n_cell = g.value("n_cell", 64);
    cfg.grid.h_policy = g.value("h_policy", "eps/8");
    cfg.grid.tau_policy = g.value("tau_policy", "h^2");
  }
  if (j.contains("datum")) {
    const auto& dd = j.at("datum");
    const std::string mode = dd.value("mode", "plain");
    if (mode == "well-prepared") cfg.datum.mode = DatumMode::WellPrepared;
    else if (mode == "ill-prepared") cfg.datum.mode = DatumMode::IllPrepared;
    else if (mode == "plain") cfg.datum.mode = DatumMode::Plain;
    else throw InvalidArgument("SweepConfig: unknown datum mode " + mode);
    cfg.datum.expr = dd.value("expr", "bump");
  }
  cfg.T = j.at("T").get<double>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.workers = j.value("workers", 1);
  cfg.emit_timings = j.value("emit_timings", false);
  cfg.plot = j.value("plot", false);
  return cfg;
}

SweepConfig SweepConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("SweepConfig: cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

std::uint64_t SweepConfig::hash() const {
  const std::string dump = to_json().dump();
  return fnv1a(dump.data(), dump.size());
}

RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3)
    throw InvalidArgument("fit_rate: at least 3 points required");
  double emin = points[0].second, emax = points[0].second;
  for (const auto& [eps, err] : points) {
    if (!(err > 0.0) || !std::isfinite(err))
      throw InvalidArgument("fit_rate: errors must be positive and finite");
    emin = std::min(emin, err);
    emax = std::max(emax, err);
    if (err <= 1e-14) throw DegenerateErrors("fit_rate: error at rounding level");
  }
  if (emax - emin <= 1e-14)
    throw DegenerateErrors("fit_rate: all errors equal within 1e-14");

  const std::size_t m = points.size();
  double xbar = 0.0, ybar = 0.0;
  std::vector<double> x(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    x[i] = std::log(points[i].first);
    y[i] = std::log(points[i].second);
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(m);
  ybar /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  const double slope = sxy / sxx;
  const double intercept = ybar - slope * xbar;
  double ssr = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - (intercept + slope * x[i]);
    ssr += r * r;
  }
  const double sigma2 = ssr / static_cast<double>(m - 2);
  return RateFit{slope, 2.0 * std::sqrt(sigma2 / sxx)};
}

presets::CoefficientSet resolve_coefficients(const SweepConfig& cfg) {
  if (!cfg.import.active()) return presets::by_name(cfg.preset, cfg.grid.n_cell, cfg.seed);

  presets::CoefficientSet cs;
  cs.dim = cfg.import.dim;
  if (cfg.pipeline == "section-2") {
    cs.pipeline = presets::PipelineKind::SectionTwo;
    auto zeta = import_csv_field(cfg.import.zeta_csv, cs.dim, FieldRank::Scalar);
    auto theta = import_csv_field(cfg.import.theta_csv, cs.dim, FieldRank::Matrix);
    if (zeta.aliasing_risk || theta.aliasing_risk)
      std::fprintf(stderr,
                   "warning: imported samples carry >1%% spectral energy in the top "
                   "third of the spectrum (aliasing risk)\n");
    cs.gc = GeneralCoefficients::make(std::move(zeta.field), std::move(theta.field),
                                      cfg.import.ellipticity);
  } else if (cfg.pipeline == "section-1") {
    cs.pipeline = presets::PipelineKind::SectionOne;
    auto A = import_csv_field(cfg.import.a_csv, cs.dim, FieldRank::Matrix);
    auto b = import_csv_field(cfg.import.b_csv, cs.dim, FieldRank::Vector);
    auto c = import_csv_field(cfg.import.c_csv, cs.dim, FieldRank::Scalar);
    if (A.aliasing_risk || b.aliasing_risk || c.aliasing_risk)
      std::fprintf(stderr, "warning: imported samples show aliasing risk\n");
    cs.abc = ProblemCoefficients::make(std::move(A.field), std::move(b.field),
                                       std::move(c.field), cfg.import.ellipticity);
  } else {
    cs.pipeline = presets::PipelineKind::Nondivergence;
    auto K = import_csv_field(cfg.import.k_csv, cs.dim, FieldRank::Matrix);
    auto q = import_csv_field(cfg.import.q_csv, cs.dim, FieldRank::Vector);
    auto r = import_csv_field(cfg.import.r_csv, cs.dim, FieldRank::Scalar);
    cs.ndc = NondivergenceCoefficients::make(std::move(K.field), std::move(q.field),
                                             std::move(r.field), cfg.import.ellipticity);
  }
  return cs;
}

// ---------------------------------------------------------------------------
// effective-model cache (bitwise binary round-trip)

namespace {

constexpr char kCacheMagic[8] = {'P', 'H', 'E', 'M', 'C', '0', '1', '\n'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_doubles(std::ofstream& out, const double* p, std::size_t count) {
  out.write(reinterpret_cast<const char*>(p),
            static_cast<std::streamsize>(count * sizeof(double)));
}
bool read_u64(std::ifstream& in, std::uint64_t& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(v)));
}
bool read_doubles(std::ifstream& in, double* p, std::size_t count) {
  return static_cast<bool>(
      in.read(reinterpret_cast<char*>(p),
              static_cast<std::streamsize>(count * sizeof(double))));
}

} // namespace

void save_effective_model(const std::filesystem::path& path, const EffectiveModel& em) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_effective_model: cannot open " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  const TorusGrid& g = em.correctors.at(0).grid();
  write_u64(out, static_cast<std::uint64_t>(g.dim));
  write_u64(out, static_cast<std::uint64_t>(g.n));
  write_u64(out, em.weight == CorrectorWeight::Zeta ? 1 : 0);
  write_doubles(out, em.tensor_h.v.data(), em.tensor_h.v.size());
  write_u64(out, em.correctors.size());
  for (const auto& c : em.correctors)
    write_doubles(out, c.data().data(), c.data().size());
  write_u64(out, static_cast<std::uint64_t>(em.flux.components()));
  write_doubles(out, em.flux.data().data(), em.flux.data().size());
  write_u64(out, em.diagnostics.corrector_residuals.size());
  write_doubles(out, em.diagnostics.corrector_residuals.data(),
                em.diagnostics.corrector_residuals.size());
  for (long it : em.diagnostics.corrector_iterations)
    write_u64(out, static_cast<std::uint64_t>(it));
  write_doubles(out, &em.diagnostics.flux_identity_residual, 1);
  write_doubles(out, &em.diagnostics.max_weighted_mean, 1);
  if (!out) throw IoError("save_effective_model: write failed " + path.string());
}

std::optional<EffectiveModel> load_effective_model(const std::filesystem::path& path,
                                                   const TorusGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCacheMagic, 8) != 0)
    return std::nullopt;
  std::uint64_t dim = 0, n = 0, weight = 0;
  if (!read_u64(in, dim) || !read_u64(in, n) || !read_u64(in, weight)) return std::nullopt;
  if (static_cast<int>(dim) != grid.dim || static_cast<int>(n) != grid.n)
    return std::nullopt;

  EffectiveModel em;
  em.weight = weight ? CorrectorWeight::Zeta : CorrectorWeight::Plain;
  em.tensor_h = ConstTensor(grid.dim);
  if (!read_doubles(in, em.tensor_h.v.data(), em.tensor_h.v.size())) return std::nullopt;
  std::uint64_t count = 0;
  if (!read_u64(in, count)) return std::nullopt;
  for (std::uint64_t i = 0; i < count; ++i) {
    PeriodicField c(grid, FieldRank::Scalar);
    if (!read_doubles(in, c.data().data(), c.data().size())) return std::nullopt;
    em.correctors.push_back(std::move(c));
  }
  std::uint64_t flux_comps = 0;
  if (!read_u64(in, flux_comps)) return std::nullopt;
  em.flux = PeriodicField(grid, FieldRank::Rank3);
  if (static_cast<int>(flux_comps) != em.flux.components()) return std::nullopt;
  if (!read_doubles(in, em.flux.data().data(), em.flux.data().size())) return std::nullopt;
  std::uint64_t res_count = 0;
  if (!read_u64(in, res_count)) return std::nullopt;
  em.diagnostics.corrector_residuals.resize(res_count);
  if (!read_doubles(in, em.diagnostics.corrector_residuals.data(), res_count))
    return std::nullopt;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t it = 0;
    if (!read_u64(in, it)) return std::nullopt;
    em.diagnostics.corrector_iterations.push_back(static_cast<long>(it));
  }
  if (!read_doubles(in, &em.diagnostics.flux_identity_residual, 1)) return std::nullopt;
  if (!read_doubles(in, &em.diagnostics.max_weighted_mean, 1)) return std::nullopt;
  return em;
}

// ---------------------------------------------------------------------------
// per-epsilon streaming runner

namespace {

struct SweepContext {
  int dim = 1;
  const GeneralCoefficients* gc = nullptr;
  const EffectiveModel* em = nullptr;
  const CellEigenSolution* eig = nullptr;  // section-1 only
  DatumSpec datum;
  double T = 0.5;
  GridPolicy grid;
  SmoothingKernel kernel;
  double rescale = 1.0;
  bool emit_timings = false;
};

void space_convolve(const DomainSpec& dom, const DiscreteKernel& dk,
                    const std::vector<double>& in, std::vector<double>& out) {
  const int N = dom.cells_per_axis();
  out.assign(dom.num_nodes(), 0.0);
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    const auto idx = dom.unpack(node);
    double acc = 0.0;
    for (std::size_t q = 0; q < dk.space_offsets.size(); ++q) {
      std::array<int, 3> s = idx;
      bool inside = true;
      for (int a = 0; a < dom.dim; ++a) {
        s[static_cast<std::size_t>(a)] -= dk.space_offsets[q][static_cast<std::size_t>(a)];
        if (s[static_cast<std::size_t>(a)] < 0 || s[static_cast<std::size_t>(a)] > N)
          inside = false;
      }
      if (inside) acc += dk.space_weights[q] * in[dom.pack(s)];
    }
    out[node] = acc;
  }
}

SweepRow run_epsilon(const SweepContext& cx, double eps) {
  const auto t0 = std::chrono::steady_clock::now();

  const double h = cx.grid.h_of(eps);
  const DomainSpec dom = DomainSpec::make(cx.dim, cx.T, h, cx.grid.tau_of(h), eps);
  const int d = dom.dim;
  const std::size_t M = static_cast<std::size_t>(dom.time_steps());

  const std::vector<double> u0 = presets::datum(cx.datum.expr, dom);
  std::vector<double> v_datum = u0;
  std::vector<double> h_datum = u0;
  if (cx.datum.mode == DatumMode::IllPrepared) {
    const std::vector<double> psi = eigenfunction_on_grid(*cx.eig, dom);
    for (std::size_t k = 0; k < v_datum.size(); ++k)
      if (!dom.on_boundary(k)) v_datum[k] = u0[k] / psi[k];
    for (double& v : h_datum) v *= cx.rescale;
  }

  ParabolicStepper osc(ParabolicProblem::oscillatory(
      dom, cx.gc->zeta, cx.gc->Theta, InitialDatum{cx.datum.mode, v_datum}));
  ParabolicStepper hom(ParabolicProblem::homogenized(
      dom, cx.em->tensor_h, InitialDatum{DatumMode::Plain, h_datum}));

  const DiscreteKernel dk = discretize_kernel(cx.kernel, dom);
  const int Kt = dk.time_taps;
  const CutoffPair cp = clamped_cutoffs(dom);

  std::vector<std::vector<double>> omega_nodes;
  for (int a = 0; a < d; ++a)
    omega_nodes.push_back(
        periodic_on_domain_nodes(cx.em->correctors[static_cast<std::size_t>(a)], 0, dom));

  // ring buffers over f0 levels [base, stored), plus the space-convolved
  // cut-off gradient per direction
  std::deque<std::vector<double>> f0_hist;
  std::vector<std::deque<std::vector<double>>> sc(static_cast<std::size_t>(d));
  std::size_t base = 0, stored = 0;

  std::vector<double> f0_buf, fe_buf, grad_buf(dom.num_nodes()), conv_buf;
  auto store_level = [&](std::size_t l) {
    while (static_cast<std::size_t>(hom.level()) < l) hom.step();
    hom.copy_state(f0_buf);
    f0_hist.push_back(f0_buf);
    const double e2 = cp.eta2[l];
    for (int a = 0; a < d; ++a) {
      if (e2 == 0.0) {
        std::fill(grad_buf.begin(), grad_buf.end(), 0.0);
      } else {
        for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
          const double e1 = cp.eta1[node];
          grad_buf[node] =
              (e1 == 0.0)
                  ? 0.0
                  : e1 * e2 *
                        [&] {
                          const auto idx = dom.unpack(node);
                          const int N = dom.cells_per_axis();
                          const int i = idx[static_cast<std::size_t>(a)];
                          std::array<int, 3> up = idx, dn = idx;
                          if (i == 0) {
                            up[static_cast<std::size_t>(a)] = 1;
                            return (f0_buf[dom.pack(up)] - f0_buf[node]) / dom.h;
                          }
                          if (i == N) {
                            dn[static_cast<std::size_t>(a)] = N - 1;
                            return (f0_buf[node] - f0_buf[dom.pack(dn)]) / dom.h;
                          }
                          up[static_cast<std::size_t>(a)] += 1;
                          dn[static_cast<std::size_t>(a)] -= 1;
                          return (f0_buf[dom.pack(up)] - f0_buf[dom.pack(dn)]) /
                                 (2.0 * dom.h);
                        }();
        }
      }
      space_convolve(dom, dk, grad_buf, conv_buf);
      sc[static_cast<std::size_t>(a)].push_back(conv_buf);
    }
    ++stored;
  };

  double err2 = 0.0, wh1 = 0.0, w0max = 0.0;
  std::vector<double> w_level(dom.num_nodes());

  for (std::size_t m = 0; m <= M; ++m) {
    while (stored <= std::min(m + static_cast<std::size_t>(Kt), M)) store_level(stored);
    while (static_cast<std::size_t>(osc.level()) < m) osc.step();
    osc.copy_state(fe_buf);
    const std::vector<double>& f0m = f0_hist[m - base];

    for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
      double corr = 0.0;
      for (int a = 0; a < d; ++a) {
        double s = 0.0;
        for (int jj = -Kt; jj <= Kt; ++jj) {
          const long src = static_cast<long>(m) - jj;
          if (src < static_cast<long>(base) || src >= static_cast<long>(stored)) continue;
          s += dk.time_weights[static_cast<std::size_t>(jj + Kt)] *
               sc[static_cast<std::size_t>(a)][static_cast<std::size_t>(src) - base][node];
        }
        corr += omega_nodes[static_cast<std::size_t>(a)][node] * s;
      }
      w_level[node] = fe_buf[node] - f0m[node] - eps * corr;
      fe_buf[node] -= f0m[node];  // reuse as the difference for the L2 error
    }

    const double wt = (m == 0 || m == M) ? 0.5 : 1.0;
    err2 += wt * dom.tau * level_l2_sq(dom, fe_buf);
    wh1 += wt * dom.tau * level_h1_sq(dom, w_level);
    if (m == 0)
      for (double v : w_level) w0max = std::max(w0max, std::abs(v));

    // drop history that can no longer be referenced (m+1 - Kt)
    while (base + static_cast<std::size_t>(Kt) < m + 1 && base < stored) {
      f0_hist.pop_front();
      for (int a = 0; a < d; ++a) sc[static_cast<std::size_t>(a)].pop_front();
      ++base;
    }
  }

  SweepRow row;
  row.epsilon = eps;
  row.l2_error = std::sqrt(err2);
  row.w_eps_h1 = std::sqrt(wh1);
  row.w0_max = w0max;
  row.energy_monotone = osc.info().energy_monotone && hom.info().energy_monotone;
  row.solver_iterations =
      std::max(osc.info().max_linear_iterations, hom.info().max_linear_iterations);
  if (cx.emit_timings)
    row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
  return row;
}

double mean_inverse_psi(const CellEigenSolution& eig) {
  const TorusGrid& g = eig.psi.grid();
  const int d = g.dim;
  const int n = g.n;
  constexpr double kTwoPi = 6.283185307179586476925286766559;

  double acc = 0.0;
  std::array<int, 3> idx{0, 0, 0};
  std::function<double(int)> rec = [&](int axis) -> double {
    if (axis == d) {
      std::array<int, 3> wrapped = idx;
      double phase = 0.0, w = 1.0;
      for (int a = 0; a < d; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        wrapped[static_cast<std::size_t>(a)] = i % n;
        phase += eig.theta[static_cast<std::size_t>(a)] * static_cast<double>(i) / n;
        if (i == 0 || i == n) w *= 0.5;
      }
      const double psi = eig.psi.value(0, g.pack(wrapped)) * std::exp(kTwoPi * phase);
      return w / psi;
    }
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
      idx[static_cast<std::size_t>(axis)] = i;
      s += rec(axis + 1);
    }
    return s;
  };
  acc = rec(0);
  for (int a = 0; a < d; ++a) acc /= static_cast<double>(n);
  return acc;
}

} // namespace

SweepReport run_sweep(const SweepConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const presets::CoefficientSet cs = resolve_coefficients(cfg);

  SweepReport report;
  report.config = cfg;
  report.config_hash = cfg.hash();

  SweepContext cx;
  cx.dim = cs.dim;
  cx.datum = cfg.datum;
  cx.T = cfg.T;
  cx.grid = cfg.grid;
  cx.kernel = SmoothingKernel::parabolic_default();
  cx.emit_timings = cfg.emit_timings;

  // resolve the general coefficients (zeta, Theta)
  GeneralCoefficients gc = [&] {
    if (cs.pipeline == presets::PipelineKind::SectionTwo) return *cs.gc;
    const ProblemCoefficients& abc =
        (cs.pipeline == presets::PipelineKind::SectionOne)
            ? *cs.abc
            : nondivergence_frontend(*cs.ndc);
    CellEigenSolution eig = find_bloch_parameter(abc);
    FactorizedModel fm = build_factorized_model(abc, eig);
    report.lambda = eig.lambda;
    report.theta = eig.theta;
    report.eig = std::move(eig);
    return GeneralCoefficients::from_factorized(fm);
  }();
  cx.gc = &gc;
  if (report.eig) cx.eig = &*report.eig;

  if (cfg.datum.mode == DatumMode::IllPrepared) {
    if (!report.eig)
      throw InvalidArgument("run_sweep: ill-prepared mode needs a section-1 pipeline");
    report.rescale_factor = mean_inverse_psi(*report.eig);
    cx.rescale = report.rescale_factor;
  }

  // effective model, cached by coefficient content hash
  std::uint64_t key = fnv1a("effective-model", 15);
  key = hash_field(gc.zeta, key);
  key = hash_field(gc.Theta, key);
  const auto cache_path = out_dir / "cache" / ("effective_" + hex64(key) + ".bin");
  EffectiveModel em;
  if (auto cached = load_effective_model(cache_path, gc.grid())) {
    em = std::move(*cached);
  } else {
    em = build_effective_model(gc);
    save_effective_model(cache_path, em);
  }
  report.tensor = em.tensor_h;
  cx.em = &em;

  // the epsilon rungs are independent; run them on a bounded worker pool
  const std::size_t count = cfg.epsilons.size();
  report.rows.resize(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nworkers =
      std::min<std::size_t>(count, cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers)
                                                   : static_cast<std::size_t>(hw));
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        report.rows[i] = run_epsilon(cx, cfg.epsilons[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (nworkers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < count; ++i)
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const Error& e) {
        throw SolverFailure("sweep rung eps=" + fmt(cfg.epsilons[i]) +
                            " failed: " + e.what());
      }
    }

  for (std::size_t i = 1; i < count; ++i)
    if (!(report.rows[i].l2_error < report.rows[i - 1].l2_error))
      report.errors_monotone = false;

  if (cfg.datum.mode == DatumMode::IllPrepared) {
    report.slope_skip_reason = "ill-prepared datum: weak convergence only, no rate fit";
  } else {
    std::vector<std::pair<double, double>> pts;
    for (const SweepRow& r : report.rows) pts.emplace_back(r.epsilon, r.l2_error);
    try {
      report.fit = fit_rate(pts);
      report.slope_fitted = true;
    } catch (const DegenerateErrors&) {
      report.slope_skip_reason = "degenerate errors";
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// report emission

namespace {

void write_svg(const std::filesystem::path& path, const SweepReport& r) {
  const int W = 640, H = 420, ml = 70, mr = 20, mt = 20, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& row : r.rows) {
    const double x = std::log10(row.epsilon), y = std::log10(std::max(row.l2_error, 1e-300));
    xmin = std::min(xmin, x); xmax = std::max(xmax, x);
    ymin = std::min(ymin, y); ymax = std::max(ymax, y);
  }
  if (ymax - ymin < 0.5) { ymin -= 0.25; ymax += 0.25; }
  if (xmax - xmin < 0.5) { xmin -= 0.25; xmax += 0.25; }
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto Y = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
  char buf[256];

  std::ofstream out(path);
  if (!out) throw IoError("write_svg: cannot open " + path.string());
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n",
                W, H);
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                ml, H - mb, W - mr, H - mb);
  out << buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
                ml, mt, ml, H - mb);
  out << buf;
  out << "<text x=\"" << (W / 2) << "\" y=\"" << (H - 12)
      << "\" font-size=\"13\">log10(epsilon)</text>\n";
  out << "<text x=\"14\" y=\"" << (H / 2)
      << "\" font-size=\"13\" transform=\"rotate(-90 14 " << (H / 2)
      << ")\">log10(L2 error)</text>\n";

  // data points and connecting line
  for (std::size_t i = 0; i + 1 < r.rows.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.6f\" y1=\"%.6f\" x2=\"%.6f\" y2=\"%.6f\" "
                  "stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
                  X(std::log10(r.rows[i].epsilon)), Y(std::log10(r.rows[i].l2_error)),
                  X(std::log10(r.rows[i + 1].epsilon)),
                  Y(std::log10(r.rows[i + 1].l2_error)));
    out << buf;
  }
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.6f\" cy=\"%.6f\" r=\"3.5\" fill=\"steelblue\"/>\n",
                  X(std::log10(row.epsilon)), Y(std::log10(row.l2_error)));
    out << buf;
  }

  const double x0 = std::log10(r.rows.front().epsilon);
  const double y0 = std::log10(r.rows.front().l2_error);
  const double x1 = std::log10(r.rows.back().epsilon);
  if (r.slope_fitted) {
    const double yf = y0 + r.fit.slope * (x1 - x0);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.6f\" y1=\"%.6f\" x2=\"%.6f\" y2=\"%.6f\" "
                  "stroke=\"crimson\" stroke-dasharray=\"6 3\"/>\n",
                  X(x0), Y(y0), X(x1), Y(yf));
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-size=\"12\" fill=\"crimson\">fit slope "
                  "%.4f</text>\n",
                  ml + 10, mt + 16, r.fit.slope);
    out << buf;
  }
  // reference eps^{1/4} line through the first point
  const double yr = y0 + 0.25 * (x1 - x0);
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.6f\" y1=\"%.6f\" x2=\"%.6f\" y2=\"%.6f\" stroke=\"gray\" "
                "stroke-dasharray=\"2 3\"/>\n",
                X(x0), Y(y0), X(x1), Y(yr));
  out << buf;
  out << "<text x=\"" << (ml + 10) << "\" y=\"" << (mt + 32)
      << "\" font-size=\"12\" fill=\"gray\">reference slope 0.25</text>\n";
  out << "</svg>\n";
}

} // namespace

EmitPaths emit_report(const SweepReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  EmitPaths paths;
  paths.csv = out_dir / "sweep.csv";
  paths.json = out_dir / "sweep.json";

  {
    std::ofstream out(paths.csv);
    if (!out) throw IoError("emit_report: cannot open " + paths.csv.string());
    out << "epsilon,l2_error,w_eps_h1,slope_partial,wall_ms\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const SweepRow& r = report.rows[i];
      out << fmt(r.epsilon) << "," << fmt(r.l2_error) << "," << fmt(r.w_eps_h1) << ",";
      if (i > 0) {
        const SweepRow& p = report.rows[i - 1];
        out << fmt(std::log(p.l2_error / r.l2_error) / std::log(p.epsilon / r.epsilon));
      }
      out << "," << r.wall_ms << "\n";
    }
    if (!out) throw IoError("emit_report: write failed " + paths.csv.string());
  }

  {
    nlohmann::ordered_json j;
    j["config"] = report.config.to_json();
    j["config_hash"] = report.config_hash;
    nlohmann::ordered_json tensor = nlohmann::ordered_json::array();
    for (int r = 0; r < report.tensor.dim; ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int c = 0; c < report.tensor.dim; ++c) row.push_back(report.tensor(r, c));
      tensor.push_back(row);
    }
    j["effective_tensor"] = tensor;
    if (report.eig) {
      j["lambda"] = report.lambda;
      j["theta"] = std::vector<double>(report.theta.begin(),
                                       report.theta.begin() + report.tensor.dim);
    }
    if (report.config.datum.mode == DatumMode::IllPrepared)
      j["rescale_factor"] = report.rescale_factor;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const SweepRow& r : report.rows) {
      rows.push_back({{"epsilon", r.epsilon},
                      {"l2_error", r.l2_error},
                      {"w_eps_h1", r.w_eps_h1},
                      {"w0_max", r.w0_max},
                      {"wall_ms", r.wall_ms},
                      {"energy_monotone", r.energy_monotone},
                      {"solver_iterations", r.solver_iterations}});
    }
    j["rows"] = rows;
    if (report.slope_fitted) {
      j["fit"] = {{"slope", report.fit.slope},
                  {"half_width", report.fit.half_width},
                  {"reference_floor", 0.25},
                  {"anticipated", 0.5}};
    } else {
      j["slope_skipped"] = report.slope_skip_reason;
    }
    j["errors_monotone"] = report.errors_monotone;
    std::ofstream out(paths.json);
    if (!out) throw IoError("emit_report: cannot open " + paths.json.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("emit_report: write failed " + paths.json.string());
  }

  if (report.config.plot) {
    paths.svg = out_dir / "sweep.svg";
    write_svg(paths.svg, report);
  }
  return paths;
}

} // namespace parahom
