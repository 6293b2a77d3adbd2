// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: cell eigenvalue solves, factorization and
// effective-model exports, single parabolic solves with snapshot dumps,
// epsilon sweeps and the appendix constant suites.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "parahom/harness.hpp"

namespace {

using namespace parahom;

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "out";
  int workers = 0;
  std::uint64_t seed = 0;
  std::string preset;
  bool seed_set = false, workers_set = false;
};

SweepConfig make_config(const GlobalArgs& g) {
  SweepConfig cfg;
  if (!g.config_path.empty()) cfg = SweepConfig::from_json_file(g.config_path);
  if (!g.preset.empty()) {
    cfg.preset = g.preset;
    cfg.import = ImportSpec{};
  }
  if (g.seed_set) cfg.seed = g.seed;
  if (g.workers_set) cfg.workers = g.workers;
  if (!cfg.import.active()) {
    // keep the pipeline consistent with the named preset
    const auto cs = presets::by_name(cfg.preset, cfg.grid.n_cell, cfg.seed);
    switch (cs.pipeline) {
      case presets::PipelineKind::SectionOne: cfg.pipeline = "section-1"; break;
      case presets::PipelineKind::SectionTwo: cfg.pipeline = "section-2"; break;
      case presets::PipelineKind::Nondivergence: cfg.pipeline = "nondivergence"; break;
    }
  }
  return cfg;
}

ProblemCoefficients section_one_coefficients(const presets::CoefficientSet& cs) {
  if (cs.pipeline == presets::PipelineKind::SectionOne) return *cs.abc;
  if (cs.pipeline == presets::PipelineKind::Nondivergence)
    return nondivergence_frontend(*cs.ndc);
  throw InvalidArgument("this subcommand needs a section-1 or nondivergence pipeline");
}

int cmd_cell_eig(const GlobalArgs& g) {
  const SweepConfig cfg = make_config(g);
  const auto cs = resolve_coefficients(cfg);
  const ProblemCoefficients abc = section_one_coefficients(cs);
  const CellEigenSolution eig = find_bloch_parameter(abc);

  std::printf("theta  =");
  for (int a = 0; a < cs.dim; ++a) std::printf(" %.12g", eig.theta[static_cast<std::size_t>(a)]);
  std::printf("\nlambda = %.12g\n", eig.lambda);
  std::printf("residuals: direct %.3e  adjoint %.3e  |lambda gap| %.3e  |mean beta| %.3e\n",
              eig.residuals.direct, eig.residuals.adjoint, eig.residuals.lambda_gap,
              eig.residuals.drift_mean);
  std::printf("lower bound a = %.12g\n", eig.lower_bound_a);

  if (!g.out_dir.empty()) {
    std::filesystem::create_directories(g.out_dir);
    nlohmann::ordered_json j;
    j["theta"] = std::vector<double>(eig.theta.begin(), eig.theta.begin() + cs.dim);
    j["lambda"] = eig.lambda;
    j["lower_bound_a"] = eig.lower_bound_a;
    j["residuals"] = {{"direct", eig.residuals.direct},
                      {"adjoint", eig.residuals.adjoint},
                      {"lambda_gap", eig.residuals.lambda_gap},
                      {"drift_mean", eig.residuals.drift_mean}};
    std::ofstream out(std::filesystem::path(g.out_dir) / "cell_eig.json");
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_factorize(const GlobalArgs& g) {
  const SweepConfig cfg = make_config(g);
  const auto cs = resolve_coefficients(cfg);
  const ProblemCoefficients abc = section_one_coefficients(cs);
  const CellEigenSolution eig = find_bloch_parameter(abc);
  const FactorizedModel fm = build_factorized_model(abc, eig);

  const std::filesystem::path dir(g.out_dir);
  std::filesystem::create_directories(dir);
  const int d = cs.dim;

  auto names = [&](const std::string& stem, FieldRank rank) {
    std::vector<std::string> n;
    if (rank == FieldRank::Scalar) n.push_back(stem);
    if (rank == FieldRank::Vector)
      for (int i = 0; i < d; ++i) n.push_back(stem + std::to_string(i + 1));
    if (rank == FieldRank::Matrix)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          n.push_back(stem + std::to_string(i + 1) + std::to_string(j + 1));
    return n;
  };
  export_csv_field(dir / "sigma.csv", fm.sigma, names("sigma", FieldRank::Scalar));
  export_csv_field(dir / "alpha.csv", fm.alpha, names("alpha", FieldRank::Matrix));
  export_csv_field(dir / "beta.csv", fm.beta, names("beta", FieldRank::Vector));
  export_csv_field(dir / "B.csv", fm.B, names("B", FieldRank::Matrix));
  export_csv_field(dir / "M.csv", fm.M, names("M", FieldRank::Matrix));
  export_csv_field(dir / "psi.csv", eig.psi, names("psi", FieldRank::Scalar));
  export_csv_field(dir / "psi_star.csv", eig.psi_star, names("psi_star", FieldRank::Scalar));

  nlohmann::ordered_json j;
  j["grid"] = {{"dim", d}, {"n", abc.grid().n}};
  j["theta"] = std::vector<double>(eig.theta.begin(), eig.theta.begin() + d);
  j["lambda"] = eig.lambda;
  j["ellipticity_b"] = fm.ellipticity_b;
  j["sigma_mean"] = cell_average(fm.sigma);
  std::ofstream out(dir / "factorized.json");
  out << j.dump(2) << "\n";
  std::printf("factorized model written to %s\n", dir.string().c_str());
  return 0;
}

int cmd_homogenize(const GlobalArgs& g, bool fields) {
  const SweepConfig cfg = make_config(g);
  const auto cs = resolve_coefficients(cfg);
  GeneralCoefficients gc = [&] {
    if (cs.pipeline == presets::PipelineKind::SectionTwo) return *cs.gc;
    const ProblemCoefficients abc = section_one_coefficients(cs);
    const CellEigenSolution eig = find_bloch_parameter(abc);
    return GeneralCoefficients::from_factorized(build_factorized_model(abc, eig));
  }();
  const EffectiveModel em = build_effective_model(gc);

  const std::filesystem::path dir(g.out_dir);
  std::filesystem::create_directories(dir);
  export_effective_model_json(dir / "effective.json", em, gc.grid());
  if (fields) export_correctors_csv(dir, em);

  std::printf("tensor_h =\n");
  for (int i = 0; i < em.tensor_h.dim; ++i) {
    for (int j = 0; j < em.tensor_h.dim; ++j) std::printf(" %.12g", em.tensor_h(i, j));
    std::printf("\n");
  }
  return 0;
}

int cmd_solve(const GlobalArgs& g, const std::string& kind, bool csv) {
  const SweepConfig cfg = make_config(g);
  cfg.validate();
  const auto cs = resolve_coefficients(cfg);
  const double eps = cfg.epsilons.front();
  const double h = cfg.grid.h_of(eps);
  const DomainSpec dom = DomainSpec::make(cs.dim, cfg.T, h, cfg.grid.tau_of(h), eps);
  const std::vector<double> u0 = presets::datum(cfg.datum.expr, dom);

  SpaceTimeField f;
  if (kind == "homogenized" || kind == "oscillatory") {
    GeneralCoefficients gc = [&] {
      if (cs.pipeline == presets::PipelineKind::SectionTwo) return *cs.gc;
      const ProblemCoefficients abc = section_one_coefficients(cs);
      const CellEigenSolution eig = find_bloch_parameter(abc);
      return GeneralCoefficients::from_factorized(build_factorized_model(abc, eig));
    }();
    if (kind == "oscillatory") {
      f = solve_divform(ParabolicProblem::oscillatory(dom, gc.zeta, gc.Theta,
                                                      {cfg.datum.mode, u0}));
    } else {
      const EffectiveModel em = build_effective_model(gc);
      f = solve_divform(ParabolicProblem::homogenized(dom, em.tensor_h,
                                                      {DatumMode::Plain, u0}));
    }
  } else if (kind == "full") {
    const ProblemCoefficients abc = section_one_coefficients(cs);
    std::vector<double> datum = u0;
    if (cfg.datum.mode == DatumMode::WellPrepared) {
      const CellEigenSolution eig = find_bloch_parameter(abc);
      const std::vector<double> psi = eigenfunction_on_grid(eig, dom);
      for (std::size_t k = 0; k < datum.size(); ++k) datum[k] *= psi[k];
    }
    f = solve_full_oscillatory(
        ParabolicProblem::full_oscillatory(dom, abc, {cfg.datum.mode, datum}));
  } else {
    throw InvalidArgument("solve: kind must be oscillatory, homogenized or full");
  }

  export_snapshots(g.out_dir, "solution", f, cfg.hash(), csv);
  std::printf("solved %s: %d levels, %zu nodes, energy monotone: %s\n", kind.c_str(),
              dom.time_steps() + 1, dom.num_nodes(),
              f.info.energy_monotone ? "yes" : "no");
  return 0;
}

int cmd_sweep(const GlobalArgs& g) {
  const SweepConfig cfg = make_config(g);
  const SweepReport report = run_sweep(cfg, g.out_dir);
  const EmitPaths paths = emit_report(report, g.out_dir);

  for (const SweepRow& r : report.rows)
    std::printf("eps %-10.6g  L2 error %-14.8g  |w_eps|_{L2H1} %-14.8g\n", r.epsilon,
                r.l2_error, r.w_eps_h1);
  if (report.slope_fitted) {
    std::printf("fitted slope %.4f +/- %.4f  (proved floor 0.25, anticipated 0.5)\n",
                report.fit.slope, report.fit.half_width);
  } else {
    std::printf("slope fit skipped: %s\n", report.slope_skip_reason.c_str());
  }
  std::printf("report: %s\n", paths.csv.string().c_str());
  return 0;
}

int cmd_verify_appendix(const GlobalArgs& g, int samples, int dim, double T) {
  const SweepConfig cfg = make_config(g);
  std::vector<double> eps = cfg.epsilons;
  const auto rows = appendix_constants(samples, eps, dim, T,
                                       SmoothingKernel::parabolic_default(), cfg.seed);
  std::filesystem::create_directories(g.out_dir);
  const auto path = std::filesystem::path(g.out_dir) / "appendix.csv";
  write_appendix_csv(path, rows);
  for (const AppendixRow& r : rows)
    std::printf("eps %-10.6g  %-12s  max %-12.6g  median %-12.6g  (%d samples)\n",
                r.epsilon, r.lemma.c_str(), r.ratio_max, r.ratio_median, r.samples);
  std::printf("appendix constants: %s\n", path.string().c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"parahom: periodic homogenization laboratory for parabolic problems "
               "with large drift and potential"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "sweep/solve config JSON");
  app.add_option("--out", g.out_dir, "output directory");
  auto* wopt = app.add_option("--workers", g.workers, "worker cap for epsilon rungs");
  auto* sopt = app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--preset", g.preset, "named coefficient preset override");

  app.add_subcommand("cell-eig", "solve the Bloch cell eigenproblem, print theta/lambda");
  app.add_subcommand("factorize", "export the factorized model (sigma, beta, B, M)");
  bool hom_fields = false;
  auto* hom = app.add_subcommand("homogenize", "export the effective model");
  hom->add_flag("--fields", hom_fields, "also export corrector fields as CSV");
  std::string solve_kind = "oscillatory";
  bool solve_csv = false;
  auto* solve = app.add_subcommand("solve", "single solve with snapshot export");
  solve->add_option("--kind", solve_kind, "oscillatory | homogenized | full");
  solve->add_flag("--csv", solve_csv, "also export a CSV slice (1D only)");
  app.add_subcommand("sweep", "run the configured epsilon sweep and emit reports");
  int ap_samples = 30, ap_dim = 1;
  double ap_T = 0.25;
  auto* appx = app.add_subcommand("verify-appendix", "measure appendix lemma constants");
  appx->add_option("--samples", ap_samples, "random samples per epsilon (>= 30)");
  appx->add_option("--dim", ap_dim, "spatial dimension");
  appx->add_option("--T", ap_T, "time horizon");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = sopt->count() > 0;
  g.workers_set = wopt->count() > 0;

  try {
    if (app.got_subcommand("cell-eig")) return cmd_cell_eig(g);
    if (app.got_subcommand("factorize")) return cmd_factorize(g);
    if (app.got_subcommand("homogenize")) return cmd_homogenize(g, hom_fields);
    if (app.got_subcommand("solve")) return cmd_solve(g, solve_kind, solve_csv);
    if (app.got_subcommand("sweep")) return cmd_sweep(g);
    if (app.got_subcommand("verify-appendix"))
      return cmd_verify_appendix(g, ap_samples, ap_dim, ap_T);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
