// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiments: epsilon sweeps of the L2(Omega_T) homogenization
// error, rate fitting, deterministic report emission, effective-model cache.

#ifndef PARAHOM_HARNESS_HPP
#define PARAHOM_HARNESS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "parahom/analysis.hpp"
#include "parahom/presets.hpp"

namespace parahom {

std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_field(const PeriodicField& f, std::uint64_t seed);

struct GridPolicy {
  int n_cell = 64;
  std::string h_policy = "eps/8";   // "eps/8" | "eps/16"
  std::string tau_policy = "h^2";   // "h^2" | "h"

  double h_of(double eps) const;
  double tau_of(double h) const;
};

struct DatumSpec {
  DatumMode mode = DatumMode::Plain;
  std::string expr = "bump";
};

struct ImportSpec {
  int dim = 0;  // 0 = no import, use the preset
  double ellipticity = 0.0;
  std::string zeta_csv, theta_csv;        // section-2
  std::string a_csv, b_csv, c_csv;        // section-1
  std::string k_csv, q_csv, r_csv;        // nondivergence

  bool active() const { return dim > 0; }
};

struct SweepConfig {
  std::string pipeline = "section-2";  // section-1 | section-2 | nondivergence
  std::string preset = "osc-1d";
  ImportSpec import;
  std::vector<double> epsilons{0.125, 0.0625, 0.03125};
  GridPolicy grid;
  DatumSpec datum;
  double T = 0.5;
  std::uint64_t seed = 0;
  int workers = 1;
  bool emit_timings = false;  // keep false for byte-reproducible reports
  bool plot = false;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SweepConfig from_json(const nlohmann::json& j);
  static SweepConfig from_json_file(const std::filesystem::path& path);
  std::uint64_t hash() const;
};

struct SweepRow {
  double epsilon = 0.0;
  double l2_error = 0.0;
  double w_eps_h1 = 0.0;
  double w0_max = 0.0;        // max |w_eps(0,.)|, zero by construction
  long wall_ms = 0;
  bool energy_monotone = true;
  long solver_iterations = 0;
};

struct RateFit {
  double slope = 0.0;
  double half_width = 0.0;
};

/// Log-log least squares of error against epsilon; half-width is twice the
/// standard error of the slope. Throws DegenerateErrors when any error is
/// at rounding level or all errors coincide.
RateFit fit_rate(const std::vector<std::pair<double, double>>& points);

struct SweepReport {
  SweepConfig config;
  std::uint64_t config_hash = 0;
  std::vector<SweepRow> rows;
  bool slope_fitted = false;
  RateFit fit;
  std::string slope_skip_reason;
  ConstTensor tensor{1};
  std::optional<CellEigenSolution> eig;    // section-1 pipelines
  double lambda = 0.0;
  std::array<double, 3> theta{0.0, 0.0, 0.0};
  double rescale_factor = 1.0;             // ill-prepared limit datum factor
  bool errors_monotone = true;             // soft check, logged only
};

/// Runs the configured ladder; caches the effective model under
/// out_dir/cache keyed by a content hash of the coefficients.
SweepReport run_sweep(const SweepConfig& cfg, const std::filesystem::path& out_dir);

struct EmitPaths {
  std::filesystem::path csv, json, svg;
};

/// Byte-deterministic CSV/JSON (and optional SVG log-log plot) emission.
EmitPaths emit_report(const SweepReport& report, const std::filesystem::path& out_dir);

/// Effective-model binary cache (bitwise round-trip).
void save_effective_model(const std::filesystem::path& path, const EffectiveModel& em);
std::optional<EffectiveModel> load_effective_model(const std::filesystem::path& path,
                                                   const TorusGrid& grid);

/// Resolves the configured coefficients (preset or CSV import).
presets::CoefficientSet resolve_coefficients(const SweepConfig& cfg);

} // namespace parahom

#endif
