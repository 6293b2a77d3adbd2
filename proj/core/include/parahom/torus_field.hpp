// SPDX-License-Identifier: Apache-2.0
//
// Periodic unit-cell discretization and calculus on Y = [0,1)^d: sampling,
// Fourier-collocation differentiation, averaging and Poisson solves.

#ifndef PARAHOM_TORUS_FIELD_HPP
#define PARAHOM_TORUS_FIELD_HPP

#include <array>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "parahom/errors.hpp"

namespace parahom {

/// Uniform grid on the unit cell Y = [0,1)^d. n points per axis, n a power
/// of two >= 8 so the radix-2 transforms apply.
struct TorusGrid {
  int dim = 1;
  int n = 64;

  TorusGrid() = default;
  TorusGrid(int dim_, int n_);

  double spacing() const { return 1.0 / static_cast<double>(n); }
  std::size_t num_nodes() const;
  /// Stride of `axis` in the lexicographic (last-axis-fastest) node order.
  std::size_t stride(int axis) const;
  std::array<int, 3> unpack(std::size_t node) const;
  std::size_t pack(const std::array<int, 3>& idx) const;
  /// Coordinates of a node in [0,1)^d (trailing entries zero).
  std::array<double, 3> coords(std::size_t node) const;

  bool operator==(const TorusGrid&) const = default;
};

enum class FieldRank { Scalar, Vector, Matrix, Rank3 };

int component_count(FieldRank rank, int dim);

/// Real samples of a scalar/vector/matrix/rank-3 field at the grid nodes,
/// stored component-major: values[c * num_nodes + node].
class PeriodicField {
public:
  PeriodicField() = default;
  PeriodicField(TorusGrid grid, FieldRank rank);

  const TorusGrid& grid() const { return grid_; }
  FieldRank rank() const { return rank_; }
  int components() const { return components_; }
  std::size_t num_nodes() const { return grid_.num_nodes(); }

  std::span<double> component(int c);
  std::span<const double> component(int c) const;
  double& value(int c, std::size_t node) { return values_[idx(c, node)]; }
  double value(int c, std::size_t node) const { return values_[idx(c, node)]; }

  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  /// Matrix component (i,j) -> linear component index.
  int mat(int i, int j) const { return i * grid_.dim + j; }
  /// Rank-3 component (k,i,j) -> linear component index.
  int r3(int k, int i, int j) const { return (k * grid_.dim + i) * grid_.dim + j; }

  bool all_finite() const;

  template <class F>
  static PeriodicField sample_scalar(const TorusGrid& g, F&& f) {
    PeriodicField out(g, FieldRank::Scalar);
    for (std::size_t node = 0; node < g.num_nodes(); ++node)
      out.value(0, node) = f(g.coords(node));
    return out;
  }
  template <class F>
  static PeriodicField sample_vector(const TorusGrid& g, F&& f) {
    PeriodicField out(g, FieldRank::Vector);
    for (std::size_t node = 0; node < g.num_nodes(); ++node) {
      const auto v = f(g.coords(node));
      for (int c = 0; c < g.dim; ++c) out.value(c, node) = v[c];
    }
    return out;
  }
  /// f returns row-major d*d entries.
  template <class F>
  static PeriodicField sample_matrix(const TorusGrid& g, F&& f) {
    PeriodicField out(g, FieldRank::Matrix);
    for (std::size_t node = 0; node < g.num_nodes(); ++node) {
      const auto m = f(g.coords(node));
      for (int c = 0; c < g.dim * g.dim; ++c) out.value(c, node) = m[c];
    }
    return out;
  }

  static PeriodicField constant_scalar(const TorusGrid& g, double v);
  static PeriodicField zeros(const TorusGrid& g, FieldRank rank);

private:
  std::size_t idx(int c, std::size_t node) const {
    return static_cast<std::size_t>(c) * grid_.num_nodes() + node;
  }
  TorusGrid grid_{};
  FieldRank rank_ = FieldRank::Scalar;
  int components_ = 1;
  std::vector<double> values_;
};

void require_same_grid(const PeriodicField& a, const PeriodicField& b,
                       const char* where);

/// Mean of the node values; exact for band-limited integrands.
double cell_average(const PeriodicField& f, int comp = 0);

/// Fourier-collocation partial derivative of one component along `axis`.
/// Exact for trigonometric polynomials resolved by the grid. The Nyquist
/// mode is zeroed so that real inputs map to real outputs.
PeriodicField spectral_derivative(const PeriodicField& f, int axis, int comp = 0);

/// grad of a scalar field, assembled componentwise from spectral_derivative.
PeriodicField gradient(const PeriodicField& scalar_field);

/// div of a vector field: sum_a d_a v_a.
PeriodicField divergence(const PeriodicField& vector_field);

/// Row-wise divergence of a matrix field: (div M)_i = sum_j d_j M_ij.
PeriodicField row_divergence(const PeriodicField& matrix_field);

/// Column-wise divergence of a matrix field: (div M)_j = sum_i d_i M_ij.
PeriodicField column_divergence(const PeriodicField& matrix_field);

/// Unique zero-mean periodic solution of  Laplace(u) = rhs, obtained by
/// dividing Fourier coefficients by -|2 pi k|^2 and zeroing the k = 0 mode.
/// Requires |cell_average(rhs)| <= 1e-10 (caller de-means).
PeriodicField solve_cell_poisson(const PeriodicField& rhs);

/// Extract one component as a scalar field.
PeriodicField component_field(const PeriodicField& f, int comp);

/// Applies a real Fourier multiplier to one component:
/// out = ifft( symbol(k~) . fft(f) ), with k~ the signed wavenumber tuple.
PeriodicField spectral_multiplier(const PeriodicField& f,
                                  const std::function<double(const std::array<long, 3>&)>& symbol,
                                  int comp = 0);

/// Zeroes every Fourier mode with any axis at the Nyquist frequency. The
/// first-derivative multiplier is ambiguous there, so operators built from
/// first derivatives act on the de-aliased subspace this projection defines.
PeriodicField drop_nyquist(const PeriodicField& f, int comp = 0);

double min_value(const PeriodicField& f, int comp = 0);
double max_abs(const PeriodicField& f);

/// Fraction of spectral energy carried by modes with any |k~| >= n/3.
/// Used as the aliasing-risk gauge for imported sample data.
double spectral_tail_fraction(const PeriodicField& f, int comp = 0);

/// Evaluates the trigonometric interpolant of one field component at
/// arbitrary points of the torus. Reproduces the samples at grid nodes.
class TrigInterpolant {
public:
  TrigInterpolant() = default;
  explicit TrigInterpolant(const PeriodicField& f, int comp = 0);

  double operator()(std::span<const double> y) const;

  /// Evaluate on the tensor grid of the given per-axis positions
  /// (each in [0,1)); result is row-major with the last axis fastest.
  std::vector<double> eval_tensor(
      const std::vector<std::vector<double>>& axis_positions) const;

private:
  TorusGrid grid_{};
  std::vector<std::complex<double>> coeff_;
};

struct CsvImportResult {
  PeriodicField field;
  double tail_energy_fraction = 0.0; // max over components
  bool aliasing_risk = false;        // tail fraction > 1%
};

/// CSV layout: header row naming components, then one row per grid node in
/// lexicographic node order, one column per component.
CsvImportResult import_csv_field(const std::filesystem::path& path, int dim,
                                 FieldRank rank);
void export_csv_field(const std::filesystem::path& path, const PeriodicField& f,
                      const std::vector<std::string>& component_names);

} // namespace parahom

#endif
