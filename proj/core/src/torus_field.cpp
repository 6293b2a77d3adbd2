// SPDX-License-Identifier: Apache-2.0

#include "parahom/torus_field.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "parahom/fft.hpp"

namespace parahom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::size_t kMaxNodes = std::size_t{1} << 24;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<std::size_t> line_offsets(const TorusGrid& g, int axis) {
  std::vector<std::size_t> offsets;
  offsets.reserve(g.num_nodes() / static_cast<std::size_t>(g.n));
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    if (g.unpack(node)[static_cast<std::size_t>(axis)] == 0) offsets.push_back(node);
  return offsets;
}

std::vector<std::complex<double>> to_complex(std::span<const double> v) {
  std::vector<std::complex<double>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

} // namespace

TorusGrid::TorusGrid(int dim_, int n_) : dim(dim_), n(n_) {
  if (dim < 1 || dim > 3) throw InvalidArgument("TorusGrid: dim must be 1, 2 or 3");
  if (n < 8 || !is_pow2(n))
    throw InvalidArgument("TorusGrid: n must be a power of two >= 8");
  if (num_nodes() > kMaxNodes) throw InvalidArgument("TorusGrid: n^d exceeds memory budget");
}

std::size_t TorusGrid::num_nodes() const {
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
  return total;
}

std::size_t TorusGrid::stride(int axis) const {
  std::size_t s = 1;
  for (int a = dim - 1; a > axis; --a) s *= static_cast<std::size_t>(n);
  return s;
}

std::array<int, 3> TorusGrid::unpack(std::size_t node) const {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = dim - 1; a >= 0; --a) {
    idx[static_cast<std::size_t>(a)] = static_cast<int>(node % static_cast<std::size_t>(n));
    node /= static_cast<std::size_t>(n);
  }
  return idx;
}

std::size_t TorusGrid::pack(const std::array<int, 3>& idx) const {
  std::size_t node = 0;
  for (int a = 0; a < dim; ++a) {
    int i = idx[static_cast<std::size_t>(a)] % n;
    if (i < 0) i += n;
    node = node * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
  }
  return node;
}

std::array<double, 3> TorusGrid::coords(std::size_t node) const {
  const auto idx = unpack(node);
  std::array<double, 3> y{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a)
    y[static_cast<std::size_t>(a)] = static_cast<double>(idx[static_cast<std::size_t>(a)]) / n;
  return y;
}

int component_count(FieldRank rank, int dim) {
  switch (rank) {
    case FieldRank::Scalar: return 1;
    case FieldRank::Vector: return dim;
    case FieldRank::Matrix: return dim * dim;
    case FieldRank::Rank3: return dim * dim * dim;
  }
  return 1;
}

PeriodicField::PeriodicField(TorusGrid grid, FieldRank rank)
    : grid_(grid), rank_(rank), components_(component_count(rank, grid.dim)),
      values_(static_cast<std::size_t>(components_) * grid.num_nodes(), 0.0) {}

std::span<double> PeriodicField::component(int c) {
  return {values_.data() + idx(c, 0), grid_.num_nodes()};
}

std::span<const double> PeriodicField::component(int c) const {
  return {values_.data() + idx(c, 0), grid_.num_nodes()};
}

bool PeriodicField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

PeriodicField PeriodicField::constant_scalar(const TorusGrid& g, double v) {
  PeriodicField out(g, FieldRank::Scalar);
  std::fill(out.values_.begin(), out.values_.end(), v);
  return out;
}

PeriodicField PeriodicField::zeros(const TorusGrid& g, FieldRank rank) {
  return PeriodicField(g, rank);
}

void require_same_grid(const PeriodicField& a, const PeriodicField& b,
                       const char* where) {
  if (!(a.grid() == b.grid()))
    throw GridMismatch(std::string(where) + ": fields live on different grids");
}

double cell_average(const PeriodicField& f, int comp) {
  const auto v = f.component(comp);
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

PeriodicField spectral_derivative(const PeriodicField& f, int axis, int comp) {
  const TorusGrid& g = f.grid();
  if (axis < 0 || axis >= g.dim)
    throw InvalidArgument("spectral_derivative: axis out of range");
  if (comp < 0 || comp >= f.components())
    throw InvalidArgument("spectral_derivative: component out of range");
  if (!f.all_finite()) throw NonFiniteState("spectral_derivative: non-finite input");

  auto buf = to_complex(f.component(comp));
  const auto offsets = line_offsets(g, axis);
  const std::size_t stride = g.stride(axis);
  detail::fft_lines(buf.data(), static_cast<std::size_t>(g.n), stride, offsets, false);

  const std::size_t n = static_cast<std::size_t>(g.n);
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    const std::size_t k = (node / stride) % n;
    if (k == n / 2) {
      buf[node] = 0.0;  // Nyquist: keep real output real
    } else {
      const double kw = kTwoPi * static_cast<double>(detail::signed_mode(k, n));
      buf[node] *= std::complex<double>(0.0, kw);
    }
  }

  detail::fft_lines(buf.data(), static_cast<std::size_t>(g.n), stride, offsets, true);
  PeriodicField out(g, FieldRank::Scalar);
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    out.value(0, node) = buf[node].real();
  return out;
}

PeriodicField gradient(const PeriodicField& scalar_field) {
  const TorusGrid& g = scalar_field.grid();
  if (scalar_field.rank() != FieldRank::Scalar)
    throw InvalidArgument("gradient: scalar field expected");
  PeriodicField out(g, FieldRank::Vector);
  for (int a = 0; a < g.dim; ++a) {
    const auto da = spectral_derivative(scalar_field, a);
    std::copy(da.component(0).begin(), da.component(0).end(), out.component(a).begin());
  }
  return out;
}

PeriodicField divergence(const PeriodicField& vector_field) {
  const TorusGrid& g = vector_field.grid();
  if (vector_field.rank() != FieldRank::Vector)
    throw InvalidArgument("divergence: vector field expected");
  PeriodicField out(g, FieldRank::Scalar);
  for (int a = 0; a < g.dim; ++a) {
    const auto da = spectral_derivative(vector_field, a, a);
    for (std::size_t node = 0; node < g.num_nodes(); ++node)
      out.value(0, node) += da.value(0, node);
  }
  return out;
}

PeriodicField row_divergence(const PeriodicField& m) {
  const TorusGrid& g = m.grid();
  if (m.rank() != FieldRank::Matrix)
    throw InvalidArgument("row_divergence: matrix field expected");
  PeriodicField out(g, FieldRank::Vector);
  for (int i = 0; i < g.dim; ++i)
    for (int j = 0; j < g.dim; ++j) {
      const auto d = spectral_derivative(m, j, m.mat(i, j));
      for (std::size_t node = 0; node < g.num_nodes(); ++node)
        out.value(i, node) += d.value(0, node);
    }
  return out;
}

PeriodicField column_divergence(const PeriodicField& m) {
  const TorusGrid& g = m.grid();
  if (m.rank() != FieldRank::Matrix)
    throw InvalidArgument("column_divergence: matrix field expected");
  PeriodicField out(g, FieldRank::Vector);
  for (int j = 0; j < g.dim; ++j)
    for (int i = 0; i < g.dim; ++i) {
      const auto d = spectral_derivative(m, i, m.mat(i, j));
      for (std::size_t node = 0; node < g.num_nodes(); ++node)
        out.value(j, node) += d.value(0, node);
    }
  return out;
}

PeriodicField solve_cell_poisson(const PeriodicField& rhs) {
  const TorusGrid& g = rhs.grid();
  if (rhs.rank() != FieldRank::Scalar)
    throw InvalidArgument("solve_cell_poisson: scalar field expected");
  if (!rhs.all_finite()) throw NonFiniteState("solve_cell_poisson: non-finite input");
  const double mean = cell_average(rhs);
  if (std::abs(mean) > 1e-10)
    throw NonZeroMean("solve_cell_poisson: |cell_average(rhs)| = " + std::to_string(mean));

  auto buf = to_complex(rhs.component(0));
  const std::size_t n = static_cast<std::size_t>(g.n);
  for (int a = 0; a < g.dim; ++a)
    detail::fft_lines(buf.data(), n, g.stride(a), line_offsets(g, a), false);

  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    double k2 = 0.0;
    std::size_t rem = node;
    for (int a = g.dim - 1; a >= 0; --a) {
      const std::size_t k = rem % n;
      rem /= n;
      const double kw = kTwoPi * static_cast<double>(detail::signed_mode(k, n));
      k2 += kw * kw;
    }
    buf[node] = (k2 == 0.0) ? 0.0 : buf[node] / (-k2);
  }

  for (int a = 0; a < g.dim; ++a)
    detail::fft_lines(buf.data(), n, g.stride(a), line_offsets(g, a), true);

  PeriodicField out(g, FieldRank::Scalar);
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    out.value(0, node) = buf[node].real();
  return out;
}

PeriodicField component_field(const PeriodicField& f, int comp) {
  PeriodicField out(f.grid(), FieldRank::Scalar);
  const auto src = f.component(comp);
  std::copy(src.begin(), src.end(), out.component(0).begin());
  return out;
}

PeriodicField spectral_multiplier(
    const PeriodicField& f,
    const std::function<double(const std::array<long, 3>&)>& symbol, int comp) {
  const TorusGrid& g = f.grid();
  auto buf = to_complex(f.component(comp));
  const std::size_t n = static_cast<std::size_t>(g.n);
  for (int a = 0; a < g.dim; ++a)
    detail::fft_lines(buf.data(), n, g.stride(a), line_offsets(g, a), false);

  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    std::array<long, 3> k{0, 0, 0};
    std::size_t rem = node;
    for (int a = g.dim - 1; a >= 0; --a) {
      k[static_cast<std::size_t>(a)] = detail::signed_mode(rem % n, n);
      rem /= n;
    }
    buf[node] *= symbol(k);
  }

  for (int a = 0; a < g.dim; ++a)
    detail::fft_lines(buf.data(), n, g.stride(a), line_offsets(g, a), true);
  PeriodicField out(g, FieldRank::Scalar);
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    out.value(0, node) = buf[node].real();
  return out;
}

double min_value(const PeriodicField& f, int comp) {
  const auto v = f.component(comp);
  return *std::min_element(v.begin(), v.end());
}

double max_abs(const PeriodicField& f) {
  double m = 0.0;
  for (double v : f.data()) m = std::max(m, std::abs(v));
  return m;
}

double spectral_tail_fraction(const PeriodicField& f, int comp) {
  const TorusGrid& g = f.grid();
  auto buf = to_complex(f.component(comp));
  const std::size_t n = static_cast<std::size_t>(g.n);
  for (int a = 0; a < g.dim; ++a)
    detail::fft_lines(buf.data(), n, g.stride(a), line_offsets(g, a), false);
  double total = 0.0, tail = 0.0;
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    bool in_tail = false;
    std::size_t rem = node;
    for (int a = g.dim - 1; a >= 0; --a) {
      const std::size_t k = rem % n;
      rem /= n;
      if (std::abs(detail::signed_mode(k, n)) * 3 >= g.n) in_tail = true;
    }
    const double e = std::norm(buf[node]);
    total += e;
    if (in_tail) tail += e;
  }
  return total > 0.0 ? tail / total : 0.0;
}

PeriodicField drop_nyquist(const PeriodicField& f, int comp) {
  const TorusGrid& g = f.grid();
  auto buf = to_complex(f.component(comp));
  const std::size_t n = static_cast<std::size_t>(g.n);
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t stride = g.stride(a);
    detail::fft_lines(buf.data(), n, stride, line_offsets(g, a), false);
    for (std::size_t node = 0; node < g.num_nodes(); ++node)
      if ((node / stride) % n == n / 2) buf[node] = 0.0;
    detail::fft_lines(buf.data(), n, stride, line_offsets(g, a), true);
  }
  PeriodicField out(g, FieldRank::Scalar);
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    out.value(0, node) = buf[node].real();
  return out;
}

TrigInterpolant::TrigInterpolant(const PeriodicField& f, int comp) : grid_(f.grid()) {
  coeff_ = to_complex(f.component(comp));
  const std::size_t n = static_cast<std::size_t>(grid_.n);
  for (int a = 0; a < grid_.dim; ++a)
    detail::fft_lines(coeff_.data(), n, grid_.stride(a), line_offsets(grid_, a), false);
}

std::vector<double> TrigInterpolant::eval_tensor(
    const std::vector<std::vector<double>>& axis_positions) const {
  if (static_cast<int>(axis_positions.size()) != grid_.dim)
    throw InvalidArgument("TrigInterpolant: one position list per axis expected");
  const std::size_t n = static_cast<std::size_t>(grid_.n);

  // Contract one axis at a time; shape starts as (n, n, ..., n) and the
  // contracted axes are replaced by the position counts.
  std::vector<std::complex<double>> cur = coeff_;
  std::vector<std::size_t> shape(static_cast<std::size_t>(grid_.dim), n);

  for (int a = 0; a < grid_.dim; ++a) {
    const auto& pos = axis_positions[static_cast<std::size_t>(a)];
    const std::size_t m = pos.size();

    // basis[p*n + k] = e_k(pos[p]); Nyquist mode evaluates as cos(pi n y).
    std::vector<std::complex<double>> basis(m * n);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t k = 0; k < n; ++k) {
        if (k == n / 2) {
          basis[p * n + k] = std::cos(kTwoPi * 0.5 * static_cast<double>(grid_.n) * pos[p]);
        } else {
          const double ang = kTwoPi * static_cast<double>(detail::signed_mode(k, n)) * pos[p];
          basis[p * n + k] = {std::cos(ang), std::sin(ang)};
        }
      }

    std::size_t outer = 1, inner = 1;
    for (int b = 0; b < a; ++b) outer *= shape[static_cast<std::size_t>(b)];
    for (int b = a + 1; b < grid_.dim; ++b) inner *= shape[static_cast<std::size_t>(b)];

    std::vector<std::complex<double>> next(outer * m * inner);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t p = 0; p < m; ++p)
        for (std::size_t i = 0; i < inner; ++i) {
          std::complex<double> acc = 0.0;
          for (std::size_t k = 0; k < n; ++k)
            acc += basis[p * n + k] * cur[(o * n + k) * inner + i];
          next[(o * m + p) * inner + i] = acc;
        }
    cur = std::move(next);
    shape[static_cast<std::size_t>(a)] = m;
  }

  const double scale = 1.0 / static_cast<double>(grid_.num_nodes());
  std::vector<double> out(cur.size());
  for (std::size_t i = 0; i < cur.size(); ++i) out[i] = cur[i].real() * scale;
  return out;
}

double TrigInterpolant::operator()(std::span<const double> y) const {
  std::vector<std::vector<double>> pos(static_cast<std::size_t>(grid_.dim));
  for (int a = 0; a < grid_.dim; ++a) {
    double v = y[static_cast<std::size_t>(a)];
    v -= std::floor(v);
    pos[static_cast<std::size_t>(a)] = {v};
  }
  return eval_tensor(pos)[0];
}

CsvImportResult import_csv_field(const std::filesystem::path& path, int dim,
                                 FieldRank rank) {
  std::ifstream in(path);
  if (!in) throw IoError("import_csv_field: cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw IoError("import_csv_field: empty file " + path.string());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw IoError("import_csv_field: bad number in " + path.string());
      row.push_back(v);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p < end && *p == ',') ++p;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("import_csv_field: no data rows in " + path.string());

  const std::size_t num_rows = rows.size();
  int n = static_cast<int>(std::lround(std::pow(static_cast<double>(num_rows), 1.0 / dim)));
  TorusGrid grid(dim, n);
  if (grid.num_nodes() != num_rows)
    throw InvalidArgument("import_csv_field: row count is not n^d for a power-of-two n");

  const int comps = component_count(rank, dim);
  PeriodicField field(grid, rank);
  for (std::size_t r = 0; r < num_rows; ++r) {
    if (static_cast<int>(rows[r].size()) != comps)
      throw InvalidArgument("import_csv_field: wrong column count");
    for (int c = 0; c < comps; ++c) field.value(c, r) = rows[r][static_cast<std::size_t>(c)];
  }
  if (!field.all_finite()) throw NonFiniteState("import_csv_field: non-finite entries");

  CsvImportResult res{std::move(field), 0.0, false};
  for (int c = 0; c < comps; ++c)
    res.tail_energy_fraction =
        std::max(res.tail_energy_fraction, spectral_tail_fraction(res.field, c));
  res.aliasing_risk = res.tail_energy_fraction > 0.01;
  return res;
}

void export_csv_field(const std::filesystem::path& path, const PeriodicField& f,
                      const std::vector<std::string>& component_names) {
  if (static_cast<int>(component_names.size()) != f.components())
    throw InvalidArgument("export_csv_field: one name per component expected");
  std::ofstream out(path);
  if (!out) throw IoError("export_csv_field: cannot open " + path.string());
  for (std::size_t c = 0; c < component_names.size(); ++c)
    out << (c ? "," : "") << component_names[c];
  out << "\n";
  char buf[32];
  for (std::size_t node = 0; node < f.num_nodes(); ++node) {
    for (int c = 0; c < f.components(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.value(c, node));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("export_csv_field: write failed for " + path.string());
}

} // namespace parahom
