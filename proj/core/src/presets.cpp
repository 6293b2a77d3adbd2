// SPDX-License-Identifier: Apache-2.0

#include "parahom/presets.hpp"

#include <cmath>
#include <random>

namespace parahom::presets {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double bump(double u) {
  const double u2 = u * u;
  if (u2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u2));
}

PeriodicField identity_matrix(const TorusGrid& g) {
  PeriodicField A(g, FieldRank::Matrix);
  for (int i = 0; i < g.dim; ++i) {
    auto c = A.component(A.mat(i, i));
    std::fill(c.begin(), c.end(), 1.0);
  }
  return A;
}

} // namespace

ProblemCoefficients classical(const TorusGrid& g) {
  return ProblemCoefficients::make(identity_matrix(g),
                                   PeriodicField(g, FieldRank::Vector),
                                   PeriodicField(g, FieldRank::Scalar), 1.0);
}

ProblemCoefficients constant_drift_1d(const TorusGrid& g) {
  if (g.dim != 1) throw InvalidArgument("constant_drift_1d: dim 1 expected");
  PeriodicField b(g, FieldRank::Vector);
  std::fill(b.component(0).begin(), b.component(0).end(), 1.0);
  return ProblemCoefficients::make(identity_matrix(g), std::move(b),
                                   PeriodicField(g, FieldRank::Scalar), 1.0);
}

ProblemCoefficients drift_var_1d(const TorusGrid& g) {
  if (g.dim != 1) throw InvalidArgument("drift_var_1d: dim 1 expected");
  auto A = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    return std::array<double, 9>{1.0 + 0.3 * std::sin(kTwoPi * y[0])};
  });
  auto b = PeriodicField::sample_vector(g, [](const std::array<double, 3>& y) {
    return std::array<double, 3>{1.0 + 0.5 * std::cos(kTwoPi * y[0])};
  });
  auto c = PeriodicField::sample_scalar(g, [](const std::array<double, 3>& y) {
    return 0.3 + 0.3 * std::sin(kTwoPi * y[0]);
  });
  return ProblemCoefficients::make(std::move(A), std::move(b), std::move(c), 0.7);
}

ProblemCoefficients drift_2d(const TorusGrid& g) {
  if (g.dim != 2) throw InvalidArgument("drift_2d: dim 2 expected");
  auto A = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    const double s = std::sin(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
    const double off = 0.1 * std::sin(kTwoPi * (y[0] + y[1]));
    return std::array<double, 9>{1.0 + 0.25 * s, off, off, 1.0 + 0.25 * std::cos(kTwoPi * y[1])};
  });
  auto b = PeriodicField::sample_vector(g, [](const std::array<double, 3>& y) {
    return std::array<double, 3>{1.0 + 0.5 * std::cos(kTwoPi * y[1]),
                                 0.5 * std::sin(kTwoPi * y[0])};
  });
  auto c = PeriodicField::sample_scalar(g, [](const std::array<double, 3>& y) {
    return 0.5 + 0.4 * std::cos(kTwoPi * (y[0] + y[1]));
  });
  return ProblemCoefficients::make(std::move(A), std::move(b), std::move(c), 0.5);
}

ProblemCoefficients random_smooth(const TorusGrid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int d = g.dim;
  const double amp = 0.25 / d;

  struct Mode {
    std::array<int, 3> k{0, 0, 0};
    double a = 0.0, phase = 0.0;
  };
  auto draw_modes = [&](int count) {
    std::vector<Mode> modes;
    for (int q = 0; q < count; ++q) {
      Mode m;
      bool zero = true;
      for (int a = 0; a < d; ++a) {
        m.k[static_cast<std::size_t>(a)] = static_cast<int>(uniform01(rng) * 5.0) - 2;
        if (m.k[static_cast<std::size_t>(a)] != 0) zero = false;
      }
      if (zero) m.k[0] = 1;
      m.a = 2.0 * uniform01(rng) - 1.0;
      m.phase = kTwoPi * uniform01(rng);
      modes.push_back(m);
    }
    return modes;
  };
  auto eval = [&](const std::vector<Mode>& modes, const std::array<double, 3>& y) {
    double v = 0.0;
    for (const Mode& m : modes) {
      double arg = m.phase;
      for (int a = 0; a < d; ++a)
        arg += kTwoPi * m.k[static_cast<std::size_t>(a)] * y[static_cast<std::size_t>(a)];
      v += m.a * std::cos(arg);
    }
    return v;
  };

  std::vector<std::vector<Mode>> sym_modes;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) sym_modes.push_back(draw_modes(2));
  std::vector<std::vector<Mode>> b_modes;
  for (int i = 0; i < d; ++i) b_modes.push_back(draw_modes(2));
  const std::vector<Mode> c_modes = draw_modes(3);

  PeriodicField A(g, FieldRank::Matrix);
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    const auto y = g.coords(node);
    int q = 0;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j, ++q) {
        const double v = amp * eval(sym_modes[static_cast<std::size_t>(q)], y);
        A.value(A.mat(i, j), node) += v;
        if (i != j) A.value(A.mat(j, i), node) += v;
        if (i == j) A.value(A.mat(i, i), node) += 1.0;
      }
  }
  PeriodicField b(g, FieldRank::Vector);
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    const auto y = g.coords(node);
    for (int i = 0; i < d; ++i)
      b.value(i, node) = 0.5 + 0.7 * eval(b_modes[static_cast<std::size_t>(i)], y);
  }
  PeriodicField c(g, FieldRank::Scalar);
  for (std::size_t node = 0; node < g.num_nodes(); ++node)
    c.value(0, node) = 0.5 + 0.5 * eval(c_modes, g.coords(node));

  // mu from the measured nodewise minimum (amplitudes keep it positive)
  double mu = 1e30;
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    double row_excess = 0.0;
    for (int i = 0; i < d; ++i) {
      double offsum = 0.0;
      for (int j = 0; j < d; ++j)
        if (i != j) offsum += std::abs(A.value(A.mat(i, j), node));
      row_excess = std::max(row_excess, offsum);
      mu = std::min(mu, A.value(A.mat(i, i), node) - offsum);
    }
  }
  if (!(mu > 0.0)) throw InvalidArgument("random_smooth: lost ellipticity");
  return ProblemCoefficients::make(std::move(A), std::move(b), std::move(c), mu);
}

GeneralCoefficients oscillatory_1d(const TorusGrid& g) {
  if (g.dim != 1) throw InvalidArgument("oscillatory_1d: dim 1 expected");
  auto Theta = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    return std::array<double, 9>{1.0 / (1.0 + 0.5 * std::sin(kTwoPi * y[0]))};
  });
  return GeneralCoefficients::make(PeriodicField::constant_scalar(g, 1.0),
                                   std::move(Theta), 2.0 / 3.0 - 1e-9);
}

GeneralCoefficients oscillatory_zeta_1d(const TorusGrid& g) {
  if (g.dim != 1) throw InvalidArgument("oscillatory_zeta_1d: dim 1 expected");
  auto zeta = PeriodicField::sample_scalar(g, [](const std::array<double, 3>& y) {
    return 1.0 + 0.4 * std::cos(kTwoPi * y[0]);
  });
  auto Theta = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    return std::array<double, 9>{1.0 / (1.0 + 0.5 * std::sin(kTwoPi * y[0]))};
  });
  return GeneralCoefficients::make(std::move(zeta), std::move(Theta), 2.0 / 3.0 - 1e-9);
}

GeneralCoefficients layered_2d(const TorusGrid& g) {
  if (g.dim != 2) throw InvalidArgument("layered_2d: dim 2 expected");
  auto Theta = PeriodicField::sample_matrix(g, [](const std::array<double, 3>& y) {
    const double a = 1.0 / (1.0 + 0.5 * std::sin(kTwoPi * y[0]));
    return std::array<double, 9>{a, 0.0, 0.0, a};
  });
  return GeneralCoefficients::make(PeriodicField::constant_scalar(g, 1.0),
                                   std::move(Theta), 2.0 / 3.0 - 1e-9);
}

NondivergenceCoefficients nondiv(const TorusGrid& g) {
  PeriodicField K(g, FieldRank::Matrix);
  for (std::size_t node = 0; node < g.num_nodes(); ++node) {
    const auto y = g.coords(node);
    const double v = 1.0 + 0.5 * std::sin(kTwoPi * y[0]);
    for (int i = 0; i < g.dim; ++i) K.value(K.mat(i, i), node) = v;
  }
  return NondivergenceCoefficients::make(std::move(K), PeriodicField(g, FieldRank::Vector),
                                         PeriodicField(g, FieldRank::Scalar), 0.5 - 1e-9);
}

CoefficientSet by_name(const std::string& name, int n_cell, std::uint64_t seed) {
  CoefficientSet cs;
  auto grid = [&](int dim) { return TorusGrid(dim, n_cell); };

  if (name == "classical-1d" || name == "classical-2d" || name == "classical-3d") {
    cs.pipeline = PipelineKind::SectionOne;
    cs.dim = name.back() == 'd' ? name[name.size() - 2] - '0' : 1;
    cs.abc = classical(grid(cs.dim));
  } else if (name == "constant-drift-1d") {
    cs.pipeline = PipelineKind::SectionOne;
    cs.dim = 1;
    cs.abc = constant_drift_1d(grid(1));
  } else if (name == "drift-var-1d") {
    cs.pipeline = PipelineKind::SectionOne;
    cs.dim = 1;
    cs.abc = drift_var_1d(grid(1));
  } else if (name == "drift-2d") {
    cs.pipeline = PipelineKind::SectionOne;
    cs.dim = 2;
    cs.abc = drift_2d(grid(2));
  } else if (name == "random-1d" || name == "random-2d") {
    cs.pipeline = PipelineKind::SectionOne;
    cs.dim = name[name.size() - 2] - '0';
    cs.abc = random_smooth(grid(cs.dim), seed);
  } else if (name == "osc-1d") {
    cs.pipeline = PipelineKind::SectionTwo;
    cs.dim = 1;
    cs.gc = oscillatory_1d(grid(1));
  } else if (name == "osc-zeta-1d") {
    cs.pipeline = PipelineKind::SectionTwo;
    cs.dim = 1;
    cs.gc = oscillatory_zeta_1d(grid(1));
  } else if (name == "layered-2d") {
    cs.pipeline = PipelineKind::SectionTwo;
    cs.dim = 2;
    cs.gc = layered_2d(grid(2));
  } else if (name == "nondiv-1d" || name == "nondiv-2d") {
    cs.pipeline = PipelineKind::Nondivergence;
    cs.dim = name[name.size() - 2] - '0';
    cs.ndc = nondiv(grid(cs.dim));
  } else {
    throw InvalidArgument("unknown preset: " + name);
  }
  return cs;
}

std::vector<std::string> shipped_names() {
  return {"classical-1d", "classical-2d",  "constant-drift-1d", "drift-var-1d",
          "drift-2d",     "random-1d",     "random-2d",         "osc-1d",
          "osc-zeta-1d",  "layered-2d",    "nondiv-1d",         "nondiv-2d"};
}

std::vector<double> datum(const std::string& expr, const DomainSpec& dom) {
  std::vector<double> base(dom.num_nodes(), 0.0);
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t node = 0; node < dom.num_nodes(); ++node) {
    if (dom.on_boundary(node)) continue;
    const auto x = dom.coords(node);
    double v = 1.0;
    if (expr == "bump") {
      for (int a = 0; a < dom.dim; ++a)
        v *= bump(4.0 * (x[static_cast<std::size_t>(a)] - 0.5));
    } else if (expr == "sine") {
      for (int a = 0; a < dom.dim; ++a)
        v *= std::sin(kPi * x[static_cast<std::size_t>(a)]);
    } else {
      throw InvalidArgument("unknown datum profile: " + expr);
    }
    base[node] = v;
  }
  return base;
}

} // namespace parahom::presets
