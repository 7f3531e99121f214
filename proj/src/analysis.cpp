#include "pmc/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pmc/calculus.hpp"
#include "pmc/geometry.hpp"

namespace pmc {

double area_functional(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  double s = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Point D = node_gradient_at(u, p);
    s += g.weight(p) * std::sqrt(1.0 + D[0] * D[0] + D[1] * D[1]);
  }
  return s;
}

double total_variation(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  double s = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Point D = node_gradient_at(u, p);
    s += g.weight(p) * std::hypot(D[0], D[1]);
  }
  return s;
}

double perimeter_gap(const ScalarField& u) {
  return area_functional(u) - std::max(u.grid().volume(), total_variation(u));
}

namespace {

using Vec3 = std::array<double, 3>;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const Vec3 e2{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
  const double cx = e1[1] * e2[2] - e1[2] * e2[1];
  const double cy = e1[2] * e2[0] - e1[0] * e2[2];
  const double cz = e1[0] * e2[1] - e1[1] * e2[0];
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace

double mesh_area_oracle(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  if (g.dimension() != 2)
    throw std::invalid_argument("mesh_area_oracle needs a 2D grid; use arc_length_oracle in 1D");
  const double h1 = g.spacing(0), h2 = g.spacing(1);
  const int cells1 = g.periodic(0) ? g.shape(0) : g.shape(0) - 1;
  const int cells2 = g.periodic(1) ? g.shape(1) : g.shape(1) - 1;
  double area = 0.0;
  for (int j = 0; j < cells2; ++j) {
    const int jn = (j + 1) % g.shape(1);
    for (int i = 0; i < cells1; ++i) {
      const int in = (i + 1) % g.shape(0);
      const Vec3 p00{0.0, 0.0, u[g.index(i, j)]};
      const Vec3 p10{h1, 0.0, u[g.index(in, j)]};
      const Vec3 p11{h1, h2, u[g.index(in, jn)]};
      const Vec3 p01{0.0, h2, u[g.index(i, jn)]};
      area += triangle_area(p00, p10, p11) + triangle_area(p00, p11, p01);
    }
  }
  return area;
}

double arc_length_oracle(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  if (g.dimension() != 1) throw std::invalid_argument("arc_length_oracle needs a 1D grid");
  const int segments = g.periodic(0) ? g.shape(0) : g.shape(0) - 1;
  double len = 0.0;
  for (int i = 0; i < segments; ++i)
    len += std::hypot(g.spacing(0), u[g.index((i + 1) % g.shape(0))] - u[g.index(i)]);
  return len;
}

std::vector<double> observed_orders(const std::vector<double>& values) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 2 < values.size(); ++k) {
    const double d1 = std::abs(values[k + 1] - values[k]);
    const double d2 = std::abs(values[k + 2] - values[k + 1]);
    out.push_back(d1 > 0.0 && d2 > 0.0 ? std::log2(d1 / d2)
                                       : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

RefinementReport blowup_diagnostics(const RefinementProblem& problem, int levels) {
  if (levels < 2) throw std::invalid_argument("blowup_diagnostics needs at least 2 levels");
  if (!problem.barriers) throw std::invalid_argument("refinement problem has no barrier builder");
  RefinementReport rep;
  GridSpec spec = problem.grid;
  for (int level = 0; level < levels; ++level) {
    const GridPtr grid = build_grid(spec);
    LevelMetrics m;
    m.spacing = grid->max_spacing();
    m.shape = spec.shape;
    try {
      const BarrierPair b = problem.barriers(grid);
      const WorkingBox box = WorkingBox::over(*grid, problem.z_lo, problem.z_hi);
      const auto [v, sr] = outer_iterate(problem.h, b, box, problem.solver);
      m.converged = sr.converged;
      m.outer_iterations = sr.outer_iterations;
      m.final_residual = sr.final_residual;
      m.max_gradient = sr.max_gradient;
      m.min_theta = sr.min_theta;
      m.total_variation = total_variation(v);
      m.area = area_functional(v);
    } catch (const std::exception& e) {
      m.error = e.what();
      m.min_theta = m.max_gradient = m.total_variation = m.area =
          std::numeric_limits<double>::quiet_NaN();
    }
    rep.levels.push_back(m.spacing);
    rep.metrics.push_back(std::move(m));
    spec = grid->refined_spec();
  }

  std::vector<double> area, theta, tv;
  bool all_converged = true;
  for (const LevelMetrics& m : rep.metrics) {
    area.push_back(m.area);
    theta.push_back(m.min_theta);
    tv.push_back(m.total_variation);
    all_converged = all_converged && m.converged;
  }
  rep.area_orders = observed_orders(area);
  rep.min_theta_orders = observed_orders(theta);
  rep.total_variation_orders = observed_orders(tv);

  bool doubling = true;
  for (std::size_t k = 0; k + 1 < rep.metrics.size(); ++k) {
    const double a = rep.metrics[k].max_gradient, b = rep.metrics[k + 1].max_gradient;
    // gradients of a flat solution are rounding noise; their ratio means nothing
    const double ratio = a > 1e-6 ? b / a : std::numeric_limits<double>::quiet_NaN();
    rep.gradient_growth.push_back(ratio);
    doubling = doubling && ratio >= 2.0;
  }
  rep.suspected_non_graphical = all_converged && doubling;
  return rep;
}

}  // namespace pmc
