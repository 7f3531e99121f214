#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pmc/grid.hpp"

namespace pmc::testing {

inline GridPtr circle(int n, double length = 1.0) {
  return build_grid({1, {n}, {length}, {Topology::periodic}, {}});
}

inline GridPtr interval(int n, double lo, double hi) {
  return build_grid({1, {n}, {hi - lo}, {Topology::dirichlet}, {lo}});
}

inline GridPtr torus(int n, double length = 1.0) {
  return build_grid(
      {2, {n, n}, {length, length}, {Topology::periodic, Topology::periodic}, {}});
}

inline GridPtr rectangle(int n1, int n2, double x_lo, double y_lo, double l1, double l2) {
  return build_grid(
      {2, {n1, n2}, {l1, l2}, {Topology::dirichlet, Topology::dirichlet}, {x_lo, y_lo}});
}

/// [-0.5, 0.5]^2 with `n` nodes per side.
inline GridPtr cap_square(int n) { return rectangle(n, n, -0.5, -0.5, 1.0, 1.0); }

inline const char* kCap = "sqrt(1 - x1^2 - x2^2)";
inline const char* kCatenoid = "ln(sqrt(x1^2 + x2^2) + sqrt(x1^2 + x2^2 - 1))";

/// Sup of |field| over the interior nodes of a 2D square grid that are also
/// nodes of the grid with `coarse_cells` cells per side.
inline double shared_node_sup(const ScalarField& field, int coarse_cells) {
  const BaseGrid& g = field.grid();
  const int stride = (g.shape(0) - 1) / coarse_cells;
  double e = 0.0;
  for (std::size_t p : g.interior_nodes()) {
    const auto c = g.coords(p);
    if (c[0] % stride == 0 && c[1] % stride == 0) e = std::max(e, std::abs(field[p]));
  }
  return e;
}

inline double order(double coarse_error, double fine_error) {
  return std::log2(coarse_error / fine_error);
}

}  // namespace pmc::testing
