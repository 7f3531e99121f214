#pragma once

// Area and total-variation functionals of graphs, an independent
// triangulated-mesh area, and refinement studies that watch for gradient
// blow-up.

#include <optional>
#include <string>
#include <vector>

#include "pmc/grid.hpp"
#include "pmc/pmc_function.hpp"
#include "pmc/solver.hpp"

namespace pmc {

/// Quadrature of sqrt(1 + |Du|^2) with node-centred gradients.
double area_functional(const ScalarField& u);

/// Quadrature of |Du|.
double total_variation(const ScalarField& u);

/// area - max(volume, total variation); nonnegative up to rounding.
double perimeter_gap(const ScalarField& u);

/// Sum of Euclidean areas of the triangles spanned by the graph vertices,
/// two per cell split along the lower-left to upper-right diagonal. Periodic
/// axes contribute the wrap-around cells. 2D only.
double mesh_area_oracle(const ScalarField& u);

/// Length of the polyline through the graph vertices. 1D only.
double arc_length_oracle(const ScalarField& u);

/// A solvable problem that can be rebuilt on any refinement of its grid.
struct RefinementProblem {
  GridSpec grid;
  PMCFunction h = PMCFunction::constant(0.0);
  BarrierBuilder barriers;
  double z_lo = -1.0;
  double z_hi = 1.0;
  SolveConfig solver;
};

struct LevelMetrics {
  double spacing = 0.0;
  std::vector<int> shape;
  bool converged = false;
  std::string error;  // empty unless the level failed
  int outer_iterations = 0;
  double final_residual = 0.0;
  double max_gradient = 0.0;
  double min_theta = 0.0;
  double total_variation = 0.0;
  double area = 0.0;
};

struct RefinementReport {
  std::vector<double> levels;  // grid spacings, coarse to fine
  std::vector<LevelMetrics> metrics;
  /// Observed orders from consecutive triples of levels (empty for < 3 levels).
  std::vector<double> area_orders;
  std::vector<double> min_theta_orders;
  std::vector<double> total_variation_orders;
  std::vector<double> gradient_growth;  // max|Du| ratio between consecutive levels
  bool suspected_non_graphical = false;
};

/// log2(|q1 - q0| / |q2 - q1|) for each consecutive triple; NaN where a
/// difference vanishes.
std::vector<double> observed_orders(const std::vector<double>& values);

/// Runs outer_iterate on `levels` successive h-halvings (levels >= 2).
/// Solver failures are recorded per level and the remaining levels still run.
/// Flags a suspected non-graphical limit when max|Du| at least doubles with
/// every halving while every level converged.
RefinementReport blowup_diagnostics(const RefinementProblem& problem, int levels);

}  // namespace pmc
