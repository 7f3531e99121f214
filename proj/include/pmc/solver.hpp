#pragma once

// Barrier verification, the monotone inner solver (damped Newton with a
// pseudo-transient fallback), the penalised outer iteration for general PMC
// functions, barrier construction from a bounded perturbation, and the
// quasi-decreasing solve with tilt diagnostics.

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pmc/geometry.hpp"
#include "pmc/grid.hpp"
#include "pmc/pmc_function.hpp"

namespace pmc {

struct SolveConfig {
  double tol_inner = 1e-10;   // residual sup-norm of an inner solve
  double tol_outer = 1e-8;    // sup distance of consecutive outer iterates
  int max_newton = 50;
  int max_outer = 200;
  int max_relaxation = 400;
  double armijo_c = 1e-4;
  double min_step = 0x1p-20;
  std::optional<double> gamma;  // empty: chosen by gamma_for
  double cutoff_margin = 0.1;   // c1, c2 = barrier range -/+ margin * range
  int samples = 9;              // lattice points per axis
  double theta_threshold = 1e-3;
  double barrier_allowance = 1.0;  // C in the check_barrier tolerance 1e-8 + C h^2
  bool refinement_check = true;

  void validate() const;
};

struct SolveReport;

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::optional<ScalarField> best = std::nullopt,
              std::vector<double> history = {})
      : std::runtime_error(what), best_iterate(std::move(best)),
        residual_history(std::move(history)) {}

  std::optional<ScalarField> best_iterate;
  std::vector<double> residual_history;
  /// Partial outer report when the failure happened inside outer_iterate.
  std::shared_ptr<const SolveReport> partial;
};

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OrderingError : public std::runtime_error {
 public:
  OrderingError(const std::string& what, std::size_t node)
      : std::runtime_error(what), node(node) {}
  std::size_t node;
};

// ---------------------------------------------------------------------------
// Barriers

struct BarrierPair {
  ScalarField u1;  // subsolution
  ScalarField u0;  // supersolution
  /// Boundary trace, one value per grid().boundary_nodes() entry.
  std::vector<double> psi;

  /// Checks u1 = u0 = psi on the boundary (1e-12) and u1 <= u0 elsewhere.
  static BarrierPair make(ScalarField u1, ScalarField u0);
  const BaseGrid& grid() const { return u1.grid(); }
};

struct BarrierReport {
  bool pass = false;
  double worst_sub = 0.0;  // max interior L_H(u1)
  std::size_t worst_sub_node = 0;
  double worst_super = 0.0;  // min interior L_H(u0)
  std::size_t worst_super_node = 0;
  double tolerance = 0.0;
  double allowance_constant = 0.0;
  double spacing = 0.0;
};

/// L_H(u1) <= tol and L_H(u0) >= -tol on interior nodes, tol = 1e-8 + C h^2.
/// Throws OrderingError if u1 >= u0 at an interior node.
BarrierReport check_barrier(const BarrierPair& b, const PMCFunction& h,
                            const ConformalFactor* factor, int n, const WorkingBox* box,
                            const SolveConfig& cfg);

// ---------------------------------------------------------------------------
// Penalisation

/// Smooth cutoff: 1 on [c1, c2], 0 outside [a', b'] with a' = (a+c1)/2 and
/// b' = (c2+b)/2, quintic smoothstep ramps in between.
class CutoffProfile {
 public:
  CutoffProfile(double c1, double c2, double a, double b);

  double operator()(double r) const;
  double derivative(double r) const;

  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double a_prime() const { return (a_ + c1_) / 2.0; }
  double b_prime() const { return (c2_ + b_) / 2.0; }

 private:
  double c1_, c2_, a_, b_;
};

CutoffProfile cutoff_profile(double c1, double c2, double a, double b);

/// Cutoff for a barrier pair: c1, c2 from the barrier range widened by
/// cfg.cutoff_margin, a, b from the working box.
CutoffProfile cutoff_for(const BarrierPair& b, const WorkingBox& box, const SolveConfig& cfg);

struct GammaReport {
  double gamma = 1.0;
  double sup_derivative = 0.0;  // sampled sup of d(hH)/dr
  PMCPoint worst_point;
  std::size_t samples_evaluated = 0;
};

/// gamma = 1 + 1.05 max(0, sup d(hH)/dr) over the lattice.
GammaReport gamma_for(const PMCFunction& h, const CutoffProfile& cutoff,
                      const WorkingBox& box, int samples);

/// min over the lattice of -d(hH)/dr + gamma (the certificate needs >= 1).
double gamma_certificate_min(const PMCFunction& h, const CutoffProfile& cutoff, double gamma,
                             const WorkingBox& box, int samples);

// ---------------------------------------------------------------------------
// Inner (monotone) solve

struct InnerProblem {
  PMCFunction f;  // must satisfy dF/dz <= 0
  ScalarField boundary;  // values imposed on boundary nodes
  WorkingBox box;
};

struct InnerReport {
  bool converged = false;
  int newton_steps = 0;
  int relaxation_steps = 0;
  std::vector<double> residual_history;  // sup norm per accepted iterate
  double final_residual = 0.0;
};

enum class MonotonePrecheck { sample_box, certified };

/// Damped Newton on -div(Du/omega) - F(x,u,-Du/omega,1/omega) = 0 with
/// Armijo backtracking; falls back to pseudo-transient continuation when
/// Newton stagnates. Throws SolverError carrying the best iterate.
std::pair<ScalarField, InnerReport> solve_inner(const InnerProblem& problem,
                                                const ScalarField& init,
                                                const SolveConfig& cfg,
                                                MonotonePrecheck precheck =
                                                    MonotonePrecheck::sample_box);

/// Linear (1D) or Coons-patch (2D) interpolant of the boundary values of
/// `boundary`; periodic axes are left untouched.
ScalarField boundary_interpolant(const ScalarField& boundary);

// ---------------------------------------------------------------------------
// Outer iteration

struct QuasiCertificate {
  double min_theta = 0.0;
  bool graphical = false;
  double theta_threshold = 0.0;
  bool refinement_checked = false;
  double refined_min_theta = 0.0;
  double relative_change = 0.0;
  bool refinement_stable = false;
  double jacobi_residual = 0.0;  // interior sup norm
};

struct SolveReport {
  bool converged = false;
  std::string failure;
  int outer_iterations = 0;
  std::vector<int> inner_newton_counts;
  std::vector<int> inner_relaxation_counts;
  std::vector<double> residual_history;        // ||L_H(u_m)||_inf
  std::vector<double> increment_history;       // sup |u_m - u_{m-1}|
  std::vector<double> min_increment_history;   // min (u_m - u_{m-1})
  std::vector<double> monotonicity_violation;  // max(0, -min increment)
  std::vector<double> confinement_violation;
  double final_residual = 0.0;
  double residual_bound = 0.0;
  bool residual_bound_holds = false;
  double gamma = 0.0;
  double gamma_sup_derivative = 0.0;
  double gamma_certificate_min = 0.0;
  double c1 = 0.0, c2 = 0.0, a = 0.0, b = 0.0;
  double contraction_rate = 0.0;
  double min_theta = 0.0;
  double max_gradient = 0.0;
  double sup_abs_u = 0.0;
  double sup_abs_mean_curvature = 0.0;
  std::optional<QuasiCertificate> quasi;
};

/// Penalised iteration F_m = h(r) H - gamma (r - u_{m-1}), u_1 the
/// subsolution; each u_m solves the monotone problem for F_m starting from
/// u_{m-1}. Stops when sup |u_m - u_{m-1}| <= tol_outer.
std::pair<ScalarField, SolveReport> outer_iterate(const PMCFunction& h, const BarrierPair& b,
                                                  const WorkingBox& box,
                                                  const SolveConfig& cfg);

/// Ordered barrier pair from the two auxiliary problems
/// -div(Du/omega) - Fbase + A/omega = 0, A = -alpha (u0) and A = +alpha (u1),
/// alpha = 1.05 sup |phi| on the box lattice. `boundary` carries psi.
BarrierPair barriers_from_phi(const PMCFunction& fbase, const PMCFunction& phi,
                              const ScalarField& boundary, const WorkingBox& box,
                              const SolveConfig& cfg, double* alpha_out = nullptr);

using BarrierBuilder = std::function<BarrierPair(const GridPtr&)>;

/// outer_iterate on H1 + t H2 followed by the tilt certificate. With
/// `refine`, the problem is solved again after one h-halving and the
/// relative change of min Theta is reported.
std::pair<ScalarField, SolveReport> solve_quasi(const QuasiDecomposition& d,
                                                const BarrierPair& b, const WorkingBox& box,
                                                const SolveConfig& cfg,
                                                const BarrierBuilder* refine = nullptr);

/// Slope diagnostics of a computed graph.
void fill_graph_diagnostics(const ScalarField& v, SolveReport& report);

}  // namespace pmc
