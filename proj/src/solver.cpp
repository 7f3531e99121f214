#include "pmc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pmc/calculus.hpp"
#include "pmc/residual.hpp"

namespace pmc {

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string node_text(const BaseGrid& g, std::size_t p) {
  const Point x = g.position(p);
  char buf[128];
  std::snprintf(buf, sizeof buf, "node %zu at x=(%.17g,%.17g)", p, x[0], x[1]);
  return buf;
}

}  // namespace

void SolveConfig::validate() const {
  if (!(tol_inner > 0.0) || !(tol_outer > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (max_newton < 1 || max_outer < 1 || max_relaxation < 0)
    throw std::invalid_argument("solver iteration limits must be positive");
  if (gamma && !(*gamma > 0.0)) throw std::invalid_argument("explicit gamma must be positive");
  if (!(cutoff_margin > 0.0)) throw std::invalid_argument("cutoff margin must be positive");
  if (samples < 2) throw std::invalid_argument("lattice needs at least 2 samples per axis");
  if (!(min_step > 0.0) || !(armijo_c > 0.0) || !(armijo_c < 0.5))
    throw std::invalid_argument("invalid line-search parameters");
}

// ---------------------------------------------------------------------------
// Barriers

BarrierPair BarrierPair::make(ScalarField u1, ScalarField u0) {
  require_same_grid(u1, u0);
  const BaseGrid& g = u1.grid();
  BarrierPair b;
  for (std::size_t p : g.boundary_nodes()) {
    if (std::abs(u1[p] - u0[p]) > 1e-12)
      throw OrderingError("barriers differ on the boundary at " + node_text(g, p), p);
    b.psi.push_back(u1[p]);
  }
  for (std::size_t p : g.interior_nodes())
    if (u1[p] > u0[p])
      throw OrderingError("subsolution exceeds supersolution at " + node_text(g, p), p);
  b.u1 = std::move(u1);
  b.u0 = std::move(u0);
  return b;
}

BarrierReport check_barrier(const BarrierPair& b, const PMCFunction& h,
                            const ConformalFactor* factor, int n, const WorkingBox* box,
                            const SolveConfig& cfg) {
  const BaseGrid& g = b.grid();
  for (std::size_t p : g.interior_nodes())
    if (!(b.u1[p] < b.u0[p]))
      throw OrderingError("barrier ordering violated (u1 >= u0) at " + node_text(g, p), p);

  if (box) {
    if (b.u1.min() <= box->z_lo || b.u0.max() >= box->z_hi)
      throw BoxError("barrier range must lie strictly inside the working box");
  }
  const ScalarField r1 = pmc_residual(b.u1, h, factor, n, box);
  const ScalarField r0 = pmc_residual(b.u0, h, factor, n, box);

  BarrierReport rep;
  rep.spacing = g.max_spacing();
  rep.allowance_constant = cfg.barrier_allowance;
  rep.tolerance = 1e-8 + cfg.barrier_allowance * rep.spacing * rep.spacing;
  rep.worst_sub = -std::numeric_limits<double>::infinity();
  rep.worst_super = std::numeric_limits<double>::infinity();
  for (std::size_t p : g.interior_nodes()) {
    if (r1[p] > rep.worst_sub) {
      rep.worst_sub = r1[p];
      rep.worst_sub_node = p;
    }
    if (r0[p] < rep.worst_super) {
      rep.worst_super = r0[p];
      rep.worst_super_node = p;
    }
  }
  rep.pass = rep.worst_sub <= rep.tolerance && rep.worst_super >= -rep.tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Penalisation

CutoffProfile::CutoffProfile(double c1, double c2, double a, double b)
    : c1_(c1), c2_(c2), a_(a), b_(b) {
  if (!(a < c1 && c1 < c2 && c2 < b))
    throw std::invalid_argument("cutoff profile needs a < c1 < c2 < b, got a=" +
                                fmt("%.17g", a) + " c1=" + fmt("%.17g", c1) +
                                " c2=" + fmt("%.17g", c2) + " b=" + fmt("%.17g", b));
}

namespace {

double smoothstep(double s) {
  return std::clamp(s * s * s * (s * (6.0 * s - 15.0) + 10.0), 0.0, 1.0);
}
double smoothstep_slope(double s) { return 30.0 * s * s * (1.0 - s) * (1.0 - s); }

}  // namespace

double CutoffProfile::operator()(double r) const {
  if (r >= c1_ && r <= c2_) return 1.0;
  const double ap = a_prime(), bp = b_prime();
  if (r <= ap || r >= bp) return 0.0;
  if (r < c1_) return smoothstep((r - ap) / (c1_ - ap));
  return smoothstep((bp - r) / (bp - c2_));
}

double CutoffProfile::derivative(double r) const {
  if (r >= c1_ && r <= c2_) return 0.0;
  const double ap = a_prime(), bp = b_prime();
  if (r <= ap || r >= bp) return 0.0;
  if (r < c1_) return smoothstep_slope((r - ap) / (c1_ - ap)) / (c1_ - ap);
  return -smoothstep_slope((bp - r) / (bp - c2_)) / (bp - c2_);
}

CutoffProfile cutoff_profile(double c1, double c2, double a, double b) {
  return CutoffProfile(c1, c2, a, b);
}

CutoffProfile cutoff_for(const BarrierPair& b, const WorkingBox& box, const SolveConfig& cfg) {
  const double lo = b.u1.min();
  const double hi = b.u0.max();
  const double range = std::max(hi - lo, 1e-12);
  return CutoffProfile(lo - cfg.cutoff_margin * range, hi + cfg.cutoff_margin * range,
                       box.z_lo, box.z_hi);
}

namespace {

double cutoff_product_derivative(const PMCFunction& h, const CutoffProfile& cut,
                                 const PMCPoint& p) {
  const double hr = cut(p.z);
  const double dh = cut.derivative(p.z);
  if (hr == 0.0 && dh == 0.0) return 0.0;
  const PMCPartials d = h.partials(p);
  return dh * d.value + hr * d.dz;
}

}  // namespace

GammaReport gamma_for(const PMCFunction& h, const CutoffProfile& cutoff,
                      const WorkingBox& box, int samples) {
  GammaReport rep;
  bool first = true;
  for_each_lattice_point(box, samples, [&](const PMCPoint& p) {
    const double v = cutoff_product_derivative(h, cutoff, p);
    ++rep.samples_evaluated;
    if (first || v > rep.sup_derivative) {
      rep.sup_derivative = v;
      rep.worst_point = p;
      first = false;
    }
  });
  rep.gamma = 1.0 + std::max(0.0, rep.sup_derivative) * 1.05;
  return rep;
}

double gamma_certificate_min(const PMCFunction& h, const CutoffProfile& cutoff, double gamma,
                             const WorkingBox& box, int samples) {
  double m = std::numeric_limits<double>::infinity();
  for_each_lattice_point(box, samples, [&](const PMCPoint& p) {
    m = std::min(m, -cutoff_product_derivative(h, cutoff, p) + gamma);
  });
  return m;
}

// ---------------------------------------------------------------------------
// Inner solve

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Discrete residual -div(Du/omega) - F at unknown (non-boundary) nodes and
/// its exact Jacobian.
class InnerSystem {
 public:
  InnerSystem(const GridPtr& grid, const PMCFunction& f) : grid_(grid), f_(f) {
    const BaseGrid& g = *grid_;
    const int dim = g.dimension();
    unknown_.assign(g.size(), -1);
    for (std::size_t p : g.interior_nodes()) {
      unknown_[p] = static_cast<int>(nodes_.size());
      nodes_.push_back(p);
    }
    node_grad_.resize(g.size() * dim);
    face_grad_.resize(g.size() * dim * dim);
    has_face_.resize(g.size() * dim);
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int a = 0; a < dim; ++a) {
        node_grad_[p * dim + a] = node_gradient_stencil(g, p, a);
        has_face_[p * dim + a] = g.has_face(p, a);
        if (!has_face_[p * dim + a]) continue;
        for (int k = 0; k < dim; ++k)
          face_grad_[(p * dim + a) * dim + k] = face_gradient_stencil(g, p, a, k);
      }
    }
  }

  std::size_t unknowns() const { return nodes_.size(); }
  const std::vector<std::size_t>& nodes() const { return nodes_; }

  /// Returns false if F is not finite somewhere.
  bool residual(std::span<const double> u, Vec& out) const {
    const BaseGrid& g = *grid_;
    const int dim = g.dimension();
    fill_fluxes(u);
    out.resize(static_cast<Eigen::Index>(nodes_.size()));
    try {
      for (std::size_t k = 0; k < nodes_.size(); ++k) {
        const std::size_t p = nodes_[k];
        double div = 0.0;
        for (int a = 0; a < dim; ++a)
          div += (flux_[p * dim + a] - flux_[g.neighbor(p, a, -1) * dim + a]) / g.spacing(a);
        const PMCPoint q = point(u, p);
        const double fv = f_(q);
        out[static_cast<Eigen::Index>(k)] = -div - fv;
      }
    } catch (const EvaluationError&) {
      return false;
    }
    return out.allFinite();
  }

  void jacobian(std::span<const double> u, SpMat& J) const {
    const BaseGrid& g = *grid_;
    const int dim = g.dimension();
    triplets_.clear();
    auto push = [&](int row, std::size_t col_node, double v) {
      const int col = unknown_[col_node];
      if (row >= 0 && col >= 0) triplets_.emplace_back(row, col, v);
    };
    // -div(q): face (p,a) enters row p with -1/h and row p+e_a with +1/h
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int a = 0; a < dim; ++a) {
        if (!has_face_[p * dim + a]) continue;
        const std::size_t next = g.neighbor(p, a, 1);
        const int row_lo = unknown_[p];
        const int row_hi = unknown_[next];
        if (row_lo < 0 && row_hi < 0) continue;
        Point G{0.0, 0.0};
        for (int k = 0; k < dim; ++k) G[k] = face_grad_[(p * dim + a) * dim + k].apply(u);
        const double w2 = 1.0 + G[0] * G[0] + G[1] * G[1];
        const double w = std::sqrt(w2);
        const double inv_h = 1.0 / g.spacing(a);
        for (int k = 0; k < dim; ++k) {
          const double dq = ((k == a ? 1.0 : 0.0) - G[a] * G[k] / w2) / w;
          const Stencil& s = face_grad_[(p * dim + a) * dim + k];
          for (int t = 0; t < s.count; ++t) {
            const double v = dq * s.taps[t].weight * inv_h;
            push(row_lo, s.taps[t].node, -v);
            push(row_hi, s.taps[t].node, v);
          }
        }
      }
    }
    // -F(x, u, -Du/omega, 1/omega)
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const std::size_t p = nodes_[k];
      const int row = static_cast<int>(k);
      Point D{0.0, 0.0};
      for (int a = 0; a < dim; ++a) D[a] = node_grad_[p * dim + a].apply(u);
      const double w2 = 1.0 + D[0] * D[0] + D[1] * D[1];
      const double w = std::sqrt(w2);
      const double w3 = w2 * w;
      const PMCPoint q = point(u, p);
      const PMCPartials d = f_.partials(q);
      triplets_.emplace_back(row, row, -d.dz);
      for (int kk = 0; kk < dim; ++kk) {
        // dF/dD_k through Y_m = -D_m/omega and t = 1/omega
        double c = -d.dt * D[kk] / w3;
        for (int m = 0; m < dim; ++m)
          c += d.dY[m] * ((m == kk ? -1.0 / w : 0.0) + D[m] * D[kk] / w3);
        const Stencil& s = node_grad_[p * dim + kk];
        for (int t = 0; t < s.count; ++t) push(row, s.taps[t].node, -c * s.taps[t].weight);
      }
    }
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    J.resize(n, n);
    J.setFromTriplets(triplets_.begin(), triplets_.end());
  }

 private:
  PMCPoint point(std::span<const double> u, std::size_t p) const {
    const BaseGrid& g = *grid_;
    const int dim = g.dimension();
    Point D{0.0, 0.0};
    for (int a = 0; a < dim; ++a) D[a] = node_grad_[p * dim + a].apply(u);
    const double w = std::sqrt(1.0 + D[0] * D[0] + D[1] * D[1]);
    PMCPoint q;
    q.x = g.position(p);
    q.z = u[p];
    q.Y = {-D[0] / w, -D[1] / w};
    q.t = 1.0 / w;
    q.node = p;
    return q;
  }

  void fill_fluxes(std::span<const double> u) const {
    const BaseGrid& g = *grid_;
    const int dim = g.dimension();
    flux_.assign(g.size() * dim, 0.0);
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int a = 0; a < dim; ++a) {
        if (!has_face_[p * dim + a]) continue;
        Point G{0.0, 0.0};
        for (int k = 0; k < dim; ++k) G[k] = face_grad_[(p * dim + a) * dim + k].apply(u);
        flux_[p * dim + a] = G[a] / std::sqrt(1.0 + G[0] * G[0] + G[1] * G[1]);
      }
    }
  }

  GridPtr grid_;
  PMCFunction f_;
  std::vector<int> unknown_;
  std::vector<std::size_t> nodes_;
  std::vector<Stencil> node_grad_;
  std::vector<Stencil> face_grad_;
  std::vector<char> has_face_;
  mutable std::vector<double> flux_;
  mutable std::vector<Eigen::Triplet<double>> triplets_;
};

bool within(const std::vector<double>& u, const WorkingBox& box) {
  for (double v : u)
    if (!(v >= box.z_lo && v <= box.z_hi)) return false;
  return true;
}

}  // namespace

std::pair<ScalarField, InnerReport> solve_inner(const InnerProblem& problem,
                                                const ScalarField& init,
                                                const SolveConfig& cfg,
                                                MonotonePrecheck precheck) {
  cfg.validate();
  require_same_grid(init, problem.boundary);
  const GridPtr& grid = init.grid_ptr();
  if (precheck == MonotonePrecheck::sample_box) {
    const SampleReport mono = check_monotone(problem.f, problem.box, cfg.samples);
    if (!mono.pass)
      throw PreconditionError("inner solver refuses a non-monotone PMC function: dF/dz = " +
                              fmt("%.17g", mono.worst_value) + " at " +
                              describe(mono.worst_point));
  }

  std::vector<double> u(init.values().begin(), init.values().end());
  for (std::size_t p : grid->boundary_nodes()) u[p] = problem.boundary[p];
  if (!within(u, problem.box))
    require_within_box(ScalarField(grid, u), problem.box);

  InnerSystem sys(grid, problem.f);
  InnerReport rep;
  const auto& nodes = sys.nodes();

  Vec R;
  if (!sys.residual(u, R))
    throw SolverError("PMC function is not finite at the initial iterate",
                      ScalarField(grid, u));
  auto sup = [](const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };

  std::vector<double> best = u;
  double best_norm = sup(R);
  rep.residual_history.push_back(best_norm);

  auto record = [&](const std::vector<double>& cand, const Vec& res) {
    const double s = sup(res);
    rep.residual_history.push_back(s);
    if (s < best_norm) {
      best_norm = s;
      best = cand;
    }
  };

  SpMat J;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool pattern_ready = false;
  auto factor = [&](const SpMat& A) {
    if (!pattern_ready) {
      lu.analyzePattern(A);
      pattern_ready = true;
    }
    lu.factorize(A);
    return lu.info() == Eigen::Success;
  };

  std::vector<double> trial(u.size());
  Vec R_trial;
  auto apply_step = [&](const Vec& delta, double lambda) {
    trial = u;
    for (std::size_t k = 0; k < nodes.size(); ++k)
      trial[nodes[k]] += lambda * delta[static_cast<Eigen::Index>(k)];
    return within(trial, problem.box) && sys.residual(trial, R_trial);
  };

  // Damped Newton
  bool stagnated = false;
  while (sup(R) > cfg.tol_inner) {
    if (rep.newton_steps >= cfg.max_newton) {
      stagnated = true;
      break;
    }
    sys.jacobian(u, J);
    if (!factor(J)) {
      stagnated = true;
      break;
    }
    const Vec delta = lu.solve(-R);
    if (!delta.allFinite()) {
      stagnated = true;
      break;
    }
    const double phi0 = R.squaredNorm();
    double lambda = 1.0;
    bool accepted = false;
    while (lambda >= cfg.min_step) {
      if (apply_step(delta, lambda) &&
          R_trial.squaredNorm() <= (1.0 - 2.0 * cfg.armijo_c * lambda) * phi0) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    ++rep.newton_steps;
    if (!accepted) {
      stagnated = true;
      break;
    }
    u.swap(trial);
    R = R_trial;
    record(u, R);
  }

  // Pseudo-transient continuation: (I/dtau + J) delta = -R, dtau adapted by
  // the residual ratio.
  if (stagnated) {
    u = best;
    sys.residual(u, R);
    double dtau = 1e-2;
    int rejected = 0;
    while (sup(R) > cfg.tol_inner && rep.relaxation_steps < cfg.max_relaxation &&
           rejected < 60) {
      sys.jacobian(u, J);
      SpMat A = J;
      for (Eigen::Index k = 0; k < A.rows(); ++k) A.coeffRef(k, k) += 1.0 / dtau;
      if (!factor(A)) {
        dtau *= 0.25;
        ++rejected;
        continue;
      }
      const Vec delta = lu.solve(-R);
      if (!delta.allFinite() || !apply_step(delta, 1.0) ||
          R_trial.norm() > 2.0 * R.norm()) {
        dtau *= 0.25;
        ++rejected;
        continue;
      }
      rejected = 0;
      ++rep.relaxation_steps;
      const double ratio = R.norm() / std::max(R_trial.norm(), 1e-300);
      dtau = std::min(dtau * ratio, 1e12);
      u.swap(trial);
      R = R_trial;
      record(u, R);
    }
  }

  rep.final_residual = sup(R);
  rep.converged = rep.final_residual <= cfg.tol_inner;
  if (!rep.converged)
    throw SolverError("inner solve did not reach the residual tolerance (best " +
                          fmt("%.3e", best_norm) + " after " +
                          std::to_string(rep.newton_steps) + " Newton and " +
                          std::to_string(rep.relaxation_steps) + " relaxation steps)",
                      ScalarField(grid, best), rep.residual_history);
  return {ScalarField(grid, std::move(u)), rep};
}

ScalarField boundary_interpolant(const ScalarField& boundary) {
  const BaseGrid& g = boundary.grid();
  ScalarField out = boundary;
  if (g.boundary_nodes().empty()) return out;
  auto at = [&](int i, int j) { return boundary[g.index(i, j)]; };
  const int s0 = g.shape(0);
  const int s1 = g.dimension() == 2 ? g.shape(1) : 1;
  const bool d0 = !g.periodic(0);
  const bool d1 = g.dimension() == 2 && !g.periodic(1);
  for (std::size_t p : g.interior_nodes()) {
    const auto c = g.coords(p);
    const double s = static_cast<double>(c[0]) / (s0 - 1);
    const double t = s1 > 1 ? static_cast<double>(c[1]) / (s1 - 1) : 0.0;
    if (d0 && d1) {
      const double lr = (1 - s) * at(0, c[1]) + s * at(s0 - 1, c[1]);
      const double bt = (1 - t) * at(c[0], 0) + t * at(c[0], s1 - 1);
      const double corners = (1 - s) * (1 - t) * at(0, 0) + s * (1 - t) * at(s0 - 1, 0) +
                             (1 - s) * t * at(0, s1 - 1) + s * t * at(s0 - 1, s1 - 1);
      out[p] = lr + bt - corners;
    } else if (d0) {
      out[p] = (1 - s) * at(0, c[1]) + s * at(s0 - 1, c[1]);
    } else if (d1) {
      out[p] = (1 - t) * at(c[0], 0) + t * at(c[0], s1 - 1);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outer iteration

void fill_graph_diagnostics(const ScalarField& v, SolveReport& report) {
  const BaseGrid& g = v.grid();
  const ScalarField theta = theta_field(v);
  report.min_theta = theta.min();
  report.max_gradient = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Point D = node_gradient_at(v, p);
    report.max_gradient = std::max(report.max_gradient, std::hypot(D[0], D[1]));
  }
  report.sup_abs_u = sup_norm(v);
  report.sup_abs_mean_curvature = interior_sup_norm(mean_curvature_product(v));
}

namespace {

PMCFunction penalised(const PMCFunction& h, const CutoffProfile& cut, double gamma,
                      std::shared_ptr<const std::vector<double>> anchor) {
  return PMCFunction(
      "penalised(" + h.provenance() + ")",
      [h, cut, gamma, anchor](const PMCPoint& p) {
        const double c = cut(p.z);
        const double hv = c == 0.0 ? 0.0 : c * h(p);
        return hv - gamma * (p.z - (*anchor)[p.node]);
      },
      [h, cut, gamma, anchor](const PMCPoint& p) {
        const double c = cut(p.z);
        const double dc = cut.derivative(p.z);
        PMCPartials out;
        if (c != 0.0 || dc != 0.0) {
          const PMCPartials d = h.partials(p);
          out.value = c * d.value;
          out.dz = dc * d.value + c * d.dz;
          out.dY = {c * d.dY[0], c * d.dY[1]};
          out.dt = c * d.dt;
        }
        out.value -= gamma * (p.z - (*anchor)[p.node]);
        out.dz -= gamma;
        return out;
      });
}

}  // namespace

std::pair<ScalarField, SolveReport> outer_iterate(const PMCFunction& h, const BarrierPair& b,
                                                  const WorkingBox& box,
                                                  const SolveConfig& cfg) {
  cfg.validate();
  const GridPtr& grid = b.u1.grid_ptr();
  const BaseGrid& g = *grid;
  SolveReport rep;

  const CutoffProfile cut = cutoff_for(b, box, cfg);
  rep.c1 = cut.c1();
  rep.c2 = cut.c2();
  rep.a = cut.a();
  rep.b = cut.b();
  if (cfg.gamma) {
    rep.gamma = *cfg.gamma;
    rep.gamma_sup_derivative = std::numeric_limits<double>::quiet_NaN();
  } else {
    const GammaReport gr = gamma_for(h, cut, box, cfg.samples);
    rep.gamma = gr.gamma;
    rep.gamma_sup_derivative = gr.sup_derivative;
  }
  rep.gamma_certificate_min = gamma_certificate_min(h, cut, rep.gamma, box, cfg.samples);
  if (rep.gamma_certificate_min < 1.0 - 1e-12)
    throw PreconditionError("gamma = " + fmt("%.17g", rep.gamma) +
                            " violates -d(hH)/dr + gamma >= 1 (min " +
                            fmt("%.17g", rep.gamma_certificate_min) + ")");

  ScalarField prev = b.u1;
  ScalarField boundary = b.u1;
  auto fail = [&](const std::string& msg, const std::optional<ScalarField>& best,
                  std::vector<double> history) {
    rep.failure = msg;
    SolverError err(msg, best, std::move(history));
    err.partial = std::make_shared<SolveReport>(rep);
    throw err;
  };

  for (int m = 2; m <= cfg.max_outer + 1; ++m) {
    auto anchor = std::make_shared<const std::vector<double>>(prev.values().begin(),
                                                              prev.values().end());
    InnerProblem inner{penalised(h, cut, rep.gamma, anchor), boundary, box};
    std::pair<ScalarField, InnerReport> step;
    try {
      step = solve_inner(inner, prev, cfg, MonotonePrecheck::certified);
    } catch (const SolverError& e) {
      fail("outer step " + std::to_string(m) + ": " + e.what(),
           e.best_iterate ? e.best_iterate : std::optional<ScalarField>(prev),
           e.residual_history);
    }
    ScalarField& um = step.first;
    ++rep.outer_iterations;
    rep.inner_newton_counts.push_back(step.second.newton_steps);
    rep.inner_relaxation_counts.push_back(step.second.relaxation_steps);

    double inc_sup = 0.0, inc_min = 0.0, confine = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double d = um[p] - prev[p];
      inc_sup = std::max(inc_sup, std::abs(d));
      inc_min = std::min(inc_min, d);
      confine = std::max({confine, b.u1[p] - um[p], um[p] - b.u0[p]});
    }
    rep.increment_history.push_back(inc_sup);
    rep.min_increment_history.push_back(inc_min);
    rep.monotonicity_violation.push_back(std::max(0.0, -inc_min));
    rep.confinement_violation.push_back(std::max(0.0, confine));
    rep.residual_history.push_back(interior_sup_norm(pmc_residual(um, h)));

    if (-inc_min > 1e-6)
      fail("outer iterates lost monotonicity by " + fmt("%.3e", -inc_min) +
               " at step " + std::to_string(m) +
               "; refine the grid or increase gamma",
           um, rep.residual_history);
    if (confine > 1e-6)
      fail("outer iterate left the barrier pair by " + fmt("%.3e", confine) + " at step " +
               std::to_string(m),
           um, rep.residual_history);

    const std::size_t k = rep.increment_history.size();
    if (k >= 2 && rep.increment_history[k - 2] > 0.0)
      rep.contraction_rate = rep.increment_history[k - 1] / rep.increment_history[k - 2];

    const double last_inner = step.second.final_residual;
    prev = std::move(um);
    if (inc_sup <= cfg.tol_outer) {
      rep.converged = true;
      rep.final_residual = interior_sup_norm(pmc_residual(prev, h, nullptr, 0, &box));
      rep.residual_bound = cfg.tol_inner + rep.gamma * inc_sup;
      rep.residual_bound_holds = rep.final_residual <= rep.residual_bound;
      fill_graph_diagnostics(prev, rep);
      if (!rep.residual_bound_holds)
        fail("final residual " + fmt("%.3e", rep.final_residual) +
                 " exceeds the penalty bound " + fmt("%.3e", rep.residual_bound) +
                 " (inner residual " + fmt("%.3e", last_inner) + ")",
             prev, rep.residual_history);
      return {prev, rep};
    }
  }
  fail("outer iteration did not converge within " + std::to_string(cfg.max_outer) +
           " steps (last increment " + fmt("%.3e", rep.increment_history.back()) +
           ", contraction rate " + fmt("%.4f", rep.contraction_rate) + ")",
       prev, rep.residual_history);
  return {prev, rep};  // unreachable
}

// ---------------------------------------------------------------------------
// Barriers from a bounded perturbation

BarrierPair barriers_from_phi(const PMCFunction& fbase, const PMCFunction& phi,
                              const ScalarField& boundary, const WorkingBox& box,
                              const SolveConfig& cfg, double* alpha_out) {
  const BaseGrid& g = boundary.grid();
  if (g.boundary_nodes().empty())
    throw std::invalid_argument("barriers_from_phi needs a grid with dirichlet boundary");
  if (fbase.z_dependent())
    throw std::invalid_argument("barriers_from_phi needs a z-independent base function");

  double sup_phi = 0.0;
  for_each_lattice_point(box, cfg.samples,
                         [&](const PMCPoint& p) { sup_phi = std::max(sup_phi, std::abs(phi(p))); });
  const double alpha = 1.05 * sup_phi;
  if (alpha_out) *alpha_out = alpha;

  auto shifted = [&](double A) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " - (%.17g)*t", A);
    return PMCFunction(
        fbase.provenance() + buf,
        [fbase, A](const PMCPoint& p) { return fbase(p) - A * p.t; },
        [fbase, A](const PMCPoint& p) {
          PMCPartials d = fbase.partials(p);
          d.value -= A * p.t;
          d.dt -= A;
          return d;
        },
        false);
  };

  const ScalarField init = boundary_interpolant(boundary);
  auto upper = solve_inner(InnerProblem{shifted(-alpha), boundary, box}, init, cfg);
  auto lower = solve_inner(InnerProblem{shifted(alpha), boundary, box}, init, cfg);
  for (std::size_t p : g.interior_nodes())
    if (lower.first[p] > upper.first[p] + 1e-12)
      throw OrderingError("auxiliary solutions are not ordered at " + node_text(g, p), p);
  // clip rounding-level crossings so the pair satisfies u1 <= u0
  ScalarField u1 = lower.first;
  for (std::size_t p = 0; p < g.size(); ++p) u1[p] = std::min(u1[p], upper.first[p]);
  return BarrierPair::make(std::move(u1), upper.first);
}

// ---------------------------------------------------------------------------
// Quasi-decreasing solve

std::pair<ScalarField, SolveReport> solve_quasi(const QuasiDecomposition& d,
                                                const BarrierPair& b, const WorkingBox& box,
                                                const SolveConfig& cfg,
                                                const BarrierBuilder* refine) {
  const SampleReport q = check_quasi_decreasing(d, box, cfg.samples);
  if (!q.pass)
    throw PreconditionError("H1 is not decreasing in z: dH1/dz = " +
                            fmt("%.17g", q.worst_value) + " at " + describe(q.worst_point));
  const PMCFunction h = d.composite();
  auto [v, rep] = outer_iterate(h, b, box, cfg);

  QuasiCertificate cert;
  cert.theta_threshold = cfg.theta_threshold;
  cert.min_theta = theta_field(v).min();
  cert.graphical = cert.min_theta >= cfg.theta_threshold;
  cert.jacobi_residual = interior_sup_norm(jacobi_residual(v, h));
  if (refine && cfg.refinement_check) {
    const GridPtr fine = build_grid(v.grid().refined_spec());
    const BarrierPair bf = (*refine)(fine);
    const WorkingBox fine_box = WorkingBox::over(*fine, box.z_lo, box.z_hi);
    auto fine_solution = outer_iterate(h, bf, fine_box, cfg);
    cert.refinement_checked = true;
    cert.refined_min_theta = theta_field(fine_solution.first).min();
    cert.relative_change =
        std::abs(cert.refined_min_theta - cert.min_theta) / std::max(cert.min_theta, 1e-300);
    cert.refinement_stable = cert.relative_change <= 0.2;
  }
  rep.quasi = cert;
  return {std::move(v), std::move(rep)};
}

}  // namespace pmc
