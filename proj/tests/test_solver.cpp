#include <cmath>
#include <numbers>

#include "doctest.h"

#include "pmc/analysis.hpp"
#include "pmc/calculus.hpp"
#include "pmc/residual.hpp"
#include "pmc/solver.hpp"
#include "support.hpp"

using namespace pmc;
using namespace pmc::testing;

namespace {

BarrierPair constant_pair(const GridPtr& g, double lo, double hi) {
  return BarrierPair::make(ScalarField(g, lo), ScalarField(g, hi));
}

BarrierPair shifted_pair(const GridPtr& g, const char* center, double shift) {
  const ScalarField c = field_from_expr(g, center);
  ScalarField lo = c, hi = c;
  for (std::size_t p : g->interior_nodes()) {
    lo[p] -= shift;
    hi[p] += shift;
  }
  return BarrierPair::make(lo, hi);
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("config validation") {
    SolveConfig c;
    c.validate();
    c.tol_inner = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.gamma = -1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.samples = 1;
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("barrier pair construction") {
    const GridPtr g = cap_square(9);
    CHECK_THROWS_AS(BarrierPair::make(ScalarField(g, 0.0), ScalarField(g, 1.0)), OrderingError);
    const BarrierPair b = shifted_pair(g, kCap, 0.1);
    CHECK(b.psi.size() == g->boundary_nodes().size());
    CHECK(constant_pair(torus(8), 0, 1).psi.empty());
  }

  TEST_CASE("barrier checks") {
    SolveConfig cfg;
    SUBCASE("torus sine pair passes") {
      const GridPtr g = torus(32);
      const BarrierPair b = constant_pair(g, 0.25, std::numbers::pi + 0.25);
      const BarrierReport r = check_barrier(
          b, parse_pmc("0.5*sin(z) + 0.1*sin(2*pi*x1)"), nullptr, 2, nullptr, cfg);
      CHECK(r.pass);
      CHECK(r.worst_sub < 0.0);
      CHECK(r.worst_super > 0.0);
    }
    SUBCASE("reversed pair is an ordering error before any residual work") {
      const GridPtr g = torus(8);
      BarrierPair b;
      b.u1 = ScalarField(g, 0.6);
      b.u0 = ScalarField(g, 0.5);
      try {
        check_barrier(b, PMCFunction::constant(0.0), nullptr, 2, nullptr, cfg);
        FAIL("expected an ordering error");
      } catch (const OrderingError& e) {
        CHECK(e.node == 0);
        CHECK(std::string(e.what()).find("node 0") != std::string::npos);
      }
    }
    SUBCASE("shifted caps pass with near-zero residuals") {
      const GridPtr g = cap_square(33);
      const BarrierReport r = check_barrier(shifted_pair(g, kCap, 0.1),
                                            PMCFunction::constant(2.0), nullptr, 2, nullptr, cfg);
      CHECK(r.pass);
      CHECK(std::abs(r.worst_sub) <= r.tolerance);
      CHECK(r.allowance_constant == 1.0);
    }
    SUBCASE("failing pair") {
      const GridPtr g = torus(8);
      const BarrierReport r = check_barrier(constant_pair(g, -1, 1), PMCFunction::constant(1.0),
                                            nullptr, 2, nullptr, cfg);
      CHECK_FALSE(r.pass);
      CHECK(r.worst_super == -1.0);
    }
  }

  TEST_CASE("cutoff profile") {
    const CutoffProfile c = cutoff_profile(0.0, 1.0, -1.0, 3.0);
    CHECK(c(0.0) == 1.0);
    CHECK(c(0.7) == 1.0);
    CHECK(c.derivative(0.7) == 0.0);
    CHECK(c.a_prime() == -0.5);
    CHECK(c(-0.5) == 0.0);
    CHECK(c.derivative(-0.5) == 0.0);
    CHECK(c(-0.9) == 0.0);
    CHECK(c(2.5) == 0.0);
    CHECK(std::abs(c(-0.25) - 0.5) <= 1e-15);
    CHECK(std::abs(c.derivative(-0.25) - 1.875 / 0.5) <= 1e-12);
    CHECK(std::abs(c.derivative(1.5) + 1.875 / 1.0) <= 1e-12);
    for (double r = -1; r <= 3; r += 0.01) {
      CHECK(c(r) >= 0.0);
      CHECK(c(r) <= 1.0);
      const double fd = (c(r + 1e-7) - c(r - 1e-7)) / 2e-7;
      CHECK(std::abs(fd - c.derivative(r)) <= 1e-5);
    }
    CHECK_THROWS(cutoff_profile(1.0, 0.0, -1.0, 3.0));
    CHECK_THROWS(cutoff_profile(0.0, 1.0, 0.0, 3.0));
  }

  TEST_CASE("gamma selection") {
    const GridPtr g = torus(8);
    const CutoffProfile c = cutoff_profile(-1, 8, -2, 9);
    const WorkingBox inner = WorkingBox::over(*g, 0.0, 2 * std::numbers::pi);
    CHECK(gamma_for(PMCFunction::constant(0.0), c, inner, 9).gamma == 1.0);
    CHECK(gamma_for(parse_pmc("x1 + t"), c, inner, 9).gamma == 1.0);
    const GammaReport r = gamma_for(parse_pmc("0.5*sin(z)"), c, inner, 9);
    CHECK(std::abs(r.gamma - 1.525) <= 1e-12);
    CHECK(std::cos(r.worst_point.z) == 1.0);
    CHECK(gamma_certificate_min(parse_pmc("0.5*sin(z)"), c, r.gamma, inner, 9) >= 1.0);
  }

  TEST_CASE("inner solver examples") {
    SolveConfig cfg;
    const GridPtr g = torus(16);
    const WorkingBox box = WorkingBox::over(*g, -5, 5);
    SUBCASE("F = -z from 3") {
      const auto [u, r] =
          solve_inner({parse_pmc("-z"), ScalarField(g, 0.0), box}, ScalarField(g, 3.0), cfg);
      CHECK(sup_norm(u) <= 1e-10);
      CHECK(r.newton_steps <= 6);
      CHECK(r.converged);
    }
    SUBCASE("F = 1.7 - z") {
      const auto [u, r] =
          solve_inner({parse_pmc("1.7 - z"), ScalarField(g, 0.0), box}, ScalarField(g, 0.0), cfg);
      CHECK(sup_norm(u, ScalarField(g, 1.7)) <= 1e-10);
    }
    SUBCASE("non-monotone F is refused") {
      CHECK_THROWS_AS(
          solve_inner({parse_pmc("sin(z)"), ScalarField(g, 0.0), box}, ScalarField(g, 0.0), cfg),
          PreconditionError);
    }
  }

  TEST_CASE("inner solver on the cap") {
    SolveConfig cfg;
    for (int n : {17, 33}) {
      const GridPtr g = cap_square(n);
      const ScalarField cap = field_from_expr(g, kCap);
      const WorkingBox box = WorkingBox::over(*g, 0, 2);
      const auto [u, r] = solve_inner({PMCFunction::constant(2.0), cap, box},
                                      boundary_interpolant(cap), cfg);
      const double h = g->spacing(0);
      CHECK(sup_norm(u, cap) <= 5 * h * h);
      CHECK(interior_sup_norm(pmc_residual(u, PMCFunction::constant(2.0))) <= cfg.tol_inner);
    }
  }

  TEST_CASE("inner solver reports stagnation with the best iterate") {
    SolveConfig cfg;
    cfg.max_newton = 1;
    cfg.max_relaxation = 0;
    const GridPtr g = cap_square(17);
    const ScalarField cap = field_from_expr(g, kCap);
    try {
      solve_inner({PMCFunction::constant(2.0), cap, WorkingBox::over(*g, 0, 2)},
                  boundary_interpolant(cap), cfg);
      FAIL("expected a solver error");
    } catch (const SolverError& e) {
      CHECK(e.best_iterate.has_value());
      CHECK(e.residual_history.size() >= 2);
    }
  }

  TEST_CASE("pseudo-transient fallback converges when Newton is capped") {
    SolveConfig cfg;
    cfg.max_newton = 1;
    const GridPtr g = cap_square(17);
    const ScalarField cap = field_from_expr(g, kCap);
    const auto [u, r] = solve_inner({PMCFunction::constant(2.0), cap, WorkingBox::over(*g, 0, 2)},
                                    boundary_interpolant(cap), cfg);
    CHECK(r.relaxation_steps > 0);
    CHECK(r.converged);
  }

  TEST_CASE("boundary interpolant") {
    const GridPtr g = rectangle(9, 7, 0, 0, 1, 1);
    const ScalarField b = field_from_expr(g, "1 + 2*x1 - x2 + 3*x1*x2");
    const ScalarField i = boundary_interpolant(b);
    CHECK(sup_norm(i, b) <= 1e-14);
    const GridPtr t = torus(8);
    CHECK(sup_norm(boundary_interpolant(ScalarField(t, 0.3)), ScalarField(t, 0.3)) == 0.0);
  }

  TEST_CASE("outer iteration examples") {
    SolveConfig cfg;
    SUBCASE("H = -z between -1 and 1") {
      const GridPtr g = torus(16);
      const auto [v, r] =
          outer_iterate(parse_pmc("-z"), constant_pair(g, -1, 1), WorkingBox::over(*g, -2, 2), cfg);
      CHECK(sup_norm(v) <= 1e-7);
      CHECK(r.converged);
      CHECK(r.residual_bound_holds);
    }
    SUBCASE("minimal graph with zero trace") {
      const GridPtr g = rectangle(17, 17, 0, 0, 1, 1);
      ScalarField lo(g, -0.5), hi(g, 0.5);
      for (std::size_t p : g->boundary_nodes()) lo[p] = hi[p] = 0.0;
      const auto [v, r] = outer_iterate(PMCFunction::constant(0.0), BarrierPair::make(lo, hi),
                                        WorkingBox::over(*g, -1, 1), cfg);
      CHECK(sup_norm(v) <= 1e-8);
      CHECK(r.gamma == 1.0);
    }
  }

  TEST_CASE("outer iterates are monotone and confined") {
    SolveConfig cfg;
    const GridPtr g = torus(16);
    const auto [v, r] = outer_iterate(parse_pmc("0.5*sin(z) + 0.1*sin(2*pi*x1)"),
                                      constant_pair(g, 0.25, std::numbers::pi + 0.25),
                                      WorkingBox::over(*g, -1.5, 5), cfg);
    CHECK(r.converged);
    CHECK(r.final_residual <= 1e-6);
    CHECK(r.final_residual <= r.residual_bound);
    for (double m : r.min_increment_history) CHECK(m >= -1e-9);
    for (double c : r.confinement_violation) CHECK(c <= 1e-9);
    CHECK(r.gamma_certificate_min >= 1.0);
    CHECK(r.contraction_rate > 0.0);
    CHECK(r.contraction_rate < 1.0);
    CHECK(r.inner_newton_counts.size() == static_cast<std::size_t>(r.outer_iterations));
    CHECK(area_functional(v) >= std::max(g->volume(), total_variation(v)) - 1e-12);
  }

  TEST_CASE("outer iteration gives up with a partial report") {
    SolveConfig cfg;
    cfg.max_outer = 2;
    const GridPtr g = torus(8);
    try {
      outer_iterate(parse_pmc("0.5*sin(z)"), constant_pair(g, 0.25, std::numbers::pi + 0.25),
                    WorkingBox::over(*g, -1.5, 5), cfg);
      FAIL("expected a solver error");
    } catch (const SolverError& e) {
      REQUIRE(e.partial);
      CHECK(e.partial->outer_iterations == 2);
      CHECK(std::string(e.what()).find("contraction rate") != std::string::npos);
      CHECK(e.best_iterate.has_value());
    }
  }

  TEST_CASE("explicit gamma below the certificate is refused") {
    SolveConfig cfg;
    cfg.gamma = 1.0;
    const GridPtr g = torus(8);
    CHECK_THROWS_AS(outer_iterate(parse_pmc("0.5*sin(z)"),
                                  constant_pair(g, 0.25, std::numbers::pi + 0.25),
                                  WorkingBox::over(*g, -1.5, 5), cfg),
                    PreconditionError);
  }

  TEST_CASE("translation covariance of the outer iteration for z-independent H") {
    SolveConfig cfg;
    const GridPtr g = cap_square(17);
    const WorkingBox box = WorkingBox::over(*g, -1, 3);
    const PMCFunction h = PMCFunction::constant(2.0);
    const auto [v0, r0] = outer_iterate(h, shifted_pair(g, kCap, 0.1), box, cfg);
    const auto [v1, r1] =
        outer_iterate(h, shifted_pair(g, "sqrt(1 - x1^2 - x2^2) + 0.25", 0.1), box, cfg);
    CHECK(r0.converged);
    CHECK(r1.converged);
    ScalarField shifted = v0;
    for (std::size_t p = 0; p < v0.size(); ++p) shifted[p] += 0.25;
    CHECK(sup_norm(shifted, v1) <= 1e-6);
    CHECK(sup_norm(pmc_residual(shifted, h), pmc_residual(v0, h)) <= 1e-12);
  }

  TEST_CASE("barriers from a bounded perturbation") {
    SolveConfig cfg;
    const GridPtr g = rectangle(17, 17, 0, 0, 1, 1);
    const WorkingBox box = WorkingBox::over(*g, -1, 1);
    const PMCFunction zero("0", [](const PMCPoint&) { return 0.0; }, {}, false);
    SUBCASE("phi = 0 gives the degenerate ordered pair") {
      double alpha = -1;
      const BarrierPair b =
          barriers_from_phi(zero, PMCFunction::constant(0.0), ScalarField(g, 0.0), box, cfg, &alpha);
      CHECK(alpha == 0.0);
      CHECK(sup_norm(b.u1) <= 1e-12);
      CHECK(sup_norm(b.u0) <= 1e-12);
    }
    SUBCASE("phi = 0.2 cos z") {
      double alpha = 0;
      const PMCFunction phi = parse_pmc("0.2*cos(z)");
      const BarrierPair b = barriers_from_phi(zero, phi, ScalarField(g, 0.0), box, cfg, &alpha);
      CHECK(std::abs(alpha - 0.21) <= 1e-12);
      for (std::size_t p : g->interior_nodes()) {
        CHECK(b.u1[p] < 0.0);
        CHECK(b.u0[p] > 0.0);
      }
      const PMCFunction h = sum_with_t_weight(PMCFunction::constant(0.0), phi);
      CHECK(check_barrier(b, h, nullptr, 2, &box, cfg).pass);
    }
    SUBCASE("phi = 0.2 around the cap trace") {
      const GridPtr c = cap_square(17);
      const ScalarField cap = field_from_expr(c, kCap);
      const BarrierPair b = barriers_from_phi(zero, PMCFunction::constant(0.2), cap,
                                              WorkingBox::over(*c, -1, 3), cfg);
      for (std::size_t p : c->interior_nodes()) CHECK(b.u1[p] < b.u0[p]);
    }
    SUBCASE("z-dependent base is rejected") {
      CHECK_THROWS(barriers_from_phi(parse_pmc("-z"), PMCFunction::constant(0.1),
                                     ScalarField(g, 0.0), box, cfg));
    }
    SUBCASE("periodic grids are rejected") {
      const GridPtr t = torus(8);
      CHECK_THROWS(barriers_from_phi(zero, PMCFunction::constant(0.1), ScalarField(t, 0.0),
                                     WorkingBox::over(*t, -1, 1), cfg));
    }
  }

  TEST_CASE("quasi-decreasing solve") {
    SolveConfig cfg;
    const GridPtr g = torus(16);
    const BarrierBuilder refine = [](const GridPtr& fine) { return constant_pair(fine, -1, 1); };
    const auto [v, r] = solve_quasi({parse_pmc("-z"), parse_pmc("0.3")}, constant_pair(g, -1, 1),
                                    WorkingBox::over(*g, -2, 2), cfg, &refine);
    REQUIRE(r.quasi);
    CHECK(r.quasi->min_theta >= 0.9);
    CHECK(r.quasi->graphical);
    CHECK(r.quasi->refinement_checked);
    CHECK(r.quasi->refinement_stable);
    CHECK(std::abs(v.min() - 0.3) <= 1e-7);

    CHECK_THROWS_AS(solve_quasi({parse_pmc("z"), parse_pmc("0")}, constant_pair(g, -1, 1),
                                WorkingBox::over(*g, -2, 2), cfg),
                    PreconditionError);
  }

  TEST_CASE("minimal quasi problem") {
    SolveConfig cfg;
    const GridPtr g = rectangle(9, 9, 0, 0, 1, 1);
    ScalarField lo(g, -0.5), hi(g, 0.5);
    for (std::size_t p : g->boundary_nodes()) lo[p] = hi[p] = 0.0;
    const auto [v, r] = solve_quasi({PMCFunction::constant(0.0), PMCFunction::constant(0.0)},
                                    BarrierPair::make(lo, hi), WorkingBox::over(*g, -1, 1), cfg);
    CHECK(sup_norm(v) <= 1e-8);
    CHECK(r.quasi->min_theta == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("z-dependent quasi problem carries a certificate") {
    SolveConfig cfg;
    const GridPtr g = torus(16);
    const BarrierBuilder refine = [](const GridPtr& fine) { return constant_pair(fine, -1, 2); };
    const auto [v, r] =
        solve_quasi({parse_pmc("exp(-z) - 1"), parse_pmc("0.5*sin(2*pi*x1)")}, constant_pair(g, -1, 2),
                    WorkingBox::over(*g, -2, 3), cfg, &refine);
    REQUIRE(r.quasi);
    CHECK(r.quasi->min_theta > 0.0);
    CHECK(r.quasi->refinement_checked);
    CHECK(std::isfinite(r.quasi->jacobi_residual));
  }
}
