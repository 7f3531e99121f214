#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "pmc/calculus.hpp"
#include "pmc/pmc_function.hpp"
#include "pmc/residual.hpp"
#include "support.hpp"

using namespace pmc;
using namespace pmc::testing;

namespace {

WorkingBox box1(double lo, double hi) {
  WorkingBox b;
  b.z_lo = lo;
  b.z_hi = hi;
  b.dimension = 2;
  b.x_lo = {0.0, 0.0};
  b.x_hi = {1.0, 1.0};
  return b;
}

PMCPoint random_point(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  PMCPoint p;
  p.x = {0.5 * (u(rng) + 1), 0.5 * (u(rng) + 1)};
  p.z = u(rng) * 2;
  do {
    p.Y = {u(rng), u(rng)};
    p.t = u(rng);
  } while (p.Y[0] * p.Y[0] + p.Y[1] * p.Y[1] + p.t * p.t > 1.0);
  return p;
}

double cap_residual_error(int n) {
  const GridPtr g = cap_square(n);
  return shared_node_sup(pmc_residual(field_from_expr(g, kCap), PMCFunction::constant(2.0)), 32);
}

}  // namespace

TEST_SUITE("pmc") {
  TEST_CASE("parsing and evaluation") {
    const PMCFunction h = parse_pmc("-z");
    PMCPoint p;
    p.z = 0.4;
    CHECK(h(p) == -0.4);
    CHECK(h.partials(p).dz == -1.0);

    const PMCFunction s = parse_pmc("0.5*sin(z)+0.1*sin(6.283185307179586*x1)");
    PMCPoint q;
    q.x = {0.25, 0.0};
    CHECK(std::abs(s(q) - 0.1) <= 1e-15);

    try {
      parse_pmc("foo(z)");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.position() == 1);
    }
  }

  TEST_CASE("non-finite values name the point") {
    const PMCFunction h = parse_pmc("1/z");
    PMCPoint p;
    p.z = 0.0;
    CHECK_THROWS_WITH_AS(h(p), doctest::Contains("z=0"), EvaluationError);
  }

  TEST_CASE("symbolic partials agree with finite differences") {
    std::mt19937 rng(2024);
    const char* builtins[] = {"-z", "0.5*sin(z) + 0.1*sin(2*pi*x1)", "x1*t + y1*y2 - z^2",
                              "exp(-z) - 1 + sin(x1)*t", "sqrt(2 + y1) * cos(z*x2)",
                              "tanh(z + y2) * (1 + t^2)"};
    for (const char* text : builtins) {
      const PMCFunction h = parse_pmc(text);
      for (int k = 0; k < 1000; ++k) {
        const PMCPoint p = random_point(rng);
        const PMCPartials a = h.partials(p);
        const PMCPartials f = h.finite_difference_partials(p);
        CHECK(std::abs(a.dz - f.dz) <= 1e-5);
        CHECK(std::abs(a.dt - f.dt) <= 1e-5);
        CHECK(std::abs(a.dY[0] - f.dY[0]) <= 1e-5);
        CHECK(std::abs(a.dY[1] - f.dY[1]) <= 1e-5);
      }
    }
  }

  TEST_CASE("quasi decomposition reconstructs the composite") {
    std::mt19937 rng(5);
    const QuasiDecomposition d{parse_pmc("exp(-z) - 1"), parse_pmc("sin(x1)")};
    const PMCFunction composite = parse_pmc("exp(-z) - 1 + t*sin(x1)");
    const PMCFunction h = d.composite();
    for (int k = 0; k < 1000; ++k) {
      const PMCPoint p = random_point(rng);
      CHECK(std::abs(h(p) - composite(p)) <= 1e-10);
    }
  }

  TEST_CASE("monotone check") {
    const SampleReport a = check_monotone(parse_pmc("-z"), box1(-1, 1), 5);
    CHECK(a.pass);
    CHECK(a.worst_value == -1.0);

    const SampleReport b =
        check_monotone(parse_pmc("sin(z)"), box1(0.25, std::numbers::pi + 0.25), 9);
    CHECK_FALSE(b.pass);
    CHECK(std::abs(b.worst_value - std::cos(0.25)) <= 1e-12);
    CHECK(b.worst_point.z == 0.25);

    const SampleReport c = check_monotone(parse_pmc("x1*t"), box1(-1, 1), 5);
    CHECK(c.pass);
    CHECK(c.worst_value == 0.0);
  }

  TEST_CASE("lattice visits corners and stays in the unit ball") {
    bool low = false, high = false;
    std::size_t count = 0;
    for_each_lattice_point(box1(-2, 3), 5, [&](const PMCPoint& p) {
      ++count;
      CHECK(p.Y[0] * p.Y[0] + p.Y[1] * p.Y[1] + p.t * p.t <= 1.0 + 1e-15);
      low = low || (p.z == -2 && p.x[0] == 0 && p.x[1] == 0);
      high = high || (p.z == 3 && p.x[0] == 1 && p.x[1] == 1);
    });
    CHECK(low);
    CHECK(high);
    CHECK(count > 0);
  }

  TEST_CASE("quasi-decreasing check") {
    CHECK(check_quasi_decreasing({parse_pmc("-z"), parse_pmc("0.3")}, box1(-1, 1), 5).pass);
    const SampleReport bad =
        check_quasi_decreasing({parse_pmc("z"), parse_pmc("0")}, box1(-1, 1), 5);
    CHECK_FALSE(bad.pass);
    CHECK(bad.worst_value == 1.0);
    const SampleReport e =
        check_quasi_decreasing({parse_pmc("exp(-z)"), parse_pmc("sin(x1)")}, box1(0, 2), 7);
    CHECK(e.pass);
    CHECK(std::abs(e.worst_value + std::exp(-2.0)) <= 1e-15);
  }

  TEST_CASE("residual examples") {
    const GridPtr g = torus(16);
    CHECK(sup_norm(pmc_residual(ScalarField(g, 0.7), PMCFunction::constant(0.0))) == 0.0);
    CHECK(sup_norm(pmc_residual(ScalarField(g, 0.0), parse_pmc("-z"))) == 0.0);

    const double e33 = cap_residual_error(33), e65 = cap_residual_error(65);
    CHECK(order(e33, e65) >= 1.8);
  }

  TEST_CASE("residual is zero on the dirichlet boundary") {
    const GridPtr g = cap_square(9);
    const ScalarField r = pmc_residual(field_from_expr(g, kCap), PMCFunction::constant(5.0));
    for (std::size_t p : g->boundary_nodes()) CHECK(r[p] == 0.0);
  }

  TEST_CASE("residual refuses fields outside the box") {
    const GridPtr g = torus(8);
    const WorkingBox b = WorkingBox::over(*g, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(pmc_residual(ScalarField(g, 2.0), parse_pmc("0"), nullptr, 0, &b),
                         doctest::Contains("leaves the working box"), BoxError);
  }

  TEST_CASE("z-translation covariance for z-independent H") {
    const GridPtr g = torus(16);
    ScalarField u = field_from_expr(g, "0.25*sin(2*pi*x1) + 0.125*cos(2*pi*x2)");
    for (std::size_t p = 0; p < u.size(); ++p) u[p] = std::round(u[p] * 4096) / 4096;
    ScalarField v = u;
    for (std::size_t p = 0; p < u.size(); ++p) v[p] += 0.5;
    const PMCFunction h = parse_pmc("0.1*sin(2*pi*x1) + 0.2*t + y1");
    const ScalarField ru = pmc_residual(u, h), rv = pmc_residual(v, h);
    for (std::size_t p = 0; p < u.size(); ++p) CHECK(ru[p] == rv[p]);
  }

  TEST_CASE("working box validation") {
    WorkingBox b = box1(1, 0);
    CHECK_THROWS(b.validate());
  }
}
