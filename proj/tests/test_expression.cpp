#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"

#include "pmc/expression.hpp"

using pmc::Expression;
using pmc::ParseError;

namespace {

const std::vector<std::string> kXY{"x", "y"};

double eval(const std::string& text, double x = 0.0, double y = 0.0) {
  const std::array<double, 2> v{x, y};
  return Expression::parse(text, kXY)(v);
}

std::size_t error_position(const std::string& text) {
  try {
    Expression::parse(text, kXY);
  } catch (const ParseError& e) {
    return e.position();
  }
  return 0;
}

}  // namespace

TEST_SUITE("expression") {
  TEST_CASE("precedence and associativity") {
    CHECK(eval("1 + 2*3") == 7.0);
    CHECK(eval("(1 + 2)*3") == 9.0);
    CHECK(eval("8/4/2") == 1.0);
    CHECK(eval("2^3^2") == 512.0);
    CHECK(eval("-x^2", 3.0) == -9.0);
    CHECK(eval("2*-x", 3.0) == -6.0);
    CHECK(eval("1.5e2 + 2E-1") == doctest::Approx(150.2));
    CHECK(eval(".5") == 0.5);
  }

  TEST_CASE("functions and named constants") {
    CHECK(eval("sin(pi/2)") == doctest::Approx(1.0));
    CHECK(eval("ln(e)") == doctest::Approx(1.0));
    CHECK(eval("min(x, y)", 2.0, -1.0) == -1.0);
    CHECK(eval("max(x, y)", 2.0, -1.0) == 2.0);
    CHECK(eval("abs(x)", -4.0) == 4.0);
    CHECK(eval("tanh(0) + sqrt(4) + exp(0) + tan(0) + cos(0)") == 4.0);
  }

  TEST_CASE("variables shadow named constants") {
    const std::vector<std::string> vars{"e"};
    const std::array<double, 1> v{5.0};
    CHECK(Expression::parse("e + 1", vars)(v) == 6.0);
  }

  TEST_CASE("errors carry a 1-based position") {
    CHECK(error_position("foo(x)") == 1);
    CHECK(error_position("x + q") == 5);
    CHECK(error_position("x +") == 4);
    CHECK(error_position("(x") == 3);
    CHECK(error_position("x $ y") == 3);
    CHECK(error_position("min(x)") > 0);
    CHECK_THROWS_AS(Expression::parse("", kXY), ParseError);
  }

  TEST_CASE("symbolic derivatives match central differences") {
    const char* cases[] = {"x*y + sin(x)*exp(y)", "x^3 - 2*y^2", "ln(1 + x^2) / (2 + cos(y))",
                           "sqrt(1 + x^2 + y^2)", "tanh(x*y)", "tan(0.3*x) + x^y",
                           "min(x, y) + max(x*x, y)", "abs(x - y)"};
    const double h = 1e-6;
    for (const char* text : cases) {
      const Expression f = Expression::parse(text, kXY);
      for (double x : {0.3, 0.7, 1.3})
        for (double y : {0.2, 0.9}) {
          for (std::size_t slot = 0; slot < 2; ++slot) {
            std::array<double, 2> p{x, y}, m{x, y};
            p[slot] += h;
            m[slot] -= h;
            const double fd = (f(p) - f(m)) / (2 * h);
            const std::array<double, 2> at{x, y};
            CHECK_MESSAGE(std::abs(f.derivative(slot)(at) - fd) <= 1e-6 * (1 + std::abs(fd)),
                          text);
          }
        }
    }
  }

  TEST_CASE("constant detection and dependence") {
    const Expression f = Expression::parse("2*3 + 0*x", kXY);
    CHECK(f.is_constant());
    CHECK_FALSE(f.depends_on(0));
    const Expression g = Expression::parse("x*y", kXY);
    CHECK(g.depends_on(1));
    CHECK(g.derivative(0).depends_on(1));
    CHECK_FALSE(g.derivative(0).depends_on(0));
  }

  TEST_CASE("evaluation is deterministic") {
    const Expression f = Expression::parse("0.5*sin(x) + 0.1*sin(2*pi*y)", kXY);
    const std::array<double, 2> v{0.123, 0.456};
    const double a = f(v);
    for (int k = 0; k < 10; ++k) CHECK(f(v) == a);
  }
}
