#pragma once

// Conformal product structure e^{2f}(sigma + dr^2) over a flat base:
// conformal mean curvature of graphs, the ambient weighted-divergence route
// to the same quantity, transformation of PMC functions to the product
// metric, warped-product reparametrisation, and the tilt / second
// fundamental form / Jacobi quantities of a graph.

#include <functional>
#include <string>
#include <string_view>

#include "pmc/expression.hpp"
#include "pmc/grid.hpp"
#include "pmc/pmc_function.hpp"

namespace pmc {

enum class DerivativeMode { analytic, finite_difference };

class ConformalFactor {
 public:
  struct Derivatives {
    double f = 0.0;
    Point Df{0.0, 0.0};  // spatial gradient at fixed r
    double fr = 0.0;
    double frr = 0.0;
    Point Dfr{0.0, 0.0};  // d/dr of the spatial gradient
  };
  using ValueFn = std::function<double(const Point&, double)>;
  using DerivativesFn = std::function<Derivatives(const Point&, double)>;

  ConformalFactor() = default;
  /// Without `analytic` the factor is finite-difference only.
  ConformalFactor(std::string provenance, ValueFn f, DerivativesFn analytic = {});

  /// f == 0 (the product metric).
  static ConformalFactor zero();
  /// Expression over x1, x2, r with symbolic derivatives.
  static ConformalFactor from_expression(std::string_view text);

  double value(const Point& x, double r) const { return f_(x, r); }
  /// Derivatives according to mode(); first derivatives in finite-difference
  /// mode use central differences with step 1e-6, second ones step 1e-4.
  Derivatives derivatives(const Point& x, double r) const;
  Derivatives finite_difference(const Point& x, double r) const;

  DerivativeMode mode() const { return mode_; }
  /// Switching to analytic mode requires analytic derivatives.
  void set_mode(DerivativeMode m);
  bool is_zero() const { return zero_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::string provenance_;
  ValueFn f_;
  DerivativesFn analytic_;
  DerivativeMode mode_ = DerivativeMode::finite_difference;
  bool zero_ = false;
};

/// Warped profile h(r) > 0 for the metric h^2(r) sigma + dr^2.
struct WarpedProfile {
  Expression h;   // over r
  Expression dh;  // h'
  Expression ddh; // h''
  int quadrature_subintervals = 1024;

  static WarpedProfile from_expression(std::string_view text);
  double operator()(double r) const;
};

struct ConformalReparametrization {
  double r_lo = 0.0;
  double r_hi = 0.0;
  double s_max = 0.0;  // s-range is [0, s_max]
  std::function<double(double)> s_of_r;
  std::function<double(double)> r_of_s;
  ConformalFactor factor;  // f(x, s) = ln h(r(s))
};

/// ds = dr / h(r), s(r_lo) = 0, f(s) = ln h(r(s)). s(r) by adaptive
/// Gauss-Kronrod quadrature, r(s) by bisection to 1e-10.
ConformalReparametrization warped_to_conformal(const WarpedProfile& profile, double r_lo,
                                               double r_hi);

/// Mean curvature in e^{2f}(sigma + dr^2) of the graph of u with respect to
/// the upward normal:
///   e^{-f} ( H(u) + n (-<Df, Du> + f_r) / omega ).
/// Zero on dirichlet boundary nodes.
ScalarField conformal_mean_curvature(const ScalarField& u, const ConformalFactor& f, int n);

/// Same quantity from the volume-form identity: the product-metric
/// divergence of e^{nf} nu, with nu the upward unit normal extended
/// vertically, multiplied by e^{-(n+1)f}.
ScalarField divergence_oracle(const ScalarField& u, const ConformalFactor& f, int n);

/// H'(x,r,Y,t) = e^{f} H(x,r,Y,t) - n (<Df, Y> + f_r t): the graph has
/// conformal mean curvature H iff it has product mean curvature H'.
PMCFunction conformal_transform_pmc(const PMCFunction& h, const ConformalFactor& f, int n);
/// Inverse of conformal_transform_pmc.
PMCFunction conformal_inverse_transform_pmc(const PMCFunction& hprime,
                                            const ConformalFactor& f, int n);

/// Theta = <nu, e_r> = 1/sqrt(1 + |Du|^2).
ScalarField theta_field(const ScalarField& u);

/// |A|^2 = tr((g^{-1} D^2u)^2) / omega^2 with g^{ij} = delta_ij - u_i u_j/omega^2.
/// Zero on dirichlet boundary nodes.
ScalarField second_fundamental_norm(const ScalarField& u);

/// Lap_S Theta + |A|^2 Theta - <grad_S H, e_r> for H evaluated along the
/// graph (flat base, so the ambient Ricci term vanishes). Zero on dirichlet
/// boundary nodes.
ScalarField jacobi_residual(const ScalarField& u, const PMCFunction& h);

/// H(x, u, -Du/omega, 1/omega) at every node.
ScalarField compose_along_graph(const ScalarField& u, const PMCFunction& h);

}  // namespace pmc
