#include "pmc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pmc/calculus.hpp"

namespace pmc {

namespace {

constexpr double kFirstStep = 1e-6;
constexpr double kSecondStep = 1e-4;

std::string node_label(const BaseGrid& g, std::size_t p) {
  const Point x = g.position(p);
  char buf[128];
  std::snprintf(buf, sizeof buf, "node %zu at x=(%.17g,%.17g)", p, x[0], x[1]);
  return buf;
}

}  // namespace

ConformalFactor::ConformalFactor(std::string provenance, ValueFn f, DerivativesFn analytic)
    : provenance_(std::move(provenance)), f_(std::move(f)), analytic_(std::move(analytic)) {
  mode_ = analytic_ ? DerivativeMode::analytic : DerivativeMode::finite_difference;
}

ConformalFactor ConformalFactor::zero() {
  ConformalFactor c(
      "0", [](const Point&, double) { return 0.0; },
      [](const Point&, double) { return Derivatives{}; });
  c.zero_ = true;
  return c;
}

ConformalFactor ConformalFactor::from_expression(std::string_view text) {
  static const std::vector<std::string> vars{"x1", "x2", "r"};
  struct Compiled {
    Expression f, f1, f2, fr, frr, f1r, f2r;
  };
  auto c = std::make_shared<Compiled>();
  c->f = Expression::parse(text, vars);
  c->f1 = c->f.derivative(0);
  c->f2 = c->f.derivative(1);
  c->fr = c->f.derivative(2);
  c->frr = c->fr.derivative(2);
  c->f1r = c->f1.derivative(2);
  c->f2r = c->f2.derivative(2);
  ConformalFactor out(
      std::string(text),
      [c](const Point& x, double r) {
        const std::array<double, 3> a{x[0], x[1], r};
        return c->f(a);
      },
      [c](const Point& x, double r) {
        const std::array<double, 3> a{x[0], x[1], r};
        Derivatives d;
        d.f = c->f(a);
        d.Df = {c->f1(a), c->f2(a)};
        d.fr = c->fr(a);
        d.frr = c->frr(a);
        d.Dfr = {c->f1r(a), c->f2r(a)};
        return d;
      });
  out.zero_ = c->f.is_constant() && c->f(std::array<double, 3>{0, 0, 0}) == 0.0;
  return out;
}

ConformalFactor::Derivatives ConformalFactor::finite_difference(const Point& x,
                                                                double r) const {
  Derivatives d;
  d.f = f_(x, r);
  auto dr = [&](const Point& y, double rr, double h) {
    return (f_(y, rr + h) - f_(y, rr - h)) / (2.0 * h);
  };
  auto dx = [&](const Point& y, double rr, int k, double h) {
    Point a = y, b = y;
    a[k] += h;
    b[k] -= h;
    return (f_(a, rr) - f_(b, rr)) / (2.0 * h);
  };
  d.fr = dr(x, r, kFirstStep);
  d.Df = {dx(x, r, 0, kFirstStep), dx(x, r, 1, kFirstStep)};
  d.frr = (f_(x, r + kSecondStep) - 2.0 * d.f + f_(x, r - kSecondStep)) /
          (kSecondStep * kSecondStep);
  for (int k = 0; k < 2; ++k)
    d.Dfr[k] = (dx(x, r + kSecondStep, k, kSecondStep) - dx(x, r - kSecondStep, k, kSecondStep)) /
               (2.0 * kSecondStep);
  return d;
}

ConformalFactor::Derivatives ConformalFactor::derivatives(const Point& x, double r) const {
  if (mode_ == DerivativeMode::analytic) return analytic_(x, r);
  return finite_difference(x, r);
}

void ConformalFactor::set_mode(DerivativeMode m) {
  if (m == DerivativeMode::analytic && !analytic_)
    throw std::invalid_argument("conformal factor '" + provenance_ +
                                "' has no analytic derivatives");
  mode_ = m;
}

WarpedProfile WarpedProfile::from_expression(std::string_view text) {
  static const std::vector<std::string> vars{"r"};
  WarpedProfile p;
  p.h = Expression::parse(text, vars);
  p.dh = p.h.derivative(0);
  p.ddh = p.dh.derivative(0);
  return p;
}

double WarpedProfile::operator()(double r) const {
  const std::array<double, 1> a{r};
  return h(a);
}

ConformalReparametrization warped_to_conformal(const WarpedProfile& profile, double r_lo,
                                               double r_hi) {
  if (!(r_lo < r_hi)) throw std::invalid_argument("warped interval needs r_lo < r_hi");
  const int m = std::max(profile.quadrature_subintervals, 1);

  auto inv_h = [profile](double r) {
    const double h = profile(r);
    if (!(h > 0.0) || !std::isfinite(h)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "warped profile h(r) must be positive, h(%.17g) = %.17g",
                    r, h);
      throw std::domain_error(buf);
    }
    return 1.0 / h;
  };
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  // Boost's error estimate has an absolute floor near 1e-11, so tighter
  // requests, or adaptive calls on very short pieces, recurse to full depth.
  auto integral = [inv_h](double a, double b) {
    if (a == b) return 0.0;
    return GK::integrate(inv_h, a, b, 15, 1e-12);
  };
  // a piece of one setup subinterval: a single 15-point rule
  auto partial = [inv_h](double a, double b) {
    if (a == b) return 0.0;
    return GK::integrate(inv_h, a, b, 0, 0.0);
  };

  auto nodes = std::make_shared<std::vector<double>>(m + 1);
  auto cumulative = std::make_shared<std::vector<double>>(m + 1, 0.0);
  for (int k = 0; k <= m; ++k)
    (*nodes)[k] = k == m ? r_hi : r_lo + (r_hi - r_lo) * static_cast<double>(k) / m;
  for (int k = 0; k <= m; ++k) inv_h((*nodes)[k]);
  for (int k = 1; k <= m; ++k)
    (*cumulative)[k] = (*cumulative)[k - 1] + integral((*nodes)[k - 1], (*nodes)[k]);

  auto s_of_r = [nodes, cumulative, integral, partial, r_lo, r_hi, m](double r) {
    if (r <= r_lo) return -integral(r, r_lo);
    if (r >= r_hi) return cumulative->back() + integral(r_hi, r);
    const auto it = std::upper_bound(nodes->begin(), nodes->end(), r);
    const auto k = std::min<std::ptrdiff_t>(std::distance(nodes->begin(), it) - 1, m - 1);
    return (*cumulative)[k] + partial((*nodes)[k], r);
  };

  const double s_max = cumulative->back();
  auto r_of_s = [nodes, cumulative, s_of_r, s_max, m](double s) {
    if (s < 0.0 || s > s_max) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "s = %.17g outside the reparametrised range [0, %.17g]",
                    s, s_max);
      throw std::domain_error(buf);
    }
    const auto it = std::upper_bound(cumulative->begin(), cumulative->end(), s);
    const auto k = std::clamp<std::ptrdiff_t>(std::distance(cumulative->begin(), it) - 1, 0,
                                              m - 1);
    double lo = (*nodes)[k];
    double hi = (*nodes)[k + 1];
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      if (s_of_r(mid) < s)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  ConformalReparametrization out;
  out.r_lo = r_lo;
  out.r_hi = r_hi;
  out.s_max = s_max;
  out.s_of_r = s_of_r;
  out.r_of_s = r_of_s;
  out.factor = ConformalFactor(
      "ln h(r(s)) for h = " + profile.h.text(),
      [profile, r_of_s](const Point&, double s) { return std::log(profile(r_of_s(s))); },
      [profile, r_of_s](const Point&, double s) {
        const double r = r_of_s(s);
        const std::array<double, 1> a{r};
        ConformalFactor::Derivatives d;
        const double h = profile.h(a);
        d.f = std::log(h);
        d.fr = profile.dh(a);         // df/ds = h'(r) since dr/ds = h
        d.frr = profile.ddh(a) * h;   // d/ds h'(r(s)) = h''(r) h(r)
        return d;
      });
  return out;
}

ScalarField conformal_mean_curvature(const ScalarField& u, const ConformalFactor& f, int n) {
  const BaseGrid& g = u.grid();
  ScalarField out = mean_curvature_product(u);
  if (f.is_zero()) return out;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Point x = g.position(p);
    const auto d = f.derivatives(x, u[p]);
    if (!std::isfinite(d.f) || !std::isfinite(d.fr) || !std::isfinite(d.Df[0]) ||
        !std::isfinite(d.Df[1]))
      throw EvaluationError("conformal factor '" + f.provenance() +
                            "' is not finite along the graph at " + node_label(g, p));
    const Point Du = node_gradient_at(u, p);
    const double omega = std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
    const double normal_part = (-(d.Df[0] * Du[0] + d.Df[1] * Du[1]) + d.fr) / omega;
    out[p] = std::exp(-d.f) * (out[p] + n * normal_part);
  }
  return out;
}

ScalarField divergence_oracle(const ScalarField& u, const ConformalFactor& f, int n) {
  const BaseGrid& g = u.grid();
  ScalarField out(u.grid_ptr());
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const double r = u[p];
    const Point x = g.position(p);
    const double fp = f.value(x, r);
    if (!std::isfinite(fp))
      throw EvaluationError("conformal factor '" + f.provenance() +
                            "' is not finite along the graph at " + node_label(g, p));
    double div = 0.0;
    for (int a = 0; a < g.dimension(); ++a) {
      // horizontal part of e^{nf} nu on the two faces, at the node's height r
      auto face_flux = [&](std::size_t lower) {
        const Point G = face_gradient_at(u, lower, a);
        const double omega = std::sqrt(1.0 + G[0] * G[0] + G[1] * G[1]);
        return std::exp(n * f.value(g.face_center(lower, a), r)) * (-G[a] / omega);
      };
      div += (face_flux(p) - face_flux(g.neighbor(p, a, -1))) / g.spacing(a);
    }
    const Point Du = node_gradient_at(u, p);
    const double omega = std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
    // vertical part: d/dr (e^{nf}) / omega
    div += n * f.derivatives(x, r).fr * std::exp(n * fp) / omega;
    out[p] = std::exp(-(n + 1) * fp) * div;
  }
  return out;
}

PMCFunction conformal_transform_pmc(const PMCFunction& h, const ConformalFactor& f, int n) {
  if (f.is_zero()) return h;
  return PMCFunction(
      "conformal(" + h.provenance() + "; f=" + f.provenance() + ")",
      [h, f, n](const PMCPoint& p) {
        const auto d = f.derivatives(p.x, p.z);
        return std::exp(d.f) * h(p) -
               n * (d.Df[0] * p.Y[0] + d.Df[1] * p.Y[1] + d.fr * p.t);
      },
      [h, f, n](const PMCPoint& p) {
        const auto d = f.derivatives(p.x, p.z);
        const PMCPartials hp = h.partials(p);
        const double ef = std::exp(d.f);
        PMCPartials out;
        out.value = ef * hp.value - n * (d.Df[0] * p.Y[0] + d.Df[1] * p.Y[1] + d.fr * p.t);
        out.dz = ef * (d.fr * hp.value + hp.dz) -
                 n * (d.Dfr[0] * p.Y[0] + d.Dfr[1] * p.Y[1] + d.frr * p.t);
        out.dY = {ef * hp.dY[0] - n * d.Df[0], ef * hp.dY[1] - n * d.Df[1]};
        out.dt = ef * hp.dt - n * d.fr;
        return out;
      });
}

PMCFunction conformal_inverse_transform_pmc(const PMCFunction& hprime,
                                            const ConformalFactor& f, int n) {
  if (f.is_zero()) return hprime;
  return PMCFunction(
      "conformal_inverse(" + hprime.provenance() + "; f=" + f.provenance() + ")",
      [hprime, f, n](const PMCPoint& p) {
        const auto d = f.derivatives(p.x, p.z);
        return std::exp(-d.f) *
               (hprime(p) + n * (d.Df[0] * p.Y[0] + d.Df[1] * p.Y[1] + d.fr * p.t));
      },
      [hprime, f, n](const PMCPoint& p) {
        const auto d = f.derivatives(p.x, p.z);
        const PMCPartials hp = hprime.partials(p);
        const double emf = std::exp(-d.f);
        const double inner = hp.value + n * (d.Df[0] * p.Y[0] + d.Df[1] * p.Y[1] + d.fr * p.t);
        PMCPartials out;
        out.value = emf * inner;
        out.dz = emf * (-d.fr * inner + hp.dz +
                        n * (d.Dfr[0] * p.Y[0] + d.Dfr[1] * p.Y[1] + d.frr * p.t));
        out.dY = {emf * (hp.dY[0] + n * d.Df[0]), emf * (hp.dY[1] + n * d.Df[1])};
        out.dt = emf * (hp.dt + n * d.fr);
        return out;
      });
}

ScalarField theta_field(const ScalarField& u) {
  ScalarField out(u.grid_ptr());
  for (std::size_t p = 0; p < u.size(); ++p) {
    const Point Du = node_gradient_at(u, p);
    out[p] = 1.0 / std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
  }
  return out;
}

namespace {

// Centered second differences; requires an interior node.
std::array<double, 4> hessian_at(const ScalarField& u, std::size_t p) {
  const BaseGrid& g = u.grid();
  std::array<double, 4> H{0.0, 0.0, 0.0, 0.0};
  for (int a = 0; a < g.dimension(); ++a) {
    const double h = g.spacing(a);
    H[3 * a] = (u[g.neighbor(p, a, 1)] - 2.0 * u[p] + u[g.neighbor(p, a, -1)]) / (h * h);
  }
  if (g.dimension() == 2) {
    const std::size_t pp = g.neighbor(g.neighbor(p, 0, 1), 1, 1);
    const std::size_t pm = g.neighbor(g.neighbor(p, 0, 1), 1, -1);
    const std::size_t mp = g.neighbor(g.neighbor(p, 0, -1), 1, 1);
    const std::size_t mm = g.neighbor(g.neighbor(p, 0, -1), 1, -1);
    const double mixed = (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * g.spacing(0) * g.spacing(1));
    H[1] = H[2] = mixed;
  }
  return H;
}

}  // namespace

ScalarField second_fundamental_norm(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  ScalarField out(u.grid_ptr());
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Point Du = node_gradient_at(u, p);
    const double w2 = 1.0 + Du[0] * Du[0] + Du[1] * Du[1];
    const auto H = hessian_at(u, p);
    if (g.dimension() == 1) {
      // g^{11} = 1/omega^2
      const double k = H[0] / (w2 * std::sqrt(w2));
      out[p] = k * k;
      continue;
    }
    // g^{-1} = L L^T (Cholesky), |A|^2 = ||L^T D^2u L||_F^2 / omega^2
    const double G00 = 1.0 - Du[0] * Du[0] / w2;
    const double G01 = -Du[0] * Du[1] / w2;
    const double G11 = 1.0 - Du[1] * Du[1] / w2;
    const double l00 = std::sqrt(G00);
    const double l10 = G01 / l00;
    const double l11 = std::sqrt(std::max(G11 - l10 * l10, 0.0));
    // M = L^T H L, L = [[l00, 0], [l10, l11]]
    const double a = H[0], b = H[1], c = H[3];
    const double m00 = l00 * (a * l00 + b * l10) + l10 * (b * l00 + c * l10);
    const double m01 = l00 * b * l11 + l10 * c * l11;
    const double m11 = l11 * c * l11;
    out[p] = (m00 * m00 + 2.0 * m01 * m01 + m11 * m11) / w2;
  }
  return out;
}

ScalarField compose_along_graph(const ScalarField& u, const PMCFunction& h) {
  const BaseGrid& g = u.grid();
  ScalarField out(u.grid_ptr());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Point Du = node_gradient_at(u, p);
    const double omega = std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
    PMCPoint q;
    q.x = g.position(p);
    q.z = u[p];
    q.Y = {-Du[0] / omega, -Du[1] / omega};
    q.t = 1.0 / omega;
    q.node = p;
    out[p] = h(q);
  }
  return out;
}

namespace {

// Theta for the graph Laplacian. On dirichlet end nodes the one-sided
// difference is chosen so its h^2 error term matches the centred one
// (u' + h^2 u'''/6); otherwise the jump in the Theta error, divided by h^2,
// leaves an O(1) residual next to the boundary.
ScalarField theta_for_laplacian(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  ScalarField out = theta_field(u);
  for (std::size_t p : g.boundary_nodes()) {
    Point Du = node_gradient_at(u, p);
    for (int a = 0; a < g.dimension(); ++a) {
      if (g.periodic(a)) continue;
      const int i = g.coords(p)[a];
      const int dir = i == 0 ? 1 : i == g.shape(a) - 1 ? -1 : 0;
      if (dir == 0) continue;
      const double v1 = u[g.neighbor(p, a, dir)], v2 = u[g.neighbor(p, a, 2 * dir)],
                   v3 = u[g.neighbor(p, a, 3 * dir)];
      Du[a] = dir * (-2.0 * u[p] + 3.5 * v1 - 2.0 * v2 + 0.5 * v3) / g.spacing(a);
    }
    out[p] = 1.0 / std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
  }
  return out;
}

}  // namespace

ScalarField jacobi_residual(const ScalarField& u, const PMCFunction& h) {
  const BaseGrid& g = u.grid();
  const ScalarField theta = theta_for_laplacian(u);
  ScalarField out = graph_laplacian(u, theta);
  const ScalarField a2 = second_fundamental_norm(u);
  const ScalarField hs = compose_along_graph(u, h);
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Point Du = node_gradient_at(u, p);
    const Point Dh = node_gradient_at(hs, p);
    const double w2 = 1.0 + Du[0] * Du[0] + Du[1] * Du[1];
    // <grad_S H, e_r> = g^{ij} d_j H u_i = <Du, DH> / omega^2
    out[p] += a2[p] * theta[p] - (Du[0] * Dh[0] + Du[1] * Dh[1]) / w2;
  }
  return out;
}

}  // namespace pmc
