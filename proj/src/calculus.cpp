#include "pmc/calculus.hpp"

#include <cmath>
#include <stdexcept>

namespace pmc {

Stencil node_gradient_stencil(const BaseGrid& g, std::size_t node, int axis) {
  Stencil s;
  const double h = g.spacing(axis);
  const int i = g.coords(node)[axis];
  if (g.periodic(axis) || (i > 0 && i < g.shape(axis) - 1)) {
    s.add(g.neighbor(node, axis, 1), 0.5 / h);
    s.add(g.neighbor(node, axis, -1), -0.5 / h);
  } else if (i == 0) {
    s.add(node, -1.5 / h);
    s.add(g.neighbor(node, axis, 1), 2.0 / h);
    s.add(g.neighbor(node, axis, 2), -0.5 / h);
  } else {
    s.add(node, 1.5 / h);
    s.add(g.neighbor(node, axis, -1), -2.0 / h);
    s.add(g.neighbor(node, axis, -2), 0.5 / h);
  }
  return s;
}

Stencil face_gradient_stencil(const BaseGrid& g, std::size_t node, int axis,
                              int component) {
  const std::size_t next = g.neighbor(node, axis, 1);
  if (next == BaseGrid::npos) throw std::out_of_range("face does not exist");
  Stencil s;
  if (component == axis) {
    const double h = g.spacing(axis);
    s.add(next, 1.0 / h);
    s.add(node, -1.0 / h);
    return s;
  }
  const Stencil a = node_gradient_stencil(g, node, component);
  const Stencil b = node_gradient_stencil(g, next, component);
  for (int k = 0; k < a.count; ++k) s.add(a.taps[k].node, 0.5 * a.taps[k].weight);
  for (int k = 0; k < b.count; ++k) s.add(b.taps[k].node, 0.5 * b.taps[k].weight);
  return s;
}

Point node_gradient_at(const ScalarField& u, std::size_t node) {
  const BaseGrid& g = u.grid();
  Point d{0.0, 0.0};
  for (int a = 0; a < g.dimension(); ++a)
    d[a] = node_gradient_stencil(g, node, a).apply(u.values());
  return d;
}

Point face_gradient_at(const ScalarField& u, std::size_t node, int axis) {
  const BaseGrid& g = u.grid();
  Point d{0.0, 0.0};
  for (int k = 0; k < g.dimension(); ++k)
    d[k] = face_gradient_stencil(g, node, axis, k).apply(u.values());
  return d;
}

VectorField gradient(const ScalarField& u) {
  VectorField out(u.grid_ptr(), Centering::node);
  for (std::size_t p = 0; p < u.size(); ++p) {
    const Point d = node_gradient_at(u, p);
    for (int a = 0; a < u.grid().dimension(); ++a) out.components[a][p] = d[a];
  }
  return out;
}

ScalarField flux_divergence(const VectorField& flux) {
  if (flux.centering != Centering::face)
    throw std::invalid_argument("flux_divergence needs a face-centred vector field");
  const BaseGrid& g = *flux.grid;
  ScalarField out(flux.grid);
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    double div = 0.0;
    for (int a = 0; a < g.dimension(); ++a) {
      const std::size_t prev = g.neighbor(p, a, -1);
      div += (flux.components[a][p] - flux.components[a][prev]) / g.spacing(a);
    }
    out[p] = div;
  }
  return out;
}

ScalarField mean_curvature_product(const ScalarField& u) {
  const BaseGrid& g = u.grid();
  VectorField flux(u.grid_ptr(), Centering::face);
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (int a = 0; a < g.dimension(); ++a) {
      if (!g.has_face(p, a)) continue;
      const Point G = face_gradient_at(u, p, a);
      const double omega = std::sqrt(1.0 + G[0] * G[0] + G[1] * G[1]);
      flux.components[a][p] = G[a] / omega;
    }
  }
  ScalarField h = flux_divergence(flux);
  for (auto& v : h.values()) v = -v;
  return h;
}

ScalarField graph_laplacian(const ScalarField& u, const ScalarField& phi) {
  require_same_grid(u, phi);
  const BaseGrid& g = u.grid();
  const int n = g.dimension();
  VectorField flux(u.grid_ptr(), Centering::face);
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (int a = 0; a < n; ++a) {
      if (!g.has_face(p, a)) continue;
      const Point Du = face_gradient_at(u, p, a);
      const Point Dphi = face_gradient_at(phi, p, a);
      const double w2 = 1.0 + Du[0] * Du[0] + Du[1] * Du[1];
      // sqrt(g) g^{aj} d_j phi with g^{ij} = delta_ij - u_i u_j / omega^2
      const double udphi = Du[0] * Dphi[0] + Du[1] * Dphi[1];
      flux.components[a][p] = std::sqrt(w2) * (Dphi[a] - Du[a] * udphi / w2);
    }
  }
  ScalarField out = flux_divergence(flux);
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Point Du = node_gradient_at(u, p);
    out[p] /= std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
  }
  return out;
}

double integrate(const ScalarField& phi) {
  const BaseGrid& g = phi.grid();
  double s = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) s += g.weight(p) * phi[p];
  return s;
}

}  // namespace pmc
