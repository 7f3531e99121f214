#pragma once

// Second-order finite-difference operators on BaseGrid fields: gradients,
// conservative flux divergence, the graph mean-curvature operator, the
// Laplace-Beltrami operator of a graph, and quadrature.

#include <array>
#include <cstddef>
#include <span>

#include "pmc/grid.hpp"

namespace pmc {

struct Tap {
  std::size_t node;
  double weight;
};

/// Linear combination of nodal values.
struct Stencil {
  std::array<Tap, 8> taps{};
  int count = 0;

  void add(std::size_t node, double weight) { taps[count++] = {node, weight}; }
  double apply(std::span<const double> u) const {
    double s = 0.0;
    for (int k = 0; k < count; ++k) s += taps[k].weight * u[taps[k].node];
    return s;
  }
};

/// Centered difference along `axis` at a node; periodic wraparound, and the
/// second-order one-sided formula on dirichlet end nodes.
Stencil node_gradient_stencil(const BaseGrid& grid, std::size_t node, int axis);

/// Component `component` of the gradient on the face node -> node+e_axis.
/// The normal component is the two-point difference; tangential components
/// average the node-centred differences of the two adjacent nodes.
Stencil face_gradient_stencil(const BaseGrid& grid, std::size_t node, int axis,
                              int component);

Point node_gradient_at(const ScalarField& u, std::size_t node);
Point face_gradient_at(const ScalarField& u, std::size_t node, int axis);

VectorField gradient(const ScalarField& u);

/// Per-node sum of face-flux differences over spacing. Dirichlet boundary
/// nodes are set to zero.
ScalarField flux_divergence(const VectorField& flux);

/// H(u) = -div(Du / sqrt(1 + |Du|^2)), the mean curvature of the graph with
/// respect to the upward normal (-Du + e_r)/omega. Zero on boundary nodes.
ScalarField mean_curvature_product(const ScalarField& u);

/// Laplace-Beltrami operator of the graph of u applied to phi, in flux form.
ScalarField graph_laplacian(const ScalarField& u, const ScalarField& phi);

/// Cell-volume weighted sum (trapezoid on dirichlet axes).
double integrate(const ScalarField& phi);

}  // namespace pmc
