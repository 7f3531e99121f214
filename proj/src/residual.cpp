#include "pmc/residual.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "pmc/calculus.hpp"

namespace pmc {

void require_within_box(const ScalarField& u, const WorkingBox& box) {
  std::string offending;
  std::size_t count = 0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    if (u[p] >= box.z_lo && u[p] <= box.z_hi) continue;
    if (++count <= 8) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%zu (u=%.17g)", count > 1 ? ", " : "", p, u[p]);
      offending += buf;
    }
  }
  if (count == 0) return;
  char head[128];
  std::snprintf(head, sizeof head, "field leaves the working box [%.17g, %.17g] at %zu nodes: ",
                box.z_lo, box.z_hi, count);
  throw BoxError(head + offending + (count > 8 ? ", ..." : ""));
}

ScalarField pmc_residual(const ScalarField& u, const PMCFunction& h,
                         const ConformalFactor* factor, int n, const WorkingBox* box) {
  if (box) require_within_box(u, *box);
  const BaseGrid& g = u.grid();
  const int dim = n > 0 ? n : g.dimension();
  ScalarField curvature = factor ? conformal_mean_curvature(u, *factor, dim)
                                 : mean_curvature_product(u);
  ScalarField out(u.grid_ptr());
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (g.is_boundary(p)) continue;
    const Point Du = node_gradient_at(u, p);
    const double omega = std::sqrt(1.0 + Du[0] * Du[0] + Du[1] * Du[1]);
    PMCPoint q;
    q.x = g.position(p);
    q.z = u[p];
    q.Y = {-Du[0] / omega, -Du[1] / omega};
    q.t = 1.0 / omega;
    q.node = p;
    out[p] = curvature[p] - h(q);
  }
  return out;
}

}  // namespace pmc
