#pragma once

#include <optional>
#include <stdexcept>

#include "pmc/geometry.hpp"
#include "pmc/grid.hpp"
#include "pmc/pmc_function.hpp"

namespace pmc {

class BoxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws BoxError listing the nodes where u leaves [z_lo, z_hi].
void require_within_box(const ScalarField& u, const WorkingBox& box);

/// L_H(u) = H(u) - H(x, u, -Du/omega, 1/omega) on interior nodes, with H(u)
/// the product mean curvature, or the conformal one when `factor` is given.
/// Boundary nodes are zero.
ScalarField pmc_residual(const ScalarField& u, const PMCFunction& h,
                         const ConformalFactor* factor = nullptr, int n = 0,
                         const WorkingBox* box = nullptr);

}  // namespace pmc
