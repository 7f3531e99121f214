#pragma once

// Prescribed-mean-curvature functions H(x, z, Y, t).
//
// The normal arguments are the components of the product-unit upward normal
// of a graph, Y = -Du/omega and t = 1/omega, so |Y|^2 + t^2 = 1 on graphs.

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pmc/expression.hpp"
#include "pmc/grid.hpp"

namespace pmc {

struct PMCPoint {
  Point x{0.0, 0.0};
  double z = 0.0;
  Point Y{0.0, 0.0};
  double t = 1.0;
  /// Grid node the point belongs to, or npos off-grid. Field-dependent
  /// functions (the penalised iterates) read their anchor values through it.
  std::size_t node = BaseGrid::npos;
};

struct PMCPartials {
  double value = 0.0;
  double dz = 0.0;
  Point dY{0.0, 0.0};
  double dt = 0.0;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string describe(const PMCPoint& p);

class PMCFunction {
 public:
  using ValueFn = std::function<double(const PMCPoint&)>;
  using PartialsFn = std::function<PMCPartials(const PMCPoint&)>;

  PMCFunction() = default;
  /// `partials` may be empty, in which case central differences with step
  /// 1e-6 are used.
  PMCFunction(std::string provenance, ValueFn value, PartialsFn partials = {},
              bool z_dependent = true);

  static PMCFunction constant(double c);

  /// Throws EvaluationError naming the point if the value is not finite.
  double operator()(const PMCPoint& p) const;
  PMCPartials partials(const PMCPoint& p) const;
  PMCPartials finite_difference_partials(const PMCPoint& p, double step = 1e-6) const;

  /// False only when the function is known not to depend on z.
  bool z_dependent() const { return z_dependent_; }
  bool has_analytic_partials() const { return static_cast<bool>(partials_); }
  const std::string& provenance() const { return provenance_; }
  explicit operator bool() const { return static_cast<bool>(value_); }

 private:
  std::string provenance_;
  ValueFn value_;
  PartialsFn partials_;
  bool z_dependent_ = true;
};

/// Parses an expression over x1, x2, z, y1, y2, t; partials are symbolic.
PMCFunction parse_pmc(std::string_view text);

/// H1 + t * H2.
PMCFunction sum_with_t_weight(const PMCFunction& h1, const PMCFunction& h2);

struct QuasiDecomposition {
  PMCFunction h1;
  PMCFunction h2;

  PMCFunction composite() const { return sum_with_t_weight(h1, h2); }
};

/// {x in N, z in [z_lo, z_hi], |Y|^2 + t^2 <= 1}.
struct WorkingBox {
  double z_lo = 0.0;
  double z_hi = 1.0;
  int dimension = 1;
  Point x_lo{0.0, 0.0};
  Point x_hi{0.0, 0.0};

  static WorkingBox over(const BaseGrid& grid, double z_lo, double z_hi);
  void validate() const;
};

/// Deterministic sampling lattice: `samples` points per x axis and in z
/// (endpoints included), and the normal lattice of `samples` points per
/// component in [-1, 1] restricted to the closed unit ball.
template <typename Visitor>
void for_each_lattice_point(const WorkingBox& box, int samples, Visitor&& visit);

struct SampleReport {
  bool pass = false;
  PMCPoint worst_point;
  double worst_value = 0.0;
  std::size_t samples_evaluated = 0;
};

/// Tolerance for the sampled "<= 0" conditions.
inline constexpr double kSignTolerance = 1e-12;

/// pass iff the sampled maximum of dH/dz is <= 1e-12.
SampleReport check_monotone(const PMCFunction& h, const WorkingBox& box, int samples);

/// pass iff the sampled maximum of dH1/dz is <= 1e-12 (H2 unconstrained).
SampleReport check_quasi_decreasing(const QuasiDecomposition& d, const WorkingBox& box,
                                    int samples);

// ---------------------------------------------------------------------------

template <typename Visitor>
void for_each_lattice_point(const WorkingBox& box, int samples, Visitor&& visit) {
  const int m = std::max(samples, 2);
  auto lerp = [m](double lo, double hi, int k) {
    return k == m - 1 ? hi : lo + (hi - lo) * static_cast<double>(k) / (m - 1);
  };
  const int nx2 = box.dimension == 2 ? m : 1;
  const int ny2 = box.dimension == 2 ? m : 1;
  PMCPoint p;
  for (int i2 = 0; i2 < nx2; ++i2) {
    p.x[1] = box.dimension == 2 ? lerp(box.x_lo[1], box.x_hi[1], i2) : 0.0;
    for (int i1 = 0; i1 < m; ++i1) {
      p.x[0] = lerp(box.x_lo[0], box.x_hi[0], i1);
      for (int iz = 0; iz < m; ++iz) {
        p.z = lerp(box.z_lo, box.z_hi, iz);
        for (int it = 0; it < m; ++it) {
          p.t = lerp(-1.0, 1.0, it);
          for (int j2 = 0; j2 < ny2; ++j2) {
            p.Y[1] = box.dimension == 2 ? lerp(-1.0, 1.0, j2) : 0.0;
            for (int j1 = 0; j1 < m; ++j1) {
              p.Y[0] = lerp(-1.0, 1.0, j1);
              if (p.Y[0] * p.Y[0] + p.Y[1] * p.Y[1] + p.t * p.t > 1.0 + 1e-12) continue;
              visit(static_cast<const PMCPoint&>(p));
            }
          }
        }
      }
    }
  }
}

}  // namespace pmc
