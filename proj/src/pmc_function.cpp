#include "pmc/pmc_function.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace pmc {

std::string describe(const PMCPoint& p) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "(x=(%.17g,%.17g), z=%.17g, Y=(%.17g,%.17g), t=%.17g)",
                p.x[0], p.x[1], p.z, p.Y[0], p.Y[1], p.t);
  return buf;
}

PMCFunction::PMCFunction(std::string provenance, ValueFn value, PartialsFn partials,
                         bool z_dependent)
    : provenance_(std::move(provenance)),
      value_(std::move(value)),
      partials_(std::move(partials)),
      z_dependent_(z_dependent) {}

PMCFunction PMCFunction::constant(double c) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return PMCFunction(
      buf, [c](const PMCPoint&) { return c; },
      [c](const PMCPoint&) {
        PMCPartials d;
        d.value = c;
        return d;
      },
      false);
}

double PMCFunction::operator()(const PMCPoint& p) const {
  const double v = value_(p);
  if (!std::isfinite(v))
    throw EvaluationError("PMC function '" + provenance_ + "' is not finite at " +
                          describe(p));
  return v;
}

PMCPartials PMCFunction::finite_difference_partials(const PMCPoint& p, double step) const {
  PMCPartials d;
  d.value = (*this)(p);
  auto central = [&](auto&& shift) {
    PMCPoint a = p, b = p;
    shift(a, step);
    shift(b, -step);
    return ((*this)(a) - (*this)(b)) / (2.0 * step);
  };
  d.dz = central([](PMCPoint& q, double s) { q.z += s; });
  d.dY[0] = central([](PMCPoint& q, double s) { q.Y[0] += s; });
  d.dY[1] = central([](PMCPoint& q, double s) { q.Y[1] += s; });
  d.dt = central([](PMCPoint& q, double s) { q.t += s; });
  return d;
}

PMCPartials PMCFunction::partials(const PMCPoint& p) const {
  if (!partials_) return finite_difference_partials(p);
  PMCPartials d = partials_(p);
  if (!std::isfinite(d.value) || !std::isfinite(d.dz) || !std::isfinite(d.dY[0]) ||
      !std::isfinite(d.dY[1]) || !std::isfinite(d.dt))
    throw EvaluationError("PMC function '" + provenance_ +
                          "' or its partials are not finite at " + describe(p));
  return d;
}

namespace {

const std::vector<std::string>& pmc_variables() {
  static const std::vector<std::string> vars{"x1", "x2", "z", "y1", "y2", "t"};
  return vars;
}

struct CompiledPMC {
  Expression value, dz, dy1, dy2, dt;

  static std::array<double, 6> args(const PMCPoint& p) {
    return {p.x[0], p.x[1], p.z, p.Y[0], p.Y[1], p.t};
  }
};

}  // namespace

PMCFunction parse_pmc(std::string_view text) {
  auto c = std::make_shared<CompiledPMC>();
  c->value = Expression::parse(text, pmc_variables());
  c->dz = c->value.derivative(2);
  c->dy1 = c->value.derivative(3);
  c->dy2 = c->value.derivative(4);
  c->dt = c->value.derivative(5);
  const bool zdep = c->value.depends_on(2);
  return PMCFunction(
      std::string(text),
      [c](const PMCPoint& p) { return c->value(CompiledPMC::args(p)); },
      [c](const PMCPoint& p) {
        const auto a = CompiledPMC::args(p);
        PMCPartials d;
        d.value = c->value(a);
        d.dz = c->dz(a);
        d.dY = {c->dy1(a), c->dy2(a)};
        d.dt = c->dt(a);
        return d;
      },
      zdep);
}

PMCFunction sum_with_t_weight(const PMCFunction& h1, const PMCFunction& h2) {
  return PMCFunction(
      "(" + h1.provenance() + ") + t*(" + h2.provenance() + ")",
      [h1, h2](const PMCPoint& p) { return h1(p) + p.t * h2(p); },
      [h1, h2](const PMCPoint& p) {
        const PMCPartials a = h1.partials(p);
        const PMCPartials b = h2.partials(p);
        PMCPartials d;
        d.value = a.value + p.t * b.value;
        d.dz = a.dz + p.t * b.dz;
        d.dY = {a.dY[0] + p.t * b.dY[0], a.dY[1] + p.t * b.dY[1]};
        d.dt = a.dt + b.value + p.t * b.dt;
        return d;
      },
      h1.z_dependent() || h2.z_dependent());
}

WorkingBox WorkingBox::over(const BaseGrid& grid, double z_lo, double z_hi) {
  WorkingBox b;
  b.z_lo = z_lo;
  b.z_hi = z_hi;
  b.dimension = grid.dimension();
  for (int a = 0; a < grid.dimension(); ++a) {
    b.x_lo[a] = grid.origin(a);
    b.x_hi[a] = grid.origin(a) + grid.length(a);
  }
  b.validate();
  return b;
}

void WorkingBox::validate() const {
  if (!(z_lo < z_hi))
    throw std::invalid_argument("working box needs z_lo < z_hi");
}

namespace {

SampleReport sample_max(const PMCFunction& h, const WorkingBox& box, int samples) {
  box.validate();
  SampleReport r;
  bool first = true;
  for_each_lattice_point(box, samples, [&](const PMCPoint& p) {
    const double dz = h.partials(p).dz;
    ++r.samples_evaluated;
    // strict comparison: the lowest lattice index wins ties
    if (first || dz > r.worst_value) {
      r.worst_value = dz;
      r.worst_point = p;
      first = false;
    }
  });
  r.pass = r.worst_value <= kSignTolerance;
  return r;
}

}  // namespace

SampleReport check_monotone(const PMCFunction& h, const WorkingBox& box, int samples) {
  return sample_max(h, box, samples);
}

SampleReport check_quasi_decreasing(const QuasiDecomposition& d, const WorkingBox& box,
                                    int samples) {
  return sample_max(d.h1, box, samples);
}

}  // namespace pmc
