#include "pmc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pmc/expression.hpp"

namespace pmc {

namespace {

const char* axis_name(int axis) { return axis == 0 ? "x1" : "x2"; }

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BaseGrid::BaseGrid(const GridSpec& spec) : dim_(spec.dimension) {
  if (dim_ != 1 && dim_ != 2)
    throw GridError("grid dimension must be 1 or 2, got " + std::to_string(dim_));
  const auto d = static_cast<std::size_t>(dim_);
  if (spec.shape.size() != d || spec.lengths.size() != d || spec.topology.size() != d)
    throw GridError("grid shape, lengths and topology need one entry per axis");
  if (!spec.origin.empty() && spec.origin.size() != d)
    throw GridError("grid origin needs one entry per axis");

  for (int a = 0; a < dim_; ++a) {
    if (!(spec.lengths[a] > 0.0) || !std::isfinite(spec.lengths[a]))
      throw GridError(std::string("axis ") + axis_name(a) +
                      ": length must be positive");
    if (spec.shape[a] < 4)
      throw GridError(std::string("axis ") + axis_name(a) +
                      ": shape must be at least 4");
    shape_[a] = spec.shape[a];
    length_[a] = spec.lengths[a];
    topo_[a] = spec.topology[a];
    origin_[a] = spec.origin.empty() ? 0.0 : spec.origin[a];
    spacing_[a] = topo_[a] == Topology::periodic ? length_[a] / shape_[a]
                                                 : length_[a] / (shape_[a] - 1);
  }
  size_ = static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(shape_[1]);

  boundary_flag_.assign(size_, 0);
  weights_.assign(size_, 1.0);
  for (std::size_t p = 0; p < size_; ++p) {
    const auto c = coords(p);
    for (int a = 0; a < dim_; ++a) {
      double w = spacing_[a];
      if (topo_[a] == Topology::dirichlet &&
          (c[a] == 0 || c[a] == shape_[a] - 1)) {
        boundary_flag_[p] = 1;
        w *= 0.5;
      }
      weights_[p] *= w;
    }
    (boundary_flag_[p] ? boundary_ : interior_).push_back(p);
  }
}

double BaseGrid::max_spacing() const {
  double h = spacing_[0];
  if (dim_ == 2) h = std::max(h, spacing_[1]);
  return h;
}

std::array<int, 2> BaseGrid::coords(std::size_t node) const {
  const auto s0 = static_cast<std::size_t>(shape_[0]);
  return {static_cast<int>(node % s0), static_cast<int>(node / s0)};
}

Point BaseGrid::position(std::size_t node) const {
  const auto c = coords(node);
  Point x{0.0, 0.0};
  for (int a = 0; a < dim_; ++a) x[a] = origin_[a] + c[a] * spacing_[a];
  return x;
}

std::size_t BaseGrid::neighbor(std::size_t node, int axis, int offset) const {
  auto c = coords(node);
  int i = c[axis] + offset;
  if (topo_[axis] == Topology::periodic) {
    i %= shape_[axis];
    if (i < 0) i += shape_[axis];
  } else if (i < 0 || i >= shape_[axis]) {
    return npos;
  }
  c[axis] = i;
  return index(c[0], c[1]);
}

bool BaseGrid::has_face(std::size_t node, int axis) const {
  return topo_[axis] == Topology::periodic || coords(node)[axis] < shape_[axis] - 1;
}

Point BaseGrid::face_center(std::size_t node, int axis) const {
  Point x = position(node);
  x[axis] += 0.5 * spacing_[axis];
  return x;
}

double BaseGrid::volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= length_[a];
  return v;
}

GridSpec BaseGrid::spec() const {
  GridSpec s;
  s.dimension = dim_;
  for (int a = 0; a < dim_; ++a) {
    s.shape.push_back(shape_[a]);
    s.lengths.push_back(length_[a]);
    s.topology.push_back(topo_[a]);
    s.origin.push_back(origin_[a]);
  }
  return s;
}

GridSpec BaseGrid::refined_spec() const {
  GridSpec s = spec();
  for (int a = 0; a < dim_; ++a)
    s.shape[a] = topo_[a] == Topology::periodic ? 2 * shape_[a] : 2 * (shape_[a] - 1) + 1;
  return s;
}

bool BaseGrid::operator==(const BaseGrid& o) const {
  return dim_ == o.dim_ && shape_ == o.shape_ && length_ == o.length_ &&
         origin_ == o.origin_ && topo_ == o.topo_;
}

GridPtr build_grid(const GridSpec& spec) { return std::make_shared<const BaseGrid>(spec); }

ScalarField::ScalarField(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(grid_->size(), fill) {}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size())
    throw GridError("field has " + std::to_string(values_.size()) +
                    " values for a grid of " + std::to_string(grid_->size()) + " nodes");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw GridError("field value at node " + std::to_string(i) + " is not finite");
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

VectorField::VectorField(GridPtr g, Centering c) : grid(std::move(g)), centering(c) {
  for (int a = 0; a < grid->dimension(); ++a) components[a].assign(grid->size(), 0.0);
}

double VectorField::norm_at(std::size_t node) const {
  double s = 0.0;
  for (int a = 0; a < grid->dimension(); ++a) s += components[a][node] * components[a][node];
  return std::sqrt(s);
}

ScalarField field_from_expr(const GridPtr& grid, std::string_view text) {
  static const std::vector<std::string> vars{"x1", "x2", "z", "r", "y1", "y2", "t"};
  const Expression e = Expression::parse(text, vars);
  for (std::size_t k = 2; k < vars.size(); ++k)
    if (e.depends_on(k))
      throw GridError("field expression '" + std::string(text) +
                      "' may only reference base coordinates, found '" + vars[k] + "'");
  if (grid->dimension() == 1 && e.depends_on(1))
    throw GridError("field expression '" + std::string(text) +
                    "' references x2 on a one-dimensional grid");
  std::vector<double> values(grid->size());
  std::array<double, 7> args{};
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const Point x = grid->position(p);
    args[0] = x[0];
    args[1] = x[1];
    values[p] = e(args);
    if (!std::isfinite(values[p]))
      throw GridError("field expression '" + std::string(text) +
                      "' is not finite at x=(" + fmt17(x[0]) + "," + fmt17(x[1]) + ")");
  }
  return ScalarField(grid, std::move(values));
}

void require_same_grid(const ScalarField& a, const ScalarField& b) {
  if (!(a.grid() == b.grid())) throw GridError("fields live on different grids");
}

double sup_norm(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sup_norm(const ScalarField& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double interior_sup_norm(const ScalarField& a) {
  double m = 0.0;
  for (std::size_t p : a.grid().interior_nodes()) m = std::max(m, std::abs(a[p]));
  return m;
}

std::string field_csv_header(const BaseGrid& g) {
  std::string shape, lengths, topo, origin;
  for (int a = 0; a < g.dimension(); ++a) {
    const char* sep = a == 0 ? "" : ",";
    shape += sep + std::to_string(g.shape(a));
    lengths += sep + fmt17(g.length(a));
    topo += std::string(sep) + (g.periodic(a) ? "p" : "d");
    origin += sep + fmt17(g.origin(a));
  }
  return "# dim=" + std::to_string(g.dimension()) + " shape=" + shape +
         " lengths=" + lengths + " topology=" + topo + " origin=" + origin;
}

void write_field_csv(const ScalarField& field, std::ostream& out) {
  out << field_csv_header(field.grid()) << '\n';
  for (double v : field.values()) out << fmt17(v) << '\n';
}

void write_field_csv(const ScalarField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_field_csv(field, out);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

ScalarField read_field_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("#", 0) != 0)
    throw GridError("field CSV must start with a '# dim=...' header line");
  GridSpec spec;
  std::istringstream hs(header.substr(1));
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw GridError("malformed header token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const auto parts = split(token.substr(eq + 1), ',');
    if (key == "dim") {
      spec.dimension = std::stoi(parts.at(0));
    } else if (key == "shape") {
      for (const auto& p : parts) spec.shape.push_back(std::stoi(p));
    } else if (key == "lengths") {
      for (const auto& p : parts) spec.lengths.push_back(std::stod(p));
    } else if (key == "topology") {
      for (const auto& p : parts) {
        if (p == "p") spec.topology.push_back(Topology::periodic);
        else if (p == "d") spec.topology.push_back(Topology::dirichlet);
        else throw GridError("unknown topology flag '" + p + "'");
      }
    } else if (key == "origin") {
      for (const auto& p : parts) spec.origin.push_back(std::stod(p));
    } else {
      throw GridError("unknown header key '" + key + "'");
    }
  }
  auto grid = build_grid(spec);
  std::vector<double> values;
  values.reserve(grid->size());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    values.push_back(std::stod(line));
  }
  return ScalarField(grid, std::move(values));
}

ScalarField read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file '" + path + "'");
  return read_field_csv(in);
}

}  // namespace pmc
