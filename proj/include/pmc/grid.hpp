#pragma once

// Uniform structured discretizations of the base manifold (circle, interval,
// flat torus, rectangle) and node-indexed fields over them.
//
// Node ordering is row-major with the x1 index running fastest:
//   node = i1 + shape[0] * i2.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pmc {

enum class Topology { periodic, dirichlet };

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  int dimension = 1;
  std::vector<int> shape;
  std::vector<double> lengths;
  std::vector<Topology> topology;
  std::vector<double> origin;  // empty means zero
};

using Point = std::array<double, 2>;

class BaseGrid {
 public:
  explicit BaseGrid(const GridSpec& spec);

  int dimension() const { return dim_; }
  int shape(int axis) const { return shape_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double length(int axis) const { return length_[axis]; }
  double origin(int axis) const { return origin_[axis]; }
  Topology topology(int axis) const { return topo_[axis]; }
  bool periodic(int axis) const { return topo_[axis] == Topology::periodic; }
  std::size_t size() const { return size_; }
  /// Largest spacing over the axes.
  double max_spacing() const;

  std::size_t index(int i1, int i2 = 0) const {
    return static_cast<std::size_t>(i1) +
           static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(i2);
  }
  /// Per-axis integer coordinates of a node.
  std::array<int, 2> coords(std::size_t node) const;
  Point position(std::size_t node) const;
  /// Neighbour `offset` steps along `axis`; wraps on periodic axes and
  /// returns npos when leaving a dirichlet axis.
  std::size_t neighbor(std::size_t node, int axis, int offset) const;
  /// Position of the face joining `node` and its +1 neighbour along `axis`.
  Point face_center(std::size_t node, int axis) const;
  /// True when the face node -> node+e_axis exists.
  bool has_face(std::size_t node, int axis) const;

  bool is_boundary(std::size_t node) const { return boundary_flag_[node] != 0; }
  const std::vector<std::size_t>& boundary_nodes() const { return boundary_; }
  const std::vector<std::size_t>& interior_nodes() const { return interior_; }

  /// Cell-volume quadrature weight (trapezoid on dirichlet axes).
  double weight(std::size_t node) const { return weights_[node]; }
  /// Volume of the base domain.
  double volume() const;

  GridSpec spec() const;
  /// One h-halving: periodic shape doubles, dirichlet shape goes to 2(s-1)+1.
  GridSpec refined_spec() const;

  bool operator==(const BaseGrid& other) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  int dim_;
  std::array<int, 2> shape_{1, 1};
  std::array<double, 2> spacing_{1.0, 1.0};
  std::array<double, 2> length_{0.0, 0.0};
  std::array<double, 2> origin_{0.0, 0.0};
  std::array<Topology, 2> topo_{Topology::periodic, Topology::periodic};
  std::size_t size_;
  std::vector<char> boundary_flag_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> interior_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const BaseGrid>;

GridPtr build_grid(const GridSpec& spec);

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(GridPtr grid, double fill = 0.0);
  /// Throws if the value count or finiteness invariant is violated.
  ScalarField(GridPtr grid, std::vector<double> values);

  const BaseGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double min() const;
  double max() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

enum class Centering { node, face };

/// One array per axis; face-centred component k of face `node` lives on the
/// face node -> node+e_k (zero where that face does not exist).
struct VectorField {
  GridPtr grid;
  Centering centering = Centering::node;
  std::array<std::vector<double>, 2> components;

  VectorField(GridPtr g, Centering c);
  double norm_at(std::size_t node) const;
};

/// Samples an expression in x1[,x2] at the grid nodes. References to z, r,
/// y1, y2 or t are rejected.
ScalarField field_from_expr(const GridPtr& grid, std::string_view expr);

void require_same_grid(const ScalarField& a, const ScalarField& b);

double sup_norm(const ScalarField& a, const ScalarField& b);
double sup_norm(const ScalarField& a);
/// Sup norm restricted to interior (non-boundary) nodes.
double interior_sup_norm(const ScalarField& a);

// Field CSV: one header line then one value per line in node order.
std::string field_csv_header(const BaseGrid& grid);
void write_field_csv(const ScalarField& field, std::ostream& out);
void write_field_csv(const ScalarField& field, const std::string& path);
ScalarField read_field_csv(std::istream& in);
ScalarField read_field_csv(const std::string& path);

}  // namespace pmc
