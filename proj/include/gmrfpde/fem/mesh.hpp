#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde::fem {

/// Boundary tag bits per node.
enum BoundaryTag : unsigned char {
  kBoundaryLeft = 1,
  kBoundaryRight = 2,
  kBoundaryBottom = 4,
  kBoundaryTop = 8,
};

/// Structured simplicial mesh: intervals in 1D, triangles in 2D. Nodes come
/// from tensor-product axes (kept for O(log n) point location); 2D cells are
/// split into two consistently oriented triangles.
struct Mesh {
  int dim = 1;
  std::vector<Real> coords;             // node coordinates, dim-interleaved
  std::vector<Index> elements;          // (dim+1) node ids per element
  std::vector<unsigned char> node_tags; // boundary tag bitmask per node
  std::vector<Real> axis_x;
  std::vector<Real> axis_y;

  Index n_nodes() const { return static_cast<Index>(coords.size()) / dim; }
  Index nodes_per_element() const { return dim + 1; }
  Index n_elements() const {
    return static_cast<Index>(elements.size()) / nodes_per_element();
  }
  const Index* element(Index e) const { return elements.data() + e * nodes_per_element(); }

  Real node_x(Index i) const { return coords[i * dim]; }
  Real node_y(Index i) const { return coords[i * dim + 1]; }

  /// Length (1D) or area (2D) of element e; positive for valid orientation.
  Real element_measure(Index e) const {
    const Index* el = element(e);
    if (dim == 1) return node_x(el[1]) - node_x(el[0]);
    Real x0 = node_x(el[0]), y0 = node_y(el[0]);
    Real x1 = node_x(el[1]), y1 = node_y(el[1]);
    Real x2 = node_x(el[2]), y2 = node_y(el[2]);
    return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0));
  }

  void check_invariants() const {
    for (Index v : elements)
      if (v < 0 || v >= n_nodes()) throw StructuralError("mesh: element references invalid node");
    for (Index e = 0; e < n_elements(); ++e)
      if (!(element_measure(e) > 0.0))
        throw StructuralError("mesh: non-positive element measure at element " +
                              std::to_string(e));
  }
};

/// Uniform partition of [a, b] into n elements, endpoints tagged.
inline Mesh build_interval_mesh(Index n_elements, Real a, Real b) {
  require(n_elements >= 1, "build_interval_mesh: need at least one element");
  if (!(a < b)) throw ContractError("build_interval_mesh: need a < b");
  Mesh m;
  m.dim = 1;
  m.axis_x.resize(n_elements + 1);
  for (Index i = 0; i <= n_elements; ++i)
    m.axis_x[i] = a + (b - a) * static_cast<Real>(i) / static_cast<Real>(n_elements);
  m.axis_x.back() = b;
  m.coords = m.axis_x;
  m.node_tags.assign(n_elements + 1, 0);
  m.node_tags.front() = kBoundaryLeft;
  m.node_tags.back() = kBoundaryRight;
  for (Index e = 0; e < n_elements; ++e) {
    m.elements.push_back(e);
    m.elements.push_back(e + 1);
  }
  return m;
}

/// Interval mesh over explicitly given (strictly increasing) node positions.
inline Mesh build_interval_mesh(const std::vector<Real>& axis) {
  require(axis.size() >= 2, "build_interval_mesh: need at least two nodes");
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (!(axis[i] > axis[i - 1]))
      throw ContractError("build_interval_mesh: axis must increase strictly");
  Mesh m;
  m.dim = 1;
  m.axis_x = axis;
  m.coords = axis;
  m.node_tags.assign(axis.size(), 0);
  m.node_tags.front() = kBoundaryLeft;
  m.node_tags.back() = kBoundaryRight;
  for (Index e = 0; e + 1 < static_cast<Index>(axis.size()); ++e) {
    m.elements.push_back(e);
    m.elements.push_back(e + 1);
  }
  return m;
}

/// Triangulated tensor grid over the given axes. Cell (i, j) is split along
/// the diagonal from its lower-left to upper-right corner.
inline Mesh build_triangulated_grid(const std::vector<Real>& axis_x,
                                    const std::vector<Real>& axis_y) {
  require(axis_x.size() >= 2 && axis_y.size() >= 2,
          "build_triangulated_grid: need at least one cell per axis");
  Mesh m;
  m.dim = 2;
  m.axis_x = axis_x;
  m.axis_y = axis_y;
  Index nx = static_cast<Index>(axis_x.size()) - 1;
  Index ny = static_cast<Index>(axis_y.size()) - 1;
  auto node_id = [nx](Index ix, Index iy) { return iy * (nx + 1) + ix; };
  m.coords.resize(2 * (nx + 1) * (ny + 1));
  m.node_tags.assign((nx + 1) * (ny + 1), 0);
  for (Index iy = 0; iy <= ny; ++iy)
    for (Index ix = 0; ix <= nx; ++ix) {
      Index id = node_id(ix, iy);
      m.coords[2 * id] = axis_x[ix];
      m.coords[2 * id + 1] = axis_y[iy];
      unsigned char tag = 0;
      if (ix == 0) tag |= kBoundaryLeft;
      if (ix == nx) tag |= kBoundaryRight;
      if (iy == 0) tag |= kBoundaryBottom;
      if (iy == ny) tag |= kBoundaryTop;
      m.node_tags[id] = tag;
    }
  for (Index iy = 0; iy < ny; ++iy)
    for (Index ix = 0; ix < nx; ++ix) {
      Index v00 = node_id(ix, iy), v10 = node_id(ix + 1, iy);
      Index v11 = node_id(ix + 1, iy + 1), v01 = node_id(ix, iy + 1);
      m.elements.insert(m.elements.end(), {v00, v10, v11});
      m.elements.insert(m.elements.end(), {v00, v11, v01});
    }
  return m;
}

/// Structured unit-square mesh: (n+1)² corner nodes, 2n² triangles.
inline Mesh build_unit_square_mesh(Index n_per_dim) {
  require(n_per_dim >= 1, "build_unit_square_mesh: need n >= 1");
  std::vector<Real> axis(n_per_dim + 1);
  for (Index i = 0; i <= n_per_dim; ++i)
    axis[i] = static_cast<Real>(i) / static_cast<Real>(n_per_dim);
  return build_triangulated_grid(axis, axis);
}

/// Plain-text node/element dump for debugging.
inline void write_mesh(const Mesh& m, std::ostream& os) {
  os << "dim " << m.dim << "\n";
  os << "nodes " << m.n_nodes() << "\n";
  os.precision(17);
  for (Index i = 0; i < m.n_nodes(); ++i) {
    os << m.node_x(i);
    if (m.dim == 2) os << " " << m.node_y(i);
    os << " tag " << static_cast<int>(m.node_tags[i]) << "\n";
  }
  os << "elements " << m.n_elements() << "\n";
  for (Index e = 0; e < m.n_elements(); ++e) {
    const Index* el = m.element(e);
    for (Index k = 0; k < m.nodes_per_element(); ++k) os << el[k] << (k + 1 < m.nodes_per_element() ? " " : "\n");
  }
}

inline void write_mesh_file(const Mesh& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw StructuralError("cannot open " + path + " for writing");
  write_mesh(m, os);
}

}  // namespace gmrfpde::fem
