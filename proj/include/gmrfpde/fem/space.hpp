#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"
#include "gmrfpde/fem/mesh.hpp"

namespace gmrfpde::fem {

/// Derivative multi-index, total order <= 2. 1D uses dx only.
struct Deriv {
  int dx = 0;
  int dy = 0;
  int total() const { return dx + dy; }
};

/// Lagrange finite element space of order 1 or 2 on a simplicial mesh.
/// Order 2 adds midpoint DoFs (element midpoints in 1D, edge midpoints in 2D).
/// Vertex DoFs keep the mesh node ids; midpoint DoFs are appended after them.
class FeSpace {
 public:
  FeSpace(Mesh mesh, int order) : mesh_(std::move(mesh)), order_(order) {
    require(order_ == 1 || order_ == 2, "fe space: order must be 1 or 2");
    mesh_.check_invariants();
    build();
  }

  const Mesh& mesh() const { return mesh_; }
  int order() const { return order_; }
  int dim() const { return mesh_.dim; }
  Index n_dofs() const { return n_dofs_; }
  Index dofs_per_element() const { return dofs_per_element_; }
  const Index* element_dofs(Index e) const {
    return element_dofs_.data() + e * dofs_per_element_;
  }
  const std::vector<Real>& dof_coords() const { return dof_coords_; }
  Real dof_x(Index d) const { return dof_coords_[d * mesh_.dim]; }
  Real dof_y(Index d) const { return dof_coords_[d * mesh_.dim + 1]; }
  unsigned char dof_tag(Index d) const { return dof_tags_[d]; }

  std::vector<Index> boundary_dofs() const {
    std::vector<Index> out;
    for (Index d = 0; d < n_dofs_; ++d)
      if (dof_tags_[d] != 0) out.push_back(d);
    return out;
  }

  // ----- reference element -----

  /// Shape function values/derivatives on the reference element. For 1D the
  /// reference coordinate is ξ ∈ [0,1]; for 2D, (ξ,η) in the unit triangle.
  void shape_values(Real xi, Real eta, const Deriv& d, Real* out) const {
    if (mesh_.dim == 1)
      shape_1d(xi, d.dx, out);
    else
      shape_2d(xi, eta, d, out);
  }

  /// Locates the element containing a physical point (within tolerance) and
  /// returns its local reference coordinates. Throws if outside the mesh.
  Index locate(const Real* x, Real* xi, Real* eta) const {
    if (mesh_.dim == 1) {
      Real tol = 1e-10 * (mesh_.axis_x.back() - mesh_.axis_x.front());
      Real p = x[0];
      if (p < mesh_.axis_x.front() - tol || p > mesh_.axis_x.back() + tol)
        throw ContractError("locate: point " + std::to_string(p) + " outside the mesh");
      Index cell = axis_cell(mesh_.axis_x, p);
      Real h = mesh_.axis_x[cell + 1] - mesh_.axis_x[cell];
      *xi = std::clamp((p - mesh_.axis_x[cell]) / h, 0.0, 1.0);
      *eta = 0.0;
      return cell;
    }
    Real tolx = 1e-10 * (mesh_.axis_x.back() - mesh_.axis_x.front());
    Real toly = 1e-10 * (mesh_.axis_y.back() - mesh_.axis_y.front());
    if (x[0] < mesh_.axis_x.front() - tolx || x[0] > mesh_.axis_x.back() + tolx ||
        x[1] < mesh_.axis_y.front() - toly || x[1] > mesh_.axis_y.back() + toly)
      throw ContractError("locate: point (" + std::to_string(x[0]) + ", " +
                          std::to_string(x[1]) + ") outside the mesh");
    Index ix = axis_cell(mesh_.axis_x, x[0]);
    Index iy = axis_cell(mesh_.axis_y, x[1]);
    Real hx = mesh_.axis_x[ix + 1] - mesh_.axis_x[ix];
    Real hy = mesh_.axis_y[iy + 1] - mesh_.axis_y[iy];
    Real s = std::clamp((x[0] - mesh_.axis_x[ix]) / hx, 0.0, 1.0);
    Real t = std::clamp((x[1] - mesh_.axis_y[iy]) / hy, 0.0, 1.0);
    Index nx = static_cast<Index>(mesh_.axis_x.size()) - 1;
    Index cell = iy * nx + ix;
    // Lower-right triangle (v00,v10,v11) covers t <= s; upper-left
    // (v00,v11,v01) the rest. Reference maps: lower: ξ=s? No: see builder.
    if (t <= s) {
      // element 2*cell: vertices v00=(0,0), v10=(1,0), v11=(1,1):
      // x = v00 + ξ(v10-v00) + η(v11-v10+...)-- affine map via barycentric:
      // point = v00 + s*ex + t*ey; in triangle coords: ξ along v10, η along v11.
      // v10 - v00 = (hx, 0); v11 - v00 = (hx, hy). Solve s = ξ + η, t = η.
      *eta = t;
      *xi = s - t;
      return 2 * cell;
    }
    // element 2*cell+1: vertices v00=(0,0), v11=(1,1), v01=(0,1):
    // v11 - v00 = (hx, hy); v01 - v00 = (0, hy). Solve s = ξ, t = ξ + η.
    *xi = s;
    *eta = t - s;
    return 2 * cell + 1;
  }

  /// Physical-derivative shape values for element e at physical point x.
  /// Fills `dofs` (dofs_per_element entries) and `vals`.
  void eval_element(Index e, const Real* x, const Deriv& d, Index* dofs, Real* vals) const;

 private:
  Mesh mesh_;

  static Index axis_cell(const std::vector<Real>& axis, Real p) {
    auto it = std::upper_bound(axis.begin(), axis.end(), p);
    Index cell = static_cast<Index>(it - axis.begin()) - 1;
    return std::clamp<Index>(cell, 0, static_cast<Index>(axis.size()) - 2);
  }

  void shape_1d(Real xi, int order_dx, Real* out) const {
    if (order_ == 1) {
      switch (order_dx) {
        case 0: out[0] = 1.0 - xi; out[1] = xi; return;
        case 1: out[0] = -1.0; out[1] = 1.0; return;
        default: out[0] = 0.0; out[1] = 0.0; return;
      }
    }
    // P2: v0, v1, midpoint
    switch (order_dx) {
      case 0:
        out[0] = 2.0 * xi * xi - 3.0 * xi + 1.0;
        out[1] = xi * (2.0 * xi - 1.0);
        out[2] = 4.0 * xi * (1.0 - xi);
        return;
      case 1:
        out[0] = 4.0 * xi - 3.0;
        out[1] = 4.0 * xi - 1.0;
        out[2] = 4.0 - 8.0 * xi;
        return;
      default:
        out[0] = 4.0;
        out[1] = 4.0;
        out[2] = -8.0;
        return;
    }
  }

  // Reference-triangle shapes in barycentric form; derivatives w.r.t. (ξ,η).
  void shape_2d(Real xi, Real eta, const Deriv& d, Real* out) const {
    Real l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
    if (order_ == 1) {
      if (d.total() == 0) {
        out[0] = l0; out[1] = l1; out[2] = l2;
      } else if (d.dx == 1 && d.dy == 0) {
        out[0] = -1.0; out[1] = 1.0; out[2] = 0.0;
      } else if (d.dx == 0 && d.dy == 1) {
        out[0] = -1.0; out[1] = 0.0; out[2] = 1.0;
      } else {
        out[0] = out[1] = out[2] = 0.0;
      }
      return;
    }
    // P2: vertices then edges (01, 12, 20)
    if (d.total() == 0) {
      out[0] = l0 * (2.0 * l0 - 1.0);
      out[1] = l1 * (2.0 * l1 - 1.0);
      out[2] = l2 * (2.0 * l2 - 1.0);
      out[3] = 4.0 * l0 * l1;
      out[4] = 4.0 * l1 * l2;
      out[5] = 4.0 * l2 * l0;
      return;
    }
    if (d.total() == 1) {
      // dλ0 = (-1,-1), dλ1 = (1,0), dλ2 = (0,1)
      Real g0 = (d.dx == 1) ? -1.0 : -1.0;  // same for ξ and η
      Real g1 = (d.dx == 1) ? 1.0 : 0.0;
      Real g2 = (d.dx == 1) ? 0.0 : 1.0;
      out[0] = (4.0 * l0 - 1.0) * g0;
      out[1] = (4.0 * l1 - 1.0) * g1;
      out[2] = (4.0 * l2 - 1.0) * g2;
      out[3] = 4.0 * (g0 * l1 + l0 * g1);
      out[4] = 4.0 * (g1 * l2 + l1 * g2);
      out[5] = 4.0 * (g2 * l0 + l2 * g0);
      return;
    }
    // Second derivatives: constant. Using λ gradients above:
    auto grad = [&](int which, int axis) -> Real {
      if (which == 0) return -1.0;
      if (which == 1) return axis == 0 ? 1.0 : 0.0;
      return axis == 0 ? 0.0 : 1.0;
    };
    int a = d.dx == 2 ? 0 : (d.dy == 2 ? 1 : 0);
    int b = d.dx == 2 ? 0 : (d.dy == 2 ? 1 : 1);
    // vertex i: N = λ(2λ-1): ∂ab N = 4 gλa gλb
    out[0] = 4.0 * grad(0, a) * grad(0, b);
    out[1] = 4.0 * grad(1, a) * grad(1, b);
    out[2] = 4.0 * grad(2, a) * grad(2, b);
    // edge ij: N = 4 λi λj : ∂ab N = 4 (gλi_a gλj_b + gλi_b gλj_a)
    out[3] = 4.0 * (grad(0, a) * grad(1, b) + grad(0, b) * grad(1, a));
    out[4] = 4.0 * (grad(1, a) * grad(2, b) + grad(1, b) * grad(2, a));
    out[5] = 4.0 * (grad(2, a) * grad(0, b) + grad(2, b) * grad(0, a));
  }

  void build() {
    Index nn = mesh_.n_nodes();
    Index ne = mesh_.n_elements();
    int d = mesh_.dim;
    if (order_ == 1) {
      dofs_per_element_ = d + 1;
      n_dofs_ = nn;
      element_dofs_ = mesh_.elements;
      dof_coords_ = mesh_.coords;
      dof_tags_ = mesh_.node_tags;
      return;
    }
    if (d == 1) {
      dofs_per_element_ = 3;
      n_dofs_ = nn + ne;
      dof_coords_.resize(n_dofs_);
      dof_tags_.assign(n_dofs_, 0);
      std::copy(mesh_.coords.begin(), mesh_.coords.end(), dof_coords_.begin());
      std::copy(mesh_.node_tags.begin(), mesh_.node_tags.end(), dof_tags_.begin());
      element_dofs_.resize(3 * ne);
      for (Index e = 0; e < ne; ++e) {
        const Index* el = mesh_.element(e);
        element_dofs_[3 * e] = el[0];
        element_dofs_[3 * e + 1] = el[1];
        Index mid = nn + e;
        element_dofs_[3 * e + 2] = mid;
        dof_coords_[mid] = 0.5 * (mesh_.node_x(el[0]) + mesh_.node_x(el[1]));
      }
      return;
    }
    // 2D P2: edge midpoints
    dofs_per_element_ = 6;
    std::map<std::pair<Index, Index>, Index> edge_dof;
    auto edge_id = [&](Index a, Index b) {
      auto key = std::minmax(a, b);
      auto it = edge_dof.find(key);
      if (it != edge_dof.end()) return it->second;
      Index id = nn + static_cast<Index>(edge_dof.size());
      edge_dof.emplace(key, id);
      return id;
    };
    element_dofs_.resize(6 * ne);
    for (Index e = 0; e < ne; ++e) {
      const Index* el = mesh_.element(e);
      element_dofs_[6 * e] = el[0];
      element_dofs_[6 * e + 1] = el[1];
      element_dofs_[6 * e + 2] = el[2];
      element_dofs_[6 * e + 3] = edge_id(el[0], el[1]);
      element_dofs_[6 * e + 4] = edge_id(el[1], el[2]);
      element_dofs_[6 * e + 5] = edge_id(el[2], el[0]);
    }
    n_dofs_ = nn + static_cast<Index>(edge_dof.size());
    dof_coords_.assign(2 * n_dofs_, 0.0);
    dof_tags_.assign(n_dofs_, 0);
    std::copy(mesh_.coords.begin(), mesh_.coords.end(), dof_coords_.begin());
    std::copy(mesh_.node_tags.begin(), mesh_.node_tags.end(), dof_tags_.begin());
    for (const auto& [key, id] : edge_dof) {
      dof_coords_[2 * id] = 0.5 * (mesh_.node_x(key.first) + mesh_.node_x(key.second));
      dof_coords_[2 * id + 1] = 0.5 * (mesh_.node_y(key.first) + mesh_.node_y(key.second));
      // An edge midpoint lies on the boundary iff both endpoints share a tag.
      dof_tags_[id] = mesh_.node_tags[key.first] & mesh_.node_tags[key.second];
    }
  }

  int order_;
  Index n_dofs_ = 0;
  Index dofs_per_element_ = 0;
  std::vector<Index> element_dofs_;
  std::vector<Real> dof_coords_;
  std::vector<unsigned char> dof_tags_;
};

namespace detail {

/// Geometry of an affine element: Jacobian inverse for derivative transforms.
struct ElementGeometry {
  Real ji[4] = {0, 0, 0, 0};  // inverse Jacobian (2D) or 1/h in ji[0] (1D)
  Real measure = 0.0;

  static ElementGeometry of(const Mesh& mesh, Index e) {
    ElementGeometry g;
    const Index* el = mesh.element(e);
    if (mesh.dim == 1) {
      Real h = mesh.node_x(el[1]) - mesh.node_x(el[0]);
      g.ji[0] = 1.0 / h;
      g.measure = h;
      return g;
    }
    Real x0 = mesh.node_x(el[0]), y0 = mesh.node_y(el[0]);
    Real j00 = mesh.node_x(el[1]) - x0, j10 = mesh.node_y(el[1]) - y0;
    Real j01 = mesh.node_x(el[2]) - x0, j11 = mesh.node_y(el[2]) - y0;
    Real det = j00 * j11 - j01 * j10;
    g.measure = 0.5 * det;
    g.ji[0] = j11 / det;
    g.ji[1] = -j01 / det;
    g.ji[2] = -j10 / det;
    g.ji[3] = j00 / det;
    return g;
  }
};

}  // namespace detail

inline void FeSpace::eval_element(Index e, const Real* x, const Deriv& d, Index* dofs,
                                  Real* vals) const {
  detail::ElementGeometry g = detail::ElementGeometry::of(mesh_, e);
  Index nd = dofs_per_element_;
  for (Index k = 0; k < nd; ++k) dofs[k] = element_dofs(e)[k];

  if (mesh_.dim == 1) {
    const Index* el = mesh_.element(e);
    Real h = mesh_.node_x(el[1]) - mesh_.node_x(el[0]);
    Real xi = (x[0] - mesh_.node_x(el[0])) / h;
    shape_values(xi, 0.0, d, vals);
    Real f = std::pow(g.ji[0], d.dx);
    for (Index k = 0; k < nd; ++k) vals[k] *= f;
    return;
  }

  // 2D: map physical point to reference coordinates via the inverse Jacobian.
  const Index* el = mesh_.element(e);
  Real dx = x[0] - mesh_.node_x(el[0]);
  Real dy = x[1] - mesh_.node_y(el[0]);
  Real xi = g.ji[0] * dx + g.ji[1] * dy;
  Real eta = g.ji[2] * dx + g.ji[3] * dy;

  if (d.total() == 0) {
    shape_values(xi, eta, d, vals);
    return;
  }
  if (d.total() == 1) {
    Real gx[6], gy[6];
    shape_values(xi, eta, {1, 0}, gx);
    shape_values(xi, eta, {0, 1}, gy);
    // ∇_x N = J⁻ᵀ ∇_ξ N
    for (Index k = 0; k < nd; ++k) {
      Real vx = g.ji[0] * gx[k] + g.ji[2] * gy[k];
      Real vy = g.ji[1] * gx[k] + g.ji[3] * gy[k];
      vals[k] = (d.dx == 1) ? vx : vy;
    }
    return;
  }
  // Second derivatives: H_x = J⁻ᵀ H_ξ J⁻¹ (affine map, constant Hessian).
  Real hxx[6], hxe[6], hee[6];
  shape_values(xi, eta, {2, 0}, hxx);
  shape_values(xi, eta, {1, 1}, hxe);
  shape_values(xi, eta, {0, 2}, hee);
  Real a = g.ji[0], b = g.ji[1], c = g.ji[2], e2 = g.ji[3];
  for (Index k = 0; k < nd; ++k) {
    // Reference Hessian [hxx hxe; hxe hee]; transform rows/cols.
    Real t00 = a * hxx[k] + c * hxe[k];
    Real t01 = a * hxe[k] + c * hee[k];
    Real t10 = b * hxx[k] + e2 * hxe[k];
    Real t11 = b * hxe[k] + e2 * hee[k];
    Real out_xx = t00 * a + t01 * c;
    Real out_xy = t00 * b + t01 * e2;
    Real out_yy = t10 * b + t11 * e2;
    if (d.dx == 2)
      vals[k] = out_xx;
    else if (d.dy == 2)
      vals[k] = out_yy;
    else
      vals[k] = out_xy;
  }
}

/// Evaluation matrix: row i holds (∂^d φ_j)(x_i) for the requested derivative.
/// Points are dim-interleaved coordinates.
inline SparseMatrixCSC eval_basis(const FeSpace& space, const std::vector<Real>& points,
                                  const Deriv& d) {
  require(d.total() <= 2 && d.dx >= 0 && d.dy >= 0,
          "eval_basis: derivative order must be at most 2");
  if (space.dim() == 1) require(d.dy == 0, "eval_basis: dy derivative on a 1D space");
  Index npts = static_cast<Index>(points.size()) / space.dim();
  std::vector<Triplet> trips;
  std::vector<Index> dofs(space.dofs_per_element());
  std::vector<Real> vals(space.dofs_per_element());
  for (Index i = 0; i < npts; ++i) {
    Real xi, eta;
    const Real* x = points.data() + i * space.dim();
    Index e = space.locate(x, &xi, &eta);
    space.eval_element(e, x, d, dofs.data(), vals.data());
    for (Index k = 0; k < space.dofs_per_element(); ++k)
      trips.push_back({i, dofs[k], vals[k]});
  }
  return csc_from_triplets(npts, space.n_dofs(), std::move(trips));
}

}  // namespace gmrfpde::fem
