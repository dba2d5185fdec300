#pragma once

#include <cmath>
#include <functional>
#include <variant>
#include <vector>

#include "gmrfpde/core/quadrature.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"
#include "gmrfpde/fem/space.hpp"

namespace gmrfpde::fem {

using ScalarField = std::function<Real(const Real*)>;

/// Linear differential operator a(-∇·(a∇u) proxy via the weak form),
/// advection c·∇u and reaction κ²u. The diffusion coefficient is a constant
/// or one value per element (sampled at centroids when importing fields).
struct DifferentialOperatorSpec {
  std::variant<Real, std::vector<Real>> diffusion = 0.0;
  std::vector<Real> advection;  // empty or length dim
  Real reaction = 0.0;          // κ²
  std::variant<std::monostate, ScalarField, Vector> rhs = std::monostate{};

  Real diffusion_on_element(Index e) const {
    if (std::holds_alternative<Real>(diffusion)) return std::get<Real>(diffusion);
    return std::get<std::vector<Real>>(diffusion)[e];
  }

  bool has_diffusion() const {
    if (std::holds_alternative<Real>(diffusion)) return std::get<Real>(diffusion) != 0.0;
    return !std::get<std::vector<Real>>(diffusion).empty();
  }

  void validate(const FeSpace& space) const {
    bool any = has_diffusion() || !advection.empty() || reaction != 0.0;
    require(any, "differential operator: at least one term must be nonzero");
    if (!advection.empty() && static_cast<Index>(advection.size()) != space.dim())
      throw DimensionError("differential operator: advection dimension mismatch");
    if (std::holds_alternative<std::vector<Real>>(diffusion) &&
        static_cast<Index>(std::get<std::vector<Real>>(diffusion).size()) !=
            space.mesh().n_elements())
      throw DimensionError("differential operator: per-element diffusion size mismatch");
  }
};

inline DifferentialOperatorSpec laplace_operator(Real a = 1.0) {
  DifferentialOperatorSpec op;
  op.diffusion = a;
  return op;
}

namespace detail {

struct QuadPoint {
  Real xi, eta, w;  // reference coordinates and weight (reference measure)
};

inline std::vector<QuadPoint> reference_rule(int dim, int degree) {
  std::vector<QuadPoint> pts;
  if (dim == 1) {
    QuadratureRule r = gauss_legendre((degree + 2) / 2, 0.0, 1.0);
    for (std::size_t i = 0; i < r.points.size(); ++i)
      pts.push_back({r.points[i], 0.0, r.weights[i]});
  } else {
    for (const TrianglePoint& p : triangle_rule(degree)) pts.push_back({p.x, p.y, p.w});
  }
  return pts;
}

/// Reference measure scale: 1D weights live on [0,1] (scale h), 2D triangle
/// rule weights sum to 1/2 (scale 2·area = det J).
inline Real measure_scale(const Mesh& mesh, Index e) {
  return mesh.dim == 1 ? mesh.element_measure(e) : 2.0 * mesh.element_measure(e);
}

}  // namespace detail

/// Consistent mass matrix M_ij = ∫ φ_i φ_j.
inline SparseMatrixCSC assemble_mass(const FeSpace& space) {
  int degree = 2 * space.order();
  auto rule = detail::reference_rule(space.dim(), degree);
  Index nd = space.dofs_per_element();
  std::vector<Real> shape(nd);
  std::vector<Triplet> trips;
  for (Index e = 0; e < space.mesh().n_elements(); ++e) {
    Real scale = detail::measure_scale(space.mesh(), e);
    const Index* dofs = space.element_dofs(e);
    std::vector<Real> local(nd * nd, 0.0);
    for (const auto& q : rule) {
      space.shape_values(q.xi, q.eta, {0, 0}, shape.data());
      Real w = q.w * scale;
      for (Index i = 0; i < nd; ++i)
        for (Index j = 0; j < nd; ++j) local[i * nd + j] += w * shape[i] * shape[j];
    }
    for (Index i = 0; i < nd; ++i)
      for (Index j = 0; j < nd; ++j) trips.push_back({dofs[i], dofs[j], local[i * nd + j]});
  }
  return csc_from_triplets(space.n_dofs(), space.n_dofs(), std::move(trips));
}

/// Galerkin matrix of the operator: ∫ a ∇φ_i·∇φ_j + ∫ φ_i (c·∇φ_j) + κ² ∫ φ_i φ_j.
inline SparseMatrixCSC assemble_stiffness(const FeSpace& space,
                                          const DifferentialOperatorSpec& op) {
  op.validate(space);
  int degree = 2 * space.order();
  auto rule = detail::reference_rule(space.dim(), degree);
  Index nd = space.dofs_per_element();
  int dim = space.dim();
  std::vector<Real> shape(nd), gx(nd), gy(nd);
  std::vector<Triplet> trips;

  bool diffusion = op.has_diffusion();
  bool advection = !op.advection.empty();
  bool reaction = op.reaction != 0.0;

  for (Index e = 0; e < space.mesh().n_elements(); ++e) {
    Real scale = detail::measure_scale(space.mesh(), e);
    detail::ElementGeometry g = detail::ElementGeometry::of(space.mesh(), e);
    const Index* dofs = space.element_dofs(e);
    Real a_e = diffusion ? op.diffusion_on_element(e) : 0.0;
    std::vector<Real> local(nd * nd, 0.0);
    for (const auto& q : rule) {
      Real w = q.w * scale;
      space.shape_values(q.xi, q.eta, {0, 0}, shape.data());
      // physical gradients
      if (dim == 1) {
        space.shape_values(q.xi, q.eta, {1, 0}, gx.data());
        for (Index k = 0; k < nd; ++k) gx[k] *= g.ji[0];
      } else {
        std::vector<Real> rx(nd), ry(nd);
        space.shape_values(q.xi, q.eta, {1, 0}, rx.data());
        space.shape_values(q.xi, q.eta, {0, 1}, ry.data());
        for (Index k = 0; k < nd; ++k) {
          gx[k] = g.ji[0] * rx[k] + g.ji[2] * ry[k];
          gy[k] = g.ji[1] * rx[k] + g.ji[3] * ry[k];
        }
      }
      for (Index i = 0; i < nd; ++i)
        for (Index j = 0; j < nd; ++j) {
          Real v = 0.0;
          if (diffusion) {
            Real gg = gx[i] * gx[j];
            if (dim == 2) gg += gy[i] * gy[j];
            v += a_e * gg;
          }
          if (advection) {
            Real cg = op.advection[0] * gx[j];
            if (dim == 2) cg += op.advection[1] * gy[j];
            v += shape[i] * cg;
          }
          if (reaction) v += op.reaction * shape[i] * shape[j];
          local[i * nd + j] += w * v;
        }
    }
    for (Index i = 0; i < nd; ++i)
      for (Index j = 0; j < nd; ++j) trips.push_back({dofs[i], dofs[j], local[i * nd + j]});
  }
  return csc_from_triplets(space.n_dofs(), space.n_dofs(), std::move(trips));
}

/// Load vector b_i = ∫ φ_i f for a scalar field, integrated with a rule one
/// degree above the mass rule.
inline Vector assemble_load(const FeSpace& space, const ScalarField& f) {
  int degree = 2 * space.order() + 2;
  auto rule = detail::reference_rule(space.dim(), degree);
  Index nd = space.dofs_per_element();
  std::vector<Real> shape(nd);
  Vector b(space.n_dofs(), 0.0);
  for (Index e = 0; e < space.mesh().n_elements(); ++e) {
    Real scale = detail::measure_scale(space.mesh(), e);
    const Index* dofs = space.element_dofs(e);
    const Index* el = space.mesh().element(e);
    Real x0 = space.mesh().node_x(el[0]);
    for (const auto& q : rule) {
      Real x[2];
      if (space.dim() == 1) {
        Real h = space.mesh().node_x(el[1]) - x0;
        x[0] = x0 + h * q.xi;
        x[1] = 0.0;
      } else {
        Real y0 = space.mesh().node_y(el[0]);
        Real j00 = space.mesh().node_x(el[1]) - x0, j01 = space.mesh().node_x(el[2]) - x0;
        Real j10 = space.mesh().node_y(el[1]) - y0, j11 = space.mesh().node_y(el[2]) - y0;
        x[0] = x0 + j00 * q.xi + j01 * q.eta;
        x[1] = y0 + j10 * q.xi + j11 * q.eta;
      }
      Real fv = f(x);
      if (fv == 0.0) continue;
      space.shape_values(q.xi, q.eta, {0, 0}, shape.data());
      Real w = q.w * scale * fv;
      for (Index i = 0; i < nd; ++i) b[dofs[i]] += w * shape[i];
    }
  }
  return b;
}

/// Load vector for a right-hand side given as DoF coefficients: b = M g.
inline Vector assemble_load(const FeSpace& space, const SparseMatrixCSC& mass,
                            const Vector& g) {
  (void)space;
  return matvec(mass, g);
}

inline Vector assemble_load(const FeSpace& space, const DifferentialOperatorSpec& op) {
  if (std::holds_alternative<ScalarField>(op.rhs))
    return assemble_load(space, std::get<ScalarField>(op.rhs));
  if (std::holds_alternative<Vector>(op.rhs))
    return assemble_load(space, assemble_mass(space), std::get<Vector>(op.rhs));
  return Vector(space.n_dofs(), 0.0);
}

/// Row-sum mass lumping. Valid order-1 mass matrices always lump positive;
/// order-2 bases may produce non-positive row sums, which is reported as an
/// error (that basis needs a different lumping rule).
inline Vector lump_mass(const SparseMatrixCSC& m) {
  if (m.nrows != m.ncols) throw DimensionError("lump_mass: matrix must be square");
  Vector d(m.nrows, 0.0);
  Real total = 0.0;
  for (Index j = 0; j < m.ncols; ++j)
    for (Index p = m.col_ptr[j]; p < m.col_ptr[j + 1]; ++p) {
      d[m.row_idx[p]] += m.values[p];
      total += m.values[p];
    }
  // Entries that vanish up to round-off (quadratic-triangle vertex rows sum
  // to exactly zero) count as non-positive.
  Real floor = 1e-12 * std::abs(total) / static_cast<Real>(m.nrows);
  for (Index i = 0; i < m.nrows; ++i)
    if (!(d[i] > floor))
      throw NumericalError("lump_mass: non-positive lumped entry at dof " +
                           std::to_string(i) +
                           " (row-sum lumping is invalid for this basis)");
  return d;
}

/// Positive lumped mass for prior construction. Uses row sums where valid;
/// quadratic triangles have zero vertex row sums, so those spaces fall back
/// to diagonal (HRZ) scaling, which preserves the total mass and stays
/// positive.
inline Vector lumped_mass_vector(const SparseMatrixCSC& m) {
  Vector d(m.nrows, 0.0);
  Real total = 0.0;
  for (Index j = 0; j < m.ncols; ++j)
    for (Index p = m.col_ptr[j]; p < m.col_ptr[j + 1]; ++p) {
      d[m.row_idx[p]] += m.values[p];
      total += m.values[p];
    }
  Real floor = 1e-12 * std::abs(total) / static_cast<Real>(m.nrows);
  bool positive = true;
  for (Real v : d)
    if (!(v > floor)) positive = false;
  if (positive) return d;

  Vector diag = csc_diag(m);
  Real diag_sum = 0.0;
  for (Real v : diag) diag_sum += v;
  require(diag_sum > 0.0, "lumped_mass_vector: degenerate mass matrix");
  Real s = total / diag_sum;
  for (Real& v : diag) v *= s;
  return diag;
}

}  // namespace gmrfpde::fem
