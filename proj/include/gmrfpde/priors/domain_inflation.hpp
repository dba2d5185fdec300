#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmrfpde/fem/mesh.hpp"
#include "gmrfpde/fem/space.hpp"

namespace gmrfpde::priors {

/// FEM space on an artificially inflated domain together with the index map
/// selecting the DoFs of the original (interior) domain.
struct InflatedSpace {
  fem::FeSpace space;
  std::vector<Index> interior_dofs;  // sorted, restriction ∘ prolongation = id
};

namespace detail {

/// Exterior element widths growing geometrically from h up to growth·h until
/// they cover `width`, then rescaled so the total is exactly `width`.
inline std::vector<Real> inflation_widths(Real h, Real width, Real growth) {
  std::vector<Real> w;
  if (width <= 1e-14 * h) return w;
  Real step = std::sqrt(growth);
  Real cur = h;
  Real total = 0.0;
  while (total < width) {
    cur = std::min(cur * step, h * growth);
    w.push_back(cur);
    total += cur;
  }
  for (Real& v : w) v *= width / total;
  return w;
}

inline std::vector<Real> inflate_axis(Real a, Real b, Index n_elements, Real width,
                                      Real growth) {
  Real h = (b - a) / static_cast<Real>(n_elements);
  std::vector<Real> ext = inflation_widths(h, width, growth);
  std::vector<Real> axis;
  Real x = a;
  for (std::size_t k = ext.size(); k > 0; --k) x -= ext[k - 1];
  // Left exterior nodes (wide to narrow toward the interior boundary).
  axis.push_back(x);
  for (std::size_t k = ext.size(); k > 0; --k) {
    x += ext[k - 1];
    axis.push_back(x);
  }
  for (Index i = 1; i <= n_elements; ++i)
    axis.push_back(a + (b - a) * static_cast<Real>(i) / static_cast<Real>(n_elements));
  x = b;
  for (Real wk : ext) {
    x += wk;
    axis.push_back(x);
  }
  return axis;
}

inline std::vector<Index> interior_dofs_of(const fem::FeSpace& space, Real a, Real b,
                                           Real tol) {
  std::vector<Index> keep;
  for (Index d = 0; d < space.n_dofs(); ++d) {
    Real x = space.dof_x(d);
    bool inside = x >= a - tol && x <= b + tol;
    if (space.dim() == 2) {
      Real y = space.dof_y(d);
      inside = inside && y >= a - tol && y <= b + tol;
    }
    if (inside) keep.push_back(d);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace detail

/// Inflated interval [a - width, b + width] with geometrically grown exterior
/// elements (capped at growth × interior size).
inline InflatedSpace inflate_interval(Index n_elements, Real a, Real b, int order,
                                      Real width, Real growth) {
  require(width >= 0.0, "inflate: width must be nonnegative");
  require(growth >= 1.0, "inflate: growth must be >= 1");
  std::vector<Real> axis = detail::inflate_axis(a, b, n_elements, width, growth);
  fem::FeSpace space(fem::build_interval_mesh(axis), order);
  Real h = (b - a) / static_cast<Real>(n_elements);
  return {space, detail::interior_dofs_of(space, a, b, 1e-9 * h)};
}

/// Inflated unit square [-width, 1 + width]².
inline InflatedSpace inflate_unit_square(Index n_per_dim, int order, Real width,
                                         Real growth) {
  require(width >= 0.0, "inflate: width must be nonnegative");
  require(growth >= 1.0, "inflate: growth must be >= 1");
  std::vector<Real> axis = detail::inflate_axis(0.0, 1.0, n_per_dim, width, growth);
  fem::FeSpace space(fem::build_triangulated_grid(axis, axis), order);
  Real h = 1.0 / static_cast<Real>(n_per_dim);
  return {space, detail::interior_dofs_of(space, 0.0, 1.0, 1e-9 * h)};
}

/// Restriction of a full-space vector to the interior DoFs.
inline Vector restrict_to_interior(const InflatedSpace& inflated, const Vector& u) {
  Vector out(inflated.interior_dofs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u[inflated.interior_dofs[i]];
  return out;
}

}  // namespace gmrfpde::priors
