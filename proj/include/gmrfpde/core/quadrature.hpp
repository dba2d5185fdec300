#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

struct QuadratureRule {
  Vector points;
  Vector weights;
};

namespace detail {

/// Eigen-decomposition of a symmetric tridiagonal matrix by the implicit QL
/// sweep (tql2). `diag` holds the diagonal, `off` the subdiagonal (off[0]
/// unused). On return diag holds the eigenvalues and z[i] the first component
/// of each normalized eigenvector, which is all Golub-Welsch needs.
inline void tridiagonal_eigen_first_components(Vector& diag, Vector& off, Vector& z) {
  Index n = static_cast<Index>(diag.size());
  z.assign(n, 0.0);
  if (n == 0) return;
  z[0] = 1.0;
  if (n == 1) return;

  // Shift so e[i] couples i and i+1 (e[n-1] unused).
  Vector e(n, 0.0);
  for (Index i = 1; i < n; ++i) e[i - 1] = off[i];

  auto sign_of = [](Real a, Real b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); };

  for (Index l = 0; l < n; ++l) {
    Index iter = 0;
    while (true) {
      Index m = l;
      for (; m < n - 1; ++m) {
        Real dd = std::abs(diag[m]) + std::abs(diag[m + 1]);
        if (std::abs(e[m]) <= 2.3e-16 * dd + 1e-300) break;
      }
      if (m == l) break;
      if (iter++ == 60) throw NumericalError("tridiagonal eigen: no convergence");

      Real g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
      Real r = std::hypot(g, 1.0);
      g = diag[m] - diag[l] + e[l] / (g + sign_of(r, g));
      Real s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (Index i = m - 1; i >= l; --i) {
        Real f = s * e[i];
        Real b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          diag[i + 1] -= p;
          e[m] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = diag[i + 1] - p;
        r = (diag[i] - g) * s + 2.0 * c * b;
        p = s * r;
        diag[i + 1] = g + p;
        g = c * r - b;
        Real zi = z[i], zi1 = z[i + 1];
        z[i + 1] = s * zi + c * zi1;
        z[i] = c * zi - s * zi1;
      }
      if (underflow) continue;
      diag[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }

  // Sort eigenvalues ascending, carrying the first components along.
  std::vector<Index> idx(n);
  for (Index i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return diag[a] < diag[b]; });
  Vector d2(n), z2(n);
  for (Index i = 0; i < n; ++i) {
    d2[i] = diag[idx[i]];
    z2[i] = z[idx[i]];
  }
  diag = d2;
  z = z2;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1] via Golub-Welsch.
inline QuadratureRule gauss_legendre(Index n) {
  require(n >= 1, "gauss_legendre: n >= 1");
  Vector diag(n, 0.0), off(n, 0.0), z;
  for (Index i = 1; i < n; ++i) {
    Real k = static_cast<Real>(i);
    off[i] = k / std::sqrt(4.0 * k * k - 1.0);
  }
  detail::tridiagonal_eigen_first_components(diag, off, z);
  QuadratureRule rule;
  rule.points = diag;
  rule.weights.resize(n);
  for (Index i = 0; i < n; ++i) rule.weights[i] = 2.0 * z[i] * z[i];
  return rule;
}

/// Gauss-Legendre mapped to [a, b].
inline QuadratureRule gauss_legendre(Index n, Real a, Real b) {
  QuadratureRule rule = gauss_legendre(n);
  Real mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (Index i = 0; i < n; ++i) {
    rule.points[i] = mid + half * rule.points[i];
    rule.weights[i] *= half;
  }
  return rule;
}

/// n-point Gauss-Hermite rule (weight e^{-x²} on the real line).
inline QuadratureRule gauss_hermite(Index n) {
  require(n >= 1, "gauss_hermite: n >= 1");
  Vector diag(n, 0.0), off(n, 0.0), z;
  for (Index i = 1; i < n; ++i) off[i] = std::sqrt(0.5 * static_cast<Real>(i));
  detail::tridiagonal_eigen_first_components(diag, off, z);
  QuadratureRule rule;
  rule.points = diag;
  rule.weights.resize(n);
  Real beta0 = std::sqrt(M_PI);
  for (Index i = 0; i < n; ++i) rule.weights[i] = beta0 * z[i] * z[i];
  return rule;
}

struct TrianglePoint {
  Real x, y, w;
};

/// Quadrature on the reference triangle {(x,y): x,y >= 0, x+y <= 1}, exact for
/// polynomials up to `degree`. Built as a collapsed tensor Gauss rule
/// (x = ξ, y = η(1-ξ), Jacobian 1-ξ), which is exact for the stated degree.
inline std::vector<TrianglePoint> triangle_rule(Index degree) {
  Index n_xi = (degree + 3) / 2;   // integrand degree in ξ is degree + 1
  Index n_eta = (degree + 2) / 2;  // and `degree` in η
  QuadratureRule gxi = gauss_legendre(std::max<Index>(n_xi, 1), 0.0, 1.0);
  QuadratureRule geta = gauss_legendre(std::max<Index>(n_eta, 1), 0.0, 1.0);
  std::vector<TrianglePoint> pts;
  pts.reserve(gxi.points.size() * geta.points.size());
  for (std::size_t i = 0; i < gxi.points.size(); ++i) {
    for (std::size_t j = 0; j < geta.points.size(); ++j) {
      Real xi = gxi.points[i];
      Real eta = geta.points[j];
      pts.push_back({xi, eta * (1.0 - xi), gxi.weights[i] * geta.weights[j] * (1.0 - xi)});
    }
  }
  return pts;
}

}  // namespace gmrfpde
