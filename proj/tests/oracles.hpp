#pragma once

// Dense reference implementations used as independent oracles in the tests.
// Everything here works on row-major dense storage and never touches the
// sparse code paths it is checking.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gmrfpde/core/rng.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace oracle {

using gmrfpde::Index;
using gmrfpde::Real;
using gmrfpde::Vector;

struct Dense {
  Index nrows = 0, ncols = 0;
  std::vector<Real> a;  // row-major

  Dense() = default;
  Dense(Index nr, Index nc) : nrows(nr), ncols(nc), a(nr * nc, 0.0) {}

  Real& operator()(Index i, Index j) { return a[i * ncols + j]; }
  Real operator()(Index i, Index j) const { return a[i * ncols + j]; }

  static Dense identity(Index n) {
    Dense m(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Dense from_sparse(const gmrfpde::SparseMatrixCSC& s) {
  Dense m(s.nrows, s.ncols);
  for (Index j = 0; j < s.ncols; ++j)
    for (Index p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p)
      m(s.row_idx[p], j) += s.values[p];
  return m;
}

inline Dense matmul(const Dense& x, const Dense& y) {
  Dense z(x.nrows, y.ncols);
  for (Index i = 0; i < x.nrows; ++i)
    for (Index k = 0; k < x.ncols; ++k) {
      Real xik = x(i, k);
      if (xik == 0.0) continue;
      for (Index j = 0; j < y.ncols; ++j) z(i, j) += xik * y(k, j);
    }
  return z;
}

inline Dense transpose(const Dense& x) {
  Dense z(x.ncols, x.nrows);
  for (Index i = 0; i < x.nrows; ++i)
    for (Index j = 0; j < x.ncols; ++j) z(j, i) = x(i, j);
  return z;
}

inline Dense add(const Dense& x, const Dense& y, Real alpha = 1.0, Real beta = 1.0) {
  Dense z(x.nrows, x.ncols);
  for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] = alpha * x.a[i] + beta * y.a[i];
  return z;
}

inline Vector matvec(const Dense& x, const Vector& v) {
  Vector y(x.nrows, 0.0);
  for (Index i = 0; i < x.nrows; ++i)
    for (Index j = 0; j < x.ncols; ++j) y[i] += x(i, j) * v[j];
  return y;
}

inline Real frobenius(const Dense& x) {
  Real s = 0.0;
  for (Real v : x.a) s += v * v;
  return std::sqrt(s);
}

inline Real frobenius_distance(const Dense& x, const Dense& y) {
  Real s = 0.0;
  for (std::size_t i = 0; i < x.a.size(); ++i) {
    Real d = x.a[i] - y.a[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Dense lower Cholesky, throws on non-SPD input.
inline Dense cholesky(const Dense& q) {
  Index n = q.nrows;
  Dense l(n, n);
  for (Index j = 0; j < n; ++j) {
    Real d = q(j, j);
    for (Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw std::runtime_error("oracle cholesky: not SPD");
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      Real s = q(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

inline Vector solve_spd(const Dense& q, const Vector& b) {
  Dense l = cholesky(q);
  Index n = q.nrows;
  Vector y(b);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
    y[i] /= l(i, i);
  }
  for (Index i = n - 1; i >= 0; --i) {
    for (Index k = i + 1; k < n; ++k) y[i] -= l(k, i) * y[k];
    y[i] /= l(i, i);
  }
  return y;
}

inline Dense inverse_spd(const Dense& q) {
  Index n = q.nrows;
  Dense inv(n, n);
  for (Index j = 0; j < n; ++j) {
    Vector e(n, 0.0);
    e[j] = 1.0;
    Vector col = solve_spd(q, e);
    for (Index i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

/// General dense solve with partial pivoting (for nonsymmetric oracles).
inline Vector solve_lu(Dense a, Vector b) {
  Index n = a.nrows;
  for (Index k = 0; k < n; ++k) {
    Index piv = k;
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    if (a(piv, k) == 0.0) throw std::runtime_error("oracle lu: singular");
    if (piv != k) {
      for (Index j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (Index i = k + 1; i < n; ++i) {
      Real f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (Index j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  for (Index i = n - 1; i >= 0; --i) {
    for (Index j = i + 1; j < n; ++j) b[i] -= a(i, j) * b[j];
    b[i] /= a(i, i);
  }
  return b;
}

struct ConditioningResult {
  Vector mean;
  Dense covariance;
};

/// Dense joint-Gaussian conditioning: prior N(mu, Q^-1), observation
/// y | u ~ N(A u + b, diag(noise)^-1).
inline ConditioningResult condition_dense(const Vector& mu, const Dense& q,
                                          const Dense& a, const Vector& b,
                                          const Vector& y, const Vector& noise_diag) {
  Dense at = transpose(a);
  Dense atq(at.nrows, at.ncols);
  for (Index i = 0; i < at.nrows; ++i)
    for (Index j = 0; j < at.ncols; ++j) atq(i, j) = at(i, j) * noise_diag[j];
  Dense q_post = add(q, matmul(atq, a));
  Dense cov = inverse_spd(q_post);
  Vector residual(y);
  Vector amu = matvec(a, mu);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= amu[i] + b[i];
  Vector rhs = matvec(atq, residual);
  Vector mean = matvec(cov, rhs);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += mu[i];
  return {mean, cov};
}

/// Central finite-difference Jacobian of a vector map.
inline Dense fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                         Real h = 1e-6) {
  Vector fx = f(x);
  Dense jac(static_cast<Index>(fx.size()), static_cast<Index>(x.size()));
  for (Index j = 0; j < static_cast<Index>(x.size()); ++j) {
    Vector xp(x), xm(x);
    xp[j] += h;
    xm[j] -= h;
    Vector fp = f(xp), fm = f(xm);
    for (Index i = 0; i < jac.nrows; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

// ----- seeded SPD test corpus ------------------------------------------------

/// Mixed-pattern SPD matrices with n <= 64: diagonal, banded, 2D grid
/// Laplacians (+ shift), random AᵀA + n·I, arrow matrices.
inline std::vector<gmrfpde::SparseMatrixCSC> spd_corpus(int count, std::uint64_t seed) {
  using gmrfpde::SparseMatrixCSC;
  using gmrfpde::Triplet;
  std::vector<SparseMatrixCSC> out;
  gmrfpde::Rng rng(seed);
  for (int c = 0; c < count; ++c) {
    int kind = c % 5;
    std::vector<Triplet> t;
    Index n;
    switch (kind) {
      case 0: {  // diagonal
        n = 4 + (c * 7) % 61;
        for (Index i = 0; i < n; ++i) t.push_back({i, i, 0.5 + 4.0 * rng.uniform()});
        break;
      }
      case 1: {  // banded (bandwidth 1..3), diagonally dominant
        n = 6 + (c * 5) % 59;
        Index bw = 1 + c % 3;
        for (Index i = 0; i < n; ++i) {
          for (Index k = 1; k <= bw; ++k)
            if (i + k < n) {
              Real v = 2.0 * rng.uniform() - 1.0;
              t.push_back({i, i + k, v});
              t.push_back({i + k, i, v});
            }
          t.push_back({i, i, 2.0 * bw + 1.0 + rng.uniform()});
        }
        break;
      }
      case 2: {  // 2D 5-point Laplacian + shift
        Index g = 3 + c % 6;
        n = g * g;
        auto id = [g](Index i, Index j) { return i * g + j; };
        for (Index i = 0; i < g; ++i)
          for (Index j = 0; j < g; ++j) {
            t.push_back({id(i, j), id(i, j), 4.0 + 0.1 * (1.0 + rng.uniform())});
            if (i + 1 < g) {
              t.push_back({id(i, j), id(i + 1, j), -1.0});
              t.push_back({id(i + 1, j), id(i, j), -1.0});
            }
            if (j + 1 < g) {
              t.push_back({id(i, j), id(i, j + 1), -1.0});
              t.push_back({id(i, j + 1), id(i, j), -1.0});
            }
          }
        break;
      }
      case 3: {  // sparse random AᵀA + n·I
        n = 8 + (c * 3) % 57;
        Dense a(n, n);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j)
            if (rng.uniform() < 0.15) a(i, j) = 2.0 * rng.uniform() - 1.0;
        Dense ata = matmul(transpose(a), a);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j) {
            Real v = ata(i, j) + (i == j ? 0.5 * n : 0.0);
            if (v != 0.0) t.push_back({i, j, v});
          }
        break;
      }
      default: {  // arrow
        n = 5 + (c * 11) % 60;
        for (Index i = 1; i < n; ++i) {
          Real v = 2.0 * rng.uniform() - 1.0;
          t.push_back({0, i, v});
          t.push_back({i, 0, v});
          t.push_back({i, i, 2.0 + rng.uniform()});
        }
        t.push_back({0, 0, static_cast<Real>(2 * n)});
        break;
      }
    }
    out.push_back(gmrfpde::csc_from_triplets(n, n, std::move(t)));
  }
  return out;
}

}  // namespace oracle
