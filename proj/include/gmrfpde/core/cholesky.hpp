#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gmrfpde/core/amd.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

/// Symbolic phase of the factorization: elimination tree and column layout of
/// L for a fixed pattern and permutation. Reusable across numeric refactors
/// with matching pattern (Gauss-Newton iterates, spatiotemporal refactors).
struct SymbolicFactor {
  std::vector<Index> perm;      // new -> old
  std::vector<Index> perm_inv;  // old -> new
  std::vector<Index> parent;    // elimination tree over permuted indices
  std::vector<Index> col_ptr;   // column layout of L (including diagonal)
  Index n = 0;
  Index nnz_L = 0;
};

namespace detail {

/// Elimination tree of a permuted symmetric pattern (upper-triangle walk).
inline std::vector<Index> elimination_tree(const SparseMatrixCSC& a) {
  Index n = a.ncols;
  std::vector<Index> parent(n, -1), ancestor(n, -1);
  for (Index k = 0; k < n; ++k) {
    for (Index p = a.col_ptr[k]; p < a.col_ptr[k + 1]; ++p) {
      Index i = a.row_idx[p];
      while (i != -1 && i < k) {
        Index next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) parent[i] = k;
        i = next;
      }
    }
  }
  return parent;
}

/// Pattern of row k of L: nodes reached by walking the etree up from each
/// entry of A(0:k-1, k). Returned in topological (increasing-depth-safe)
/// order: out[top..n-1].
inline Index ereach(const SparseMatrixCSC& a, Index k, const std::vector<Index>& parent,
                    std::vector<Index>& out, std::vector<Index>& stamp, Index mark) {
  Index n = a.ncols;
  Index top = n;
  stamp[k] = mark;
  for (Index p = a.col_ptr[k]; p < a.col_ptr[k + 1]; ++p) {
    Index i = a.row_idx[p];
    if (i > k) continue;
    Index len = 0;
    for (; stamp[i] != mark; i = parent[i]) {
      out[len++] = i;
      stamp[i] = mark;
    }
    while (len > 0) out[--top] = out[--len];
  }
  return top;
}

}  // namespace detail

inline SymbolicFactor symbolic_analyze(const SparseMatrixCSC& q,
                                       const std::vector<Index>& perm) {
  if (q.nrows != q.ncols) throw DimensionError("symbolic_analyze: matrix not square");
  SymbolicFactor s;
  s.n = q.nrows;
  s.perm = perm;
  s.perm_inv = invert_permutation(perm);
  SparseMatrixCSC ap = permute_symmetric(q, perm);
  s.parent = detail::elimination_tree(ap);

  std::vector<Index> counts(s.n, 1);  // diagonal
  std::vector<Index> work(s.n), stamp(s.n, -1);
  for (Index k = 0; k < s.n; ++k) {
    Index top = detail::ereach(ap, k, s.parent, work, stamp, k);
    for (Index t = top; t < s.n; ++t) counts[work[t]]++;
  }
  s.col_ptr.assign(s.n + 1, 0);
  for (Index j = 0; j < s.n; ++j) s.col_ptr[j + 1] = s.col_ptr[j] + counts[j];
  s.nnz_L = s.col_ptr[s.n];
  return s;
}

/// Lower-triangular Cholesky factor with its fill-reducing permutation:
/// P Q Pᵀ = L Lᵀ with (P x)_i = x_perm[i].
struct CholeskyFactor {
  SparseMatrixCSC L;            // lower triangular, diagonal first in each column
  std::vector<Index> perm;      // new -> old
  std::vector<Index> perm_inv;  // old -> new

  Index dim() const { return L.ncols; }

  Vector apply_perm(const Vector& x) const {
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[perm[i]];
    return y;
  }
  Vector apply_perm_inv(const Vector& x) const {
    Vector y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[perm[i]] = x[i];
    return y;
  }
};

/// Numeric up-looking factorization against a precomputed symbolic layout.
/// The matrix must have the pattern used in symbolic_analyze (values free).
inline CholeskyFactor cholesky_refactor(const SymbolicFactor& s, const SparseMatrixCSC& q) {
  Index n = s.n;
  if (q.nrows != n || q.ncols != n)
    throw DimensionError("cholesky_refactor: dimension mismatch");
  SparseMatrixCSC ap = permute_symmetric(q, s.perm);

  CholeskyFactor f;
  f.perm = s.perm;
  f.perm_inv = s.perm_inv;
  f.L.nrows = f.L.ncols = n;
  f.L.col_ptr = s.col_ptr;
  f.L.row_idx.assign(s.nnz_L, 0);
  f.L.values.assign(s.nnz_L, 0.0);

  std::vector<Index> cursor(n);  // next free slot per column (diagonal slot reserved)
  for (Index j = 0; j < n; ++j) cursor[j] = s.col_ptr[j] + 1;

  std::vector<Real> x(n, 0.0);
  std::vector<Index> pattern(n), stamp(n, -1);
  for (Index k = 0; k < n; ++k) {
    Index top = detail::ereach(ap, k, s.parent, pattern, stamp, k);
    Real d = 0.0;
    x[k] = 0.0;
    for (Index p = ap.col_ptr[k]; p < ap.col_ptr[k + 1]; ++p) {
      Index i = ap.row_idx[p];
      if (i <= k) x[i] = ap.values[p];
    }
    d = x[k];
    for (Index t = top; t < n; ++t) {
      Index j = pattern[t];
      Real lkj = x[j] / f.L.values[s.col_ptr[j]];
      x[j] = 0.0;
      for (Index p = s.col_ptr[j] + 1; p < cursor[j]; ++p)
        x[f.L.row_idx[p]] -= f.L.values[p] * lkj;
      d -= lkj * lkj;
      Index slot = cursor[j]++;
      f.L.row_idx[slot] = k;
      f.L.values[slot] = lkj;
    }
    x[k] = 0.0;  // clear the stale diagonal slot for later fill rows
    if (!(d > 0.0))
      throw NotPositiveDefiniteError(
          "cholesky: non-positive pivot at index " + std::to_string(s.perm[k]),
          s.perm[k]);
    f.L.row_idx[s.col_ptr[k]] = k;
    f.L.values[s.col_ptr[k]] = std::sqrt(d);
  }
  return f;
}

/// Factorizes Q = Pᵀ L Lᵀ P for SPD Q under the given ordering.
inline CholeskyFactor cholesky_factor(const SparseMatrixCSC& q,
                                      const std::vector<Index>& perm) {
  return cholesky_refactor(symbolic_analyze(q, perm), q);
}

/// Factorizes with a fresh AMD ordering.
inline CholeskyFactor cholesky_factor(const SparseMatrixCSC& q) {
  return cholesky_factor(q, amd_order(q));
}

enum class TriangularMode { kLower, kUpper, kFull };

/// Triangular and full solves. kLower solves L y = b and kUpper solves
/// Lᵀ x = b in permuted coordinates; kFull returns Q⁻¹ b with the
/// permutation handled internally.
inline Vector solve_triangular(const CholeskyFactor& f, const Vector& b,
                               TriangularMode mode) {
  Index n = f.dim();
  if (static_cast<Index>(b.size()) != n)
    throw DimensionError("solve_triangular: dimension mismatch");
  const SparseMatrixCSC& L = f.L;

  auto lower = [&](Vector& y) {
    for (Index j = 0; j < n; ++j) {
      y[j] /= L.values[L.col_ptr[j]];
      Real yj = y[j];
      for (Index p = L.col_ptr[j] + 1; p < L.col_ptr[j + 1]; ++p)
        y[L.row_idx[p]] -= L.values[p] * yj;
    }
  };
  auto upper = [&](Vector& y) {
    for (Index j = n - 1; j >= 0; --j) {
      Real s = y[j];
      for (Index p = L.col_ptr[j] + 1; p < L.col_ptr[j + 1]; ++p)
        s -= L.values[p] * y[L.row_idx[p]];
      y[j] = s / L.values[L.col_ptr[j]];
    }
  };

  switch (mode) {
    case TriangularMode::kLower: {
      Vector y(b);
      lower(y);
      return y;
    }
    case TriangularMode::kUpper: {
      Vector y(b);
      upper(y);
      return y;
    }
    case TriangularMode::kFull: {
      Vector y = f.apply_perm(b);
      lower(y);
      upper(y);
      return f.apply_perm_inv(y);
    }
  }
  throw ContractError("solve_triangular: unknown mode");
}

/// Q⁻¹ b via the cached factor.
inline Vector solve(const CholeskyFactor& f, const Vector& b) {
  return solve_triangular(f, b, TriangularMode::kFull);
}

}  // namespace gmrfpde
