#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

struct Triplet {
  Index row;
  Index col;
  Real value;
};

/// Compressed sparse column matrix. Within each column, row indices are
/// strictly increasing and there are no structural duplicates. Explicitly
/// stored zeros are allowed (they pin sparsity patterns across refactorization).
struct SparseMatrixCSC {
  Index nrows = 0;
  Index ncols = 0;
  std::vector<Index> col_ptr;  // length ncols + 1
  std::vector<Index> row_idx;  // length nnz
  std::vector<Real> values;    // length nnz

  SparseMatrixCSC() : col_ptr(1, 0) {}
  SparseMatrixCSC(Index nr, Index nc) : nrows(nr), ncols(nc), col_ptr(nc + 1, 0) {}

  Index nnz() const { return static_cast<Index>(row_idx.size()); }

  /// Value at (i, j); zero if not stored. Binary search within column j.
  Real coeff(Index i, Index j) const {
    const Index* first = row_idx.data() + col_ptr[j];
    const Index* last = row_idx.data() + col_ptr[j + 1];
    const Index* it = std::lower_bound(first, last, i);
    if (it != last && *it == i) return values[it - row_idx.data()];
    return 0.0;
  }

  void check_invariants() const {
    if (static_cast<Index>(col_ptr.size()) != ncols + 1)
      throw StructuralError("csc: col_ptr length mismatch");
    if (col_ptr.front() != 0 || col_ptr.back() != nnz())
      throw StructuralError("csc: col_ptr endpoints invalid");
    for (Index j = 0; j < ncols; ++j) {
      if (col_ptr[j] > col_ptr[j + 1]) throw StructuralError("csc: col_ptr not monotone");
      for (Index p = col_ptr[j]; p < col_ptr[j + 1]; ++p) {
        if (row_idx[p] < 0 || row_idx[p] >= nrows)
          throw StructuralError("csc: row index out of range");
        if (p > col_ptr[j] && row_idx[p] <= row_idx[p - 1])
          throw StructuralError("csc: rows not strictly increasing in column");
      }
    }
  }
};

/// Builds a canonical CSC matrix from triplets; duplicates are summed.
inline SparseMatrixCSC csc_from_triplets(Index nrows, Index ncols,
                                         std::vector<Triplet> triplets) {
  for (const Triplet& t : triplets) {
    if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
      throw StructuralError("csc_from_triplets: index out of range (" +
                            std::to_string(t.row) + "," + std::to_string(t.col) + ")");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.col, a.row) < std::tie(b.col, b.row);
  });
  SparseMatrixCSC m(nrows, ncols);
  m.row_idx.reserve(triplets.size());
  m.values.reserve(triplets.size());
  std::size_t k = 0;
  for (Index j = 0; j < ncols; ++j) {
    while (k < triplets.size() && triplets[k].col == j) {
      Index r = triplets[k].row;
      Real v = triplets[k].value;
      ++k;
      while (k < triplets.size() && triplets[k].col == j && triplets[k].row == r) {
        v += triplets[k].value;
        ++k;
      }
      m.row_idx.push_back(r);
      m.values.push_back(v);
    }
    m.col_ptr[j + 1] = static_cast<Index>(m.row_idx.size());
  }
  return m;
}

inline SparseMatrixCSC csc_identity(Index n) {
  SparseMatrixCSC m(n, n);
  m.row_idx.resize(n);
  m.values.assign(n, 1.0);
  for (Index i = 0; i < n; ++i) {
    m.row_idx[i] = i;
    m.col_ptr[i + 1] = i + 1;
  }
  return m;
}

inline SparseMatrixCSC csc_diagonal(const Vector& d) {
  Index n = static_cast<Index>(d.size());
  SparseMatrixCSC m = csc_identity(n);
  m.values = d;
  return m;
}

inline Vector csc_diag(const SparseMatrixCSC& a) {
  Vector d(std::min(a.nrows, a.ncols), 0.0);
  for (Index j = 0; j < static_cast<Index>(d.size()); ++j) d[j] = a.coeff(j, j);
  return d;
}

inline SparseMatrixCSC transpose(const SparseMatrixCSC& a) {
  SparseMatrixCSC t(a.ncols, a.nrows);
  std::vector<Index> count(a.nrows, 0);
  for (Index p = 0; p < a.nnz(); ++p) count[a.row_idx[p]]++;
  t.col_ptr.assign(a.nrows + 1, 0);
  for (Index i = 0; i < a.nrows; ++i) t.col_ptr[i + 1] = t.col_ptr[i] + count[i];
  t.row_idx.resize(a.nnz());
  t.values.resize(a.nnz());
  std::vector<Index> next(t.col_ptr.begin(), t.col_ptr.end() - 1);
  for (Index j = 0; j < a.ncols; ++j) {
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) {
      Index q = next[a.row_idx[p]]++;
      t.row_idx[q] = j;
      t.values[q] = a.values[p];
    }
  }
  return t;
}

/// y = A x
inline void matvec(const SparseMatrixCSC& a, const Vector& x, Vector& y) {
  if (static_cast<Index>(x.size()) != a.ncols) throw DimensionError("matvec: size mismatch");
  y.assign(a.nrows, 0.0);
  for (Index j = 0; j < a.ncols; ++j) {
    Real xj = x[j];
    if (xj == 0.0) continue;
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      y[a.row_idx[p]] += a.values[p] * xj;
  }
}

inline Vector matvec(const SparseMatrixCSC& a, const Vector& x) {
  Vector y;
  matvec(a, x, y);
  return y;
}

/// y = Aᵀ x
inline Vector matvec_transpose(const SparseMatrixCSC& a, const Vector& x) {
  if (static_cast<Index>(x.size()) != a.nrows)
    throw DimensionError("matvec_transpose: size mismatch");
  Vector y(a.ncols, 0.0);
  for (Index j = 0; j < a.ncols; ++j) {
    Real s = 0.0;
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      s += a.values[p] * x[a.row_idx[p]];
    y[j] = s;
  }
  return y;
}

/// alpha*A + beta*B. Patterns are merged; entries that cancel numerically are
/// kept as explicit zeros so repeated sums have a stable pattern.
inline SparseMatrixCSC add(const SparseMatrixCSC& a, const SparseMatrixCSC& b,
                           Real alpha = 1.0, Real beta = 1.0) {
  if (a.nrows != b.nrows || a.ncols != b.ncols)
    throw DimensionError("add: shape mismatch");
  SparseMatrixCSC c(a.nrows, a.ncols);
  c.row_idx.reserve(a.nnz() + b.nnz());
  c.values.reserve(a.nnz() + b.nnz());
  for (Index j = 0; j < a.ncols; ++j) {
    Index pa = a.col_ptr[j], ea = a.col_ptr[j + 1];
    Index pb = b.col_ptr[j], eb = b.col_ptr[j + 1];
    while (pa < ea || pb < eb) {
      Index ra = pa < ea ? a.row_idx[pa] : a.nrows;
      Index rb = pb < eb ? b.row_idx[pb] : b.nrows;
      if (ra < rb) {
        c.row_idx.push_back(ra);
        c.values.push_back(alpha * a.values[pa++]);
      } else if (rb < ra) {
        c.row_idx.push_back(rb);
        c.values.push_back(beta * b.values[pb++]);
      } else {
        c.row_idx.push_back(ra);
        c.values.push_back(alpha * a.values[pa++] + beta * b.values[pb++]);
      }
    }
    c.col_ptr[j + 1] = static_cast<Index>(c.row_idx.size());
  }
  return c;
}

/// C = A * B (classic CSC column-at-a-time product with a dense workspace).
inline SparseMatrixCSC multiply(const SparseMatrixCSC& a, const SparseMatrixCSC& b) {
  if (a.ncols != b.nrows) throw DimensionError("multiply: inner dimension mismatch");
  SparseMatrixCSC c(a.nrows, b.ncols);
  std::vector<Real> work(a.nrows, 0.0);
  std::vector<Index> mark(a.nrows, -1);
  std::vector<Index> cols;
  for (Index j = 0; j < b.ncols; ++j) {
    cols.clear();
    for (Index pb = b.col_ptr[j]; pb < b.col_ptr[j + 1]; ++pb) {
      Index k = b.row_idx[pb];
      Real bkj = b.values[pb];
      for (Index pa = a.col_ptr[k]; pa < a.col_ptr[k + 1]; ++pa) {
        Index i = a.row_idx[pa];
        if (mark[i] != j) {
          mark[i] = j;
          work[i] = 0.0;
          cols.push_back(i);
        }
        work[i] += a.values[pa] * bkj;
      }
    }
    std::sort(cols.begin(), cols.end());
    for (Index i : cols) {
      c.row_idx.push_back(i);
      c.values.push_back(work[i]);
    }
    c.col_ptr[j + 1] = static_cast<Index>(c.row_idx.size());
  }
  return c;
}

inline SparseMatrixCSC scale(const SparseMatrixCSC& a, Real alpha) {
  SparseMatrixCSC c(a);
  for (Real& v : c.values) v *= alpha;
  return c;
}

/// diag(d) * A  (row scaling)
inline SparseMatrixCSC scale_rows(const Vector& d, const SparseMatrixCSC& a) {
  if (static_cast<Index>(d.size()) != a.nrows)
    throw DimensionError("scale_rows: size mismatch");
  SparseMatrixCSC c(a);
  for (Index p = 0; p < c.nnz(); ++p) c.values[p] *= d[c.row_idx[p]];
  return c;
}

/// A * diag(d)  (column scaling)
inline SparseMatrixCSC scale_cols(const SparseMatrixCSC& a, const Vector& d) {
  if (static_cast<Index>(d.size()) != a.ncols)
    throw DimensionError("scale_cols: size mismatch");
  SparseMatrixCSC c(a);
  for (Index j = 0; j < c.ncols; ++j)
    for (Index p = c.col_ptr[j]; p < c.col_ptr[j + 1]; ++p) c.values[p] *= d[j];
  return c;
}

/// [A | B] horizontal concatenation.
inline SparseMatrixCSC hcat(const SparseMatrixCSC& a, const SparseMatrixCSC& b) {
  if (a.nrows != b.nrows) throw DimensionError("hcat: row count mismatch");
  SparseMatrixCSC c(a.nrows, a.ncols + b.ncols);
  c.row_idx = a.row_idx;
  c.values = a.values;
  c.row_idx.insert(c.row_idx.end(), b.row_idx.begin(), b.row_idx.end());
  c.values.insert(c.values.end(), b.values.begin(), b.values.end());
  for (Index j = 0; j <= a.ncols; ++j) c.col_ptr[j] = a.col_ptr[j];
  for (Index j = 1; j <= b.ncols; ++j) c.col_ptr[a.ncols + j] = a.nnz() + b.col_ptr[j];
  return c;
}

inline bool is_symmetric(const SparseMatrixCSC& a, Real rel_tol = 1e-12) {
  if (a.nrows != a.ncols) return false;
  SparseMatrixCSC at = transpose(a);
  if (at.col_ptr != a.col_ptr || at.row_idx != a.row_idx) return false;
  Real scale = 0.0;
  for (Real v : a.values) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return true;
  for (Index p = 0; p < a.nnz(); ++p)
    if (std::abs(a.values[p] - at.values[p]) > rel_tol * scale) return false;
  return true;
}

/// (A + Aᵀ)/2. Kills round-off asymmetry before factorization.
inline SparseMatrixCSC symmetrize(const SparseMatrixCSC& a) {
  return add(a, transpose(a), 0.5, 0.5);
}

/// B(i, j) = A(perm[i], perm[j]) for a symmetric A, i.e. B = P A Pᵀ where
/// perm maps new index -> old index.
inline SparseMatrixCSC permute_symmetric(const SparseMatrixCSC& a,
                                         const std::vector<Index>& perm) {
  Index n = a.nrows;
  if (a.ncols != n || static_cast<Index>(perm.size()) != n)
    throw DimensionError("permute_symmetric: shape mismatch");
  std::vector<Index> perm_inv(n);
  for (Index i = 0; i < n; ++i) perm_inv[perm[i]] = i;
  std::vector<Triplet> trips;
  trips.reserve(a.nnz());
  for (Index j = 0; j < n; ++j)
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      trips.push_back({perm_inv[a.row_idx[p]], perm_inv[j], a.values[p]});
  return csc_from_triplets(n, n, std::move(trips));
}

/// Drops rows, keeping those listed in `keep` (sorted ascending), renumbering
/// them 0..keep.size()-1.
inline SparseMatrixCSC select_rows(const SparseMatrixCSC& a, const std::vector<Index>& keep) {
  std::vector<Index> newrow(a.nrows, -1);
  for (Index i = 0; i < static_cast<Index>(keep.size()); ++i) newrow[keep[i]] = i;
  SparseMatrixCSC c(static_cast<Index>(keep.size()), a.ncols);
  for (Index j = 0; j < a.ncols; ++j) {
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p) {
      Index i = newrow[a.row_idx[p]];
      if (i >= 0) {
        c.row_idx.push_back(i);
        c.values.push_back(a.values[p]);
      }
    }
    c.col_ptr[j + 1] = static_cast<Index>(c.row_idx.size());
  }
  return c;
}

inline Real frobenius_norm(const SparseMatrixCSC& a) {
  Real s = 0.0;
  for (Real v : a.values) s += v * v;
  return std::sqrt(s);
}

// ----- coordinate text format ("nrows ncols nnz" header, 0-based) -----------

inline void write_coordinate(const SparseMatrixCSC& a, std::ostream& os) {
  os << a.nrows << " " << a.ncols << " " << a.nnz() << "\n";
  os.precision(17);
  for (Index j = 0; j < a.ncols; ++j)
    for (Index p = a.col_ptr[j]; p < a.col_ptr[j + 1]; ++p)
      os << a.row_idx[p] << " " << j << " " << a.values[p] << "\n";
}

inline void write_coordinate_file(const SparseMatrixCSC& a, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw StructuralError("cannot open " + path + " for writing");
  write_coordinate(a, os);
}

inline SparseMatrixCSC read_coordinate(std::istream& is) {
  Index nrows, ncols, nnz;
  if (!(is >> nrows >> ncols >> nnz)) throw StructuralError("coordinate: bad header");
  std::vector<Triplet> trips;
  trips.reserve(nnz);
  for (Index k = 0; k < nnz; ++k) {
    Triplet t;
    if (!(is >> t.row >> t.col >> t.value))
      throw StructuralError("coordinate: truncated entry list");
    trips.push_back(t);
  }
  return csc_from_triplets(nrows, ncols, std::move(trips));
}

inline SparseMatrixCSC read_coordinate_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StructuralError("cannot open " + path);
  return read_coordinate(is);
}

}  // namespace gmrfpde
