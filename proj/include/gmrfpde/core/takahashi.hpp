#pragma once

#include <algorithm>
#include <vector>

#include "gmrfpde/core/cholesky.hpp"
#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

/// Selected inverse of Q = Pᵀ L Lᵀ P on the (permuted-back) pattern of
/// L + Lᵀ. The recursion runs over the filled factor pattern, on which the
/// computed entries equal the corresponding entries of Q⁻¹ exactly.
///
/// Recursion (Takahashi / Erisman-Tinney, LLᵀ form), permuted coordinates:
///   S(i,j) = δ_ij / L_ii² - (1/L_ii) Σ_{k>i, L_ki≠0} L_ki S(k,j),  j ≥ i,
/// evaluated for i = n-1 .. 0 and j descending within the pattern column.
inline SparseMatrixCSC takahashi_selected_inverse(const CholeskyFactor& f) {
  const SparseMatrixCSC& L = f.L;
  Index n = f.dim();

  // Full symmetric pattern of L + Lᵀ with value storage.
  SparseMatrixCSC s = add(L, transpose(L));
  for (Real& v : s.values) v = 0.0;

  // Random access into a column of s via per-column binary search.
  auto entry_ptr = [&](Index i, Index j) -> Real* {
    const Index* first = s.row_idx.data() + s.col_ptr[j];
    const Index* last = s.row_idx.data() + s.col_ptr[j + 1];
    const Index* it = std::lower_bound(first, last, i);
    if (it == last || *it != i) return nullptr;
    return s.values.data() + (it - s.row_idx.data());
  };

  for (Index i = n - 1; i >= 0; --i) {
    Real lii = L.values[L.col_ptr[i]];
    // Entries of column i of s at rows >= i, highest row first.
    for (Index p = s.col_ptr[i + 1] - 1; p >= s.col_ptr[i]; --p) {
      Index j = s.row_idx[p];
      if (j < i) continue;
      Real acc = (i == j) ? 1.0 / (lii * lii) : 0.0;
      for (Index q = L.col_ptr[i] + 1; q < L.col_ptr[i + 1]; ++q) {
        Index k = L.row_idx[q];  // k > i
        // S(k, j) = S(j, k): look the entry up in the taller column.
        Real* skj = (k >= j) ? entry_ptr(k, j) : entry_ptr(j, k);
        acc -= L.values[q] / lii * (skj ? *skj : 0.0);
      }
      s.values[p] = acc;
      if (j != i) {
        Real* sym = entry_ptr(i, j);
        if (sym) *sym = acc;
      }
    }
  }

  // Map back to original indices.
  std::vector<Triplet> trips;
  trips.reserve(s.nnz());
  for (Index j = 0; j < n; ++j)
    for (Index p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p)
      trips.push_back({f.perm[s.row_idx[p]], f.perm[j], s.values[p]});
  return csc_from_triplets(n, n, std::move(trips));
}

/// diag(Q⁻¹) without assembling the full selected inverse result matrix.
inline Vector takahashi_diagonal(const CholeskyFactor& f) {
  SparseMatrixCSC inv = takahashi_selected_inverse(f);
  return csc_diag(inv);
}

}  // namespace gmrfpde
