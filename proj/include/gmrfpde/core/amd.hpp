#pragma once

#include <algorithm>
#include <vector>

#include "gmrfpde/core/sparse.hpp"
#include "gmrfpde/core/types.hpp"

namespace gmrfpde {

namespace detail {

/// Quotient-graph approximate minimum degree. Follows the Amestoy/Davis/Duff
/// scheme: variables are eliminated in order of an approximate external
/// degree; eliminated pivots become elements, elements reached through the
/// pivot are absorbed, and indistinguishable variables are merged into
/// supervariables via hashing.
class AmdOrdering {
 public:
  explicit AmdOrdering(const SparseMatrixCSC& pattern) : n_(pattern.nrows) {
    adj_v_.resize(n_);
    adj_e_.resize(n_);
    members_.resize(n_);
    nv_.assign(n_, 1);
    degree_.assign(n_, 0);
    state_.assign(n_, kVariable);
    stamp_.assign(n_, 0);
    w_.assign(n_, -1);
    for (Index j = 0; j < n_; ++j) {
      for (Index p = pattern.col_ptr[j]; p < pattern.col_ptr[j + 1]; ++p) {
        Index i = pattern.row_idx[p];
        if (i != j) adj_v_[j].push_back(i);
      }
      degree_[j] = static_cast<Index>(adj_v_[j].size());
    }
  }

  std::vector<Index> run() {
    build_degree_lists();
    std::vector<Index> order;
    order.reserve(n_);
    Index nelim = 0;
    while (nelim < n_) {
      Index p = pop_min_degree();
      // Emit the pivot and everything merged into it.
      order.push_back(p);
      for (Index m : members_[p]) order.push_back(m);
      nelim += nv_[p];

      std::vector<Index> lp = pivot_reach(p);
      absorb_elements(p, lp);
      state_[p] = lp.empty() ? kDead : kElement;
      adj_e_[p].clear();
      adj_v_[p] = lp;

      update_neighbors(p, lp, nelim);
      merge_indistinguishable(p, lp);
      // Reinsert survivors with refreshed degrees.
      for (Index i : lp)
        if (state_[i] == kVariable) push_degree(i);
    }
    return order;
  }

 private:
  enum State : unsigned char { kVariable, kElement, kDead };

  bool live_var(Index i) const { return state_[i] == kVariable; }
  bool live_element(Index e) const { return state_[e] == kElement; }

  void build_degree_lists() {
    head_.assign(n_ + 1, -1);
    next_.assign(n_, -1);
    prev_.assign(n_, -1);
    bucket_.assign(n_, -1);
    in_list_.assign(n_, false);
    min_degree_ = n_;
    for (Index i = n_ - 1; i >= 0; --i) push_degree(i);
  }

  void push_degree(Index i) {
    if (in_list_[i]) unlink(i);
    Index d = std::min(degree_[i], n_);
    next_[i] = head_[d];
    prev_[i] = -1;
    if (head_[d] >= 0) prev_[head_[d]] = i;
    head_[d] = i;
    bucket_[i] = d;
    in_list_[i] = true;
    min_degree_ = std::min(min_degree_, d);
  }

  void unlink(Index i) {
    Index d = bucket_[i];
    if (prev_[i] >= 0)
      next_[prev_[i]] = next_[i];
    else if (head_[d] == i)
      head_[d] = next_[i];
    if (next_[i] >= 0) prev_[next_[i]] = prev_[i];
    in_list_[i] = false;
  }

  Index pop_min_degree() {
    while (min_degree_ <= n_) {
      Index i = min_degree_ < static_cast<Index>(head_.size()) ? head_[min_degree_] : -1;
      while (i >= 0 && !live_var(i)) {
        Index nx = next_[i];
        unlink(i);
        i = nx;
      }
      if (i >= 0) {
        unlink(i);
        return i;
      }
      ++min_degree_;
    }
    throw StructuralError("amd: degree lists exhausted");  // unreachable
  }

  /// Union of live variable neighbors of p, direct and through elements.
  std::vector<Index> pivot_reach(Index p) {
    ++stamp_counter_;
    stamp_[p] = stamp_counter_;
    std::vector<Index> lp;
    auto visit = [&](Index v) {
      if (live_var(v) && stamp_[v] != stamp_counter_) {
        stamp_[v] = stamp_counter_;
        lp.push_back(v);
      }
    };
    for (Index v : adj_v_[p]) visit(v);
    for (Index e : adj_e_[p])
      if (live_element(e))
        for (Index v : adj_v_[e]) visit(v);
    return lp;
  }

  void absorb_elements(Index p, const std::vector<Index>& lp) {
    for (Index e : adj_e_[p])
      if (live_element(e)) state_[e] = kDead;
    (void)lp;
  }

  void update_neighbors(Index p, const std::vector<Index>& lp, Index nelim) {
    // |Le \ Lp| per touched element, via the one-pass intersection count.
    ++stamp_counter_;
    Index lp_stamp = stamp_counter_;
    for (Index v : lp) stamp_[v] = lp_stamp;

    std::vector<Index> touched;
    for (Index i : lp) {
      for (Index e : adj_e_[i]) {
        if (!live_element(e)) continue;
        if (w_[e] < 0) {
          w_[e] = element_live_size(e);
          touched.push_back(e);
        }
        w_[e] -= nv_[i];
      }
    }

    Index lp_weight = 0;
    for (Index v : lp) lp_weight += nv_[v];

    for (Index i : lp) {
      // Prune variable adjacency: drop dead vars and anything inside Lp
      // (covered by element p from now on).
      std::vector<Index>& av = adj_v_[i];
      std::size_t out = 0;
      Index a_size = 0;
      for (Index v : av) {
        if (!live_var(v) || stamp_[v] == lp_stamp || v == i) continue;
        av[out++] = v;
        a_size += nv_[v];
      }
      av.resize(out);

      // Prune element adjacency, accumulate sum of |Le \ Lp|; absorb elements
      // that ended up entirely inside Lp.
      std::vector<Index>& ae = adj_e_[i];
      out = 0;
      Index ext_sum = 0;
      for (Index e : ae) {
        if (!live_element(e)) continue;
        if (w_[e] <= 0) {
          state_[e] = kDead;  // aggressive absorption: Le subset of Lp
          continue;
        }
        ext_sum += w_[e];
        ae[out++] = e;
      }
      ae.resize(out);
      ae.push_back(p);

      Index ext_p = lp_weight - nv_[i];
      Index bound_active = n_ - nelim - nv_[i];
      Index bound_prev = degree_[i] + ext_p;
      Index bound_approx = a_size + ext_p + ext_sum;
      degree_[i] = std::max<Index>(
          0, std::min(bound_active, std::min(bound_prev, bound_approx)));
    }

    for (Index e : touched) w_[e] = -1;
  }

  Index element_live_size(Index e) {
    std::vector<Index>& le = adj_v_[e];
    std::size_t out = 0;
    Index size = 0;
    for (Index v : le) {
      if (!live_var(v)) continue;
      le[out++] = v;
      size += nv_[v];
    }
    le.resize(out);
    return size;
  }

  void merge_indistinguishable(Index p, std::vector<Index>& lp) {
    std::vector<std::pair<unsigned long long, Index>> hashes;
    hashes.reserve(lp.size());
    for (Index i : lp) {
      if (!live_var(i)) continue;
      unsigned long long h = 0;
      for (Index v : adj_v_[i])
        if (live_var(v)) h += static_cast<unsigned long long>(v) * 2654435761ull;
      for (Index e : adj_e_[i])
        if (live_element(e)) h += static_cast<unsigned long long>(e) * 40503ull;
      hashes.emplace_back(h, i);
    }
    std::sort(hashes.begin(), hashes.end());
    for (std::size_t a = 0; a < hashes.size(); ++a) {
      Index i = hashes[a].second;
      if (!live_var(i)) continue;
      for (std::size_t b = a + 1;
           b < hashes.size() && hashes[b].first == hashes[a].first; ++b) {
        Index j = hashes[b].second;
        if (!live_var(j)) continue;
        if (same_adjacency(i, j)) {
          nv_[i] += nv_[j];
          degree_[i] = std::max<Index>(0, degree_[i] - nv_[j]);
          members_[i].push_back(j);
          members_[i].insert(members_[i].end(), members_[j].begin(), members_[j].end());
          members_[j].clear();
          state_[j] = kDead;
          if (in_list_[j]) unlink(j);
        }
      }
    }
    (void)p;
  }

  bool same_adjacency(Index i, Index j) {
    ++stamp_counter_;
    Index count = 0;
    for (Index v : adj_v_[i])
      if (live_var(v) && v != j) {
        stamp_[v] = stamp_counter_;
        ++count;
      }
    for (Index e : adj_e_[i])
      if (live_element(e)) {
        stamp_[e] = stamp_counter_;
        ++count;
      }
    Index matched = 0;
    for (Index v : adj_v_[j]) {
      if (!live_var(v) || v == i) continue;
      if (stamp_[v] != stamp_counter_) return false;
      ++matched;
    }
    for (Index e : adj_e_[j]) {
      if (!live_element(e)) continue;
      if (stamp_[e] != stamp_counter_) return false;
      ++matched;
    }
    return matched == count;
  }

  Index n_;
  std::vector<std::vector<Index>> adj_v_, adj_e_, members_;
  std::vector<Index> nv_, degree_, w_, stamp_;
  std::vector<State> state_;
  std::vector<Index> head_, next_, prev_, bucket_;
  std::vector<bool> in_list_;
  Index min_degree_ = 0;
  Index stamp_counter_ = 0;
};

}  // namespace detail

/// Fill-reducing ordering of a symmetric sparsity pattern. Returns `perm`
/// mapping new index -> old index, suitable for cholesky_factor.
inline std::vector<Index> amd_order(const SparseMatrixCSC& pattern) {
  if (pattern.nrows != pattern.ncols)
    throw StructuralError("amd_order: pattern must be square");
  SparseMatrixCSC t = transpose(pattern);
  if (t.col_ptr != pattern.col_ptr || t.row_idx != pattern.row_idx)
    throw StructuralError("amd_order: pattern must be structurally symmetric");
  detail::AmdOrdering amd(pattern);
  std::vector<Index> order = amd.run();
  if (static_cast<Index>(order.size()) != pattern.nrows)
    throw StructuralError("amd: incomplete ordering");
  return order;
}

inline std::vector<Index> natural_order(Index n) {
  std::vector<Index> p(n);
  for (Index i = 0; i < n; ++i) p[i] = i;
  return p;
}

inline std::vector<Index> invert_permutation(const std::vector<Index>& perm) {
  std::vector<Index> inv(perm.size());
  for (Index i = 0; i < static_cast<Index>(perm.size()); ++i) inv[perm[i]] = i;
  return inv;
}

}  // namespace gmrfpde
