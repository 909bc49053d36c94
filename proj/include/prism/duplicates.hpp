#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prism/embeddings.hpp"
#include "prism/error.hpp"

namespace prism {

// 1 - cos(u, v), clamped to [0, 2].
inline double cosine_distance(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) fail(ErrorCode::DimensionMismatch, "vectors differ in length");
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    uu += static_cast<double>(u[i]) * static_cast<double>(u[i]);
    vv += static_cast<double>(v[i]) * static_cast<double>(v[i]);
  }
  if (uu == 0.0 || vv == 0.0) fail(ErrorCode::ZeroVector, "cosine distance of a zero vector");
  double d = 1.0 - dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(d, 0.0, 2.0);
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

enum class DuplicateSearch {
  automatic,  // exact up to kExactSearchLimit rows, pivot filtering above
  exact,
  pivot,
};

inline constexpr std::size_t kExactSearchLimit = 50000;

struct DuplicateGroups {
  // Row indices; each group sorted ascending, groups by descending size then
  // smallest member.
  std::vector<std::vector<std::size_t>> groups;
  std::size_t k = 5;
  double tau = 0.03;
};

namespace detail {

struct Neighbor {
  double dist;
  std::size_t index;
  bool operator<(const Neighbor& o) const { return dist != o.dist ? dist < o.dist : index < o.index; }
};

// Keeps the k smallest (dist, index) pairs offered to it.
class BoundedNeighbors {
 public:
  explicit BoundedNeighbors(std::size_t k) : k_(k) {}

  void offer(double dist, std::size_t index) {
    Neighbor n{dist, index};
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (n < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  const std::vector<Neighbor>& items() const { return heap_; }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

inline std::vector<double> row_norms(const EmbeddingMatrix& emb) {
  std::vector<double> norms(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    double s = 0.0;
    for (float x : emb.row(i)) s += static_cast<double>(x) * static_cast<double>(x);
    if (s == 0.0) fail(ErrorCode::ZeroVector, "embedding row " + std::to_string(i) + " is all zeros");
    norms[i] = std::sqrt(s);
  }
  return norms;
}

// Same arithmetic as cosine_distance so both paths agree bit for bit.
inline double pair_distance(const EmbeddingMatrix& emb, const std::vector<double>& norms, std::size_t i,
                            std::size_t j) {
  auto u = emb.row(i);
  auto v = emb.row(j);
  double dot = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) dot += static_cast<double>(u[t]) * static_cast<double>(v[t]);
  return std::clamp(1.0 - dot / (norms[i] * norms[j]), 0.0, 2.0);
}

inline std::vector<BoundedNeighbors> exact_neighbors(const EmbeddingMatrix& emb, const std::vector<double>& norms,
                                                     std::size_t k, double tau) {
  const std::size_t n = emb.rows();
  std::vector<BoundedNeighbors> best(n, BoundedNeighbors(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = pair_distance(emb, norms, i, j);
      if (d <= tau) {
        best[i].offer(d, j);
        best[j].offer(d, i);
      }
    }
  }
  return best;
}

// Angular distance is a metric, so |angle(i,p) - angle(j,p)| <= angle(i,j)
// for every pivot p. Rows are sorted by angle to the first pivot and only
// windows that can hold a pair within tau are scanned; the remaining pivots
// prune further before the exact distance is computed.
inline std::vector<BoundedNeighbors> pivot_neighbors(const EmbeddingMatrix& emb, const std::vector<double>& norms,
                                                     std::size_t k, double tau) {
  const std::size_t n = emb.rows();
  const std::size_t pivot_count = std::min<std::size_t>(8, n);
  constexpr double kSlack = 1e-6;
  auto angle = [](double dist) { return std::acos(std::clamp(1.0 - dist, -1.0, 1.0)); };

  // Farthest-first pivots starting at row 0.
  std::vector<std::size_t> pivots{0};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<std::vector<double>> table(pivot_count, std::vector<double>(n));
  for (std::size_t p = 0; p < pivot_count; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      table[p][i] = angle(pair_distance(emb, norms, pivots[p], i));
      nearest[i] = std::min(nearest[i], table[p][i]);
    }
    if (p + 1 < pivot_count) {
      pivots.push_back(static_cast<std::size_t>(std::max_element(nearest.begin(), nearest.end()) - nearest.begin()));
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return table[0][a] < table[0][b]; });

  const double reach = angle(tau) + kSlack;
  std::vector<BoundedNeighbors> best(n, BoundedNeighbors(k));
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t j = order[b];
      if (table[0][j] - table[0][i] > reach) break;
      bool pruned = false;
      for (std::size_t p = 1; p < pivot_count && !pruned; ++p) {
        pruned = std::abs(table[p][i] - table[p][j]) > reach;
      }
      if (pruned) continue;
      double d = pair_distance(emb, norms, i, j);
      if (d <= tau) {
        best[i].offer(d, j);
        best[j].offer(d, i);
      }
    }
  }
  return best;
}

inline void sort_groups(std::vector<std::vector<std::size_t>>& groups) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
}

}  // namespace detail

// Groups of likely duplicates: connected components of the graph with an edge
// (i, j) whenever j is among i's k nearest rows by cosine distance (ties by
// row index) and that distance is at most tau.
inline DuplicateGroups find_duplicates(const EmbeddingMatrix& emb, std::size_t k, double tau,
                                       DuplicateSearch search = DuplicateSearch::automatic) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be at least 1");
  if (!(tau >= 0.0 && tau <= 2.0)) fail(ErrorCode::InvalidArgument, "tau must lie in [0, 2]");
  if (emb.rows() < 2) fail(ErrorCode::DegenerateInput, "duplicate search needs at least 2 rows");
  const auto norms = detail::row_norms(emb);
  if (search == DuplicateSearch::automatic) {
    search = emb.rows() <= kExactSearchLimit ? DuplicateSearch::exact : DuplicateSearch::pivot;
  }
  auto neighbors = search == DuplicateSearch::exact ? detail::exact_neighbors(emb, norms, k, tau)
                                                    : detail::pivot_neighbors(emb, norms, k, tau);
  UnionFind uf(emb.rows());
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (const auto& nb : neighbors[i].items()) uf.unite(i, nb.index);
  }
  std::vector<std::vector<std::size_t>> members(emb.rows());
  for (std::size_t i = 0; i < emb.rows(); ++i) members[uf.find(i)].push_back(i);
  DuplicateGroups out;
  out.k = k;
  out.tau = tau;
  for (auto& m : members) {
    if (m.size() >= 2) out.groups.push_back(std::move(m));
  }
  detail::sort_groups(out.groups);
  return out;
}

// Fraction of the reference's same-group pairs that `candidate` also groups
// together. Used to check the pivot search against the exact one.
inline double pair_recall(const DuplicateGroups& candidate, const DuplicateGroups& reference, std::size_t rows) {
  std::vector<std::size_t> label(rows, static_cast<std::size_t>(-1));
  for (std::size_t g = 0; g < candidate.groups.size(); ++g) {
    for (std::size_t r : candidate.groups[g]) label[r] = g;
  }
  std::uint64_t total = 0;
  std::uint64_t found = 0;
  for (const auto& group : reference.groups) {
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        ++total;
        found += label[group[a]] != static_cast<std::size_t>(-1) && label[group[a]] == label[group[b]];
      }
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(found) / static_cast<double>(total);
}

}  // namespace prism
