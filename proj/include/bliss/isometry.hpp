#pragma once

// How far two embedding spaces are from isometric: degree-0 Vietoris-Rips
// persistence, bottleneck distance between diagrams, the resulting
// Gromov-Hausdorff lower bound, Laplacian eigenvector similarity and the
// orthogonality residual of a learned map.

#include "bliss/core.hpp"
#include "bliss/embeddings.hpp"
#include "bliss/metric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

namespace bliss {

struct PersistenceInterval {
  double birth = 0.0;
  double death = 0.0;

  friend bool operator==(const PersistenceInterval&, const PersistenceInterval&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistenceInterval> intervals;
  std::size_t dropped_infinite = 0;

  std::size_t size() const { return intervals.size(); }
};

/// Euclidean distance with a fixed left-to-right summation order.
inline double euclidean(const RowMatrix& pts, Index a, Index b) {
  double s = 0.0;
  for (Index k = 0; k < pts.cols(); ++k) {
    const double d = pts(a, k) - pts(b, k);
    s += d * d;
  }
  return std::sqrt(s);
}

/// Degree-0 persistence of the Rips filtration: every component is born at
/// 0 and dies at a Euclidean minimum-spanning-tree edge weight (Prim on
/// the implicit dense graph). The one component that never dies is
/// dropped and counted. Intervals are sorted by death.
inline PersistenceDiagram rips_persistence_deg0(const RowMatrix& points) {
  const Index n = points.rows();
  if (n < 2) throw DataError("rips_persistence_deg0: need at least two points");
  std::vector<double> key(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  std::vector<double> deaths;
  deaths.reserve(static_cast<std::size_t>(n - 1));

  Index cur = 0;
  in_tree[0] = 1;
  for (Index added = 1; added < n; ++added) {
    Index next = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index v = 0; v < n; ++v) {
      if (in_tree[static_cast<std::size_t>(v)]) continue;
      const double d = euclidean(points, cur, v);
      double& kv = key[static_cast<std::size_t>(v)];
      if (d < kv) kv = d;
      if (kv < best || next < 0) {
        best = kv;
        next = v;
      }
    }
    in_tree[static_cast<std::size_t>(next)] = 1;
    deaths.push_back(best);
    cur = next;
  }
  std::sort(deaths.begin(), deaths.end());
  PersistenceDiagram dg;
  dg.dropped_infinite = 1;
  dg.intervals.reserve(deaths.size());
  for (double d : deaths) dg.intervals.push_back({0.0, d});
  return dg;
}

namespace detail {

inline double linf(const PersistenceInterval& a, const PersistenceInterval& b) {
  return std::max(std::abs(a.birth - b.birth), std::abs(a.death - b.death));
}

inline double diagonal_cost(const PersistenceInterval& a) { return 0.5 * (a.death - a.birth); }

/// Perfect-matching test for the diagonal-augmented bipartite graph at
/// threshold c. Left: f points then g-diagonal slots; right: g points then
/// f-diagonal slots. Hopcroft-Karp.
class BottleneckMatcher {
 public:
  BottleneckMatcher(const PersistenceDiagram& f, const PersistenceDiagram& g) : f_(f), g_(g) {
    order_.resize(g.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return g.intervals[a].death < g.intervals[b].death;
    });
    deaths_.reserve(g.size());
    for (std::size_t j : order_) deaths_.push_back(g.intervals[j].death);
  }

  bool feasible(double c) {
    const int n = static_cast<int>(f_.size());
    const int m = static_cast<int>(g_.size());
    const int V = n + m;
    adj_.assign(static_cast<std::size_t>(V), {});
    for (int i = 0; i < n; ++i) {
      const auto& u = f_.intervals[static_cast<std::size_t>(i)];
      auto lo = std::lower_bound(deaths_.begin(), deaths_.end(), u.death - c);
      auto hi = std::upper_bound(deaths_.begin(), deaths_.end(), u.death + c);
      for (auto it = lo; it != hi; ++it) {
        const std::size_t j = order_[static_cast<std::size_t>(it - deaths_.begin())];
        if (linf(u, g_.intervals[j]) <= c) adj_[static_cast<std::size_t>(i)].push_back(static_cast<int>(j));
      }
      if (diagonal_cost(u) <= c) adj_[static_cast<std::size_t>(i)].push_back(m + i);
    }
    for (int j = 0; j < m; ++j) {
      auto& a = adj_[static_cast<std::size_t>(n + j)];
      if (diagonal_cost(g_.intervals[static_cast<std::size_t>(j)]) <= c) a.push_back(j);
      // Diagonal-to-diagonal pairs cost nothing.
      for (int i = 0; i < n; ++i) a.push_back(m + i);
    }
    return max_matching(V) == V;
  }

 private:
  int max_matching(int V) {
    match_l_.assign(static_cast<std::size_t>(V), -1);
    match_r_.assign(static_cast<std::size_t>(V), -1);
    dist_.assign(static_cast<std::size_t>(V), 0);
    int matched = 0;
    // Greedy warm start.
    for (int u = 0; u < V; ++u) {
      for (int v : adj_[static_cast<std::size_t>(u)]) {
        if (match_r_[static_cast<std::size_t>(v)] < 0) {
          match_l_[static_cast<std::size_t>(u)] = v;
          match_r_[static_cast<std::size_t>(v)] = u;
          ++matched;
          break;
        }
      }
    }
    while (bfs(V)) {
      it_.assign(static_cast<std::size_t>(V), 0);
      for (int u = 0; u < V; ++u) {
        if (match_l_[static_cast<std::size_t>(u)] < 0 && dfs(u)) ++matched;
      }
    }
    return matched;
  }

  bool bfs(int V) {
    std::queue<int> q;
    bool found = false;
    for (int u = 0; u < V; ++u) {
      if (match_l_[static_cast<std::size_t>(u)] < 0) {
        dist_[static_cast<std::size_t>(u)] = 0;
        q.push(u);
      } else {
        dist_[static_cast<std::size_t>(u)] = -1;
      }
    }
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj_[static_cast<std::size_t>(u)]) {
        const int w = match_r_[static_cast<std::size_t>(v)];
        if (w < 0) {
          found = true;
        } else if (dist_[static_cast<std::size_t>(w)] < 0) {
          dist_[static_cast<std::size_t>(w)] = dist_[static_cast<std::size_t>(u)] + 1;
          q.push(w);
        }
      }
    }
    return found;
  }

  bool dfs(int u) {
    auto& edges = adj_[static_cast<std::size_t>(u)];
    for (std::size_t& k = it_[static_cast<std::size_t>(u)]; k < edges.size(); ++k) {
      const int v = edges[k];
      const int w = match_r_[static_cast<std::size_t>(v)];
      if (w < 0 || (dist_[static_cast<std::size_t>(w)] == dist_[static_cast<std::size_t>(u)] + 1 && dfs(w))) {
        match_l_[static_cast<std::size_t>(u)] = v;
        match_r_[static_cast<std::size_t>(v)] = u;
        return true;
      }
    }
    dist_[static_cast<std::size_t>(u)] = -1;
    return false;
  }

  const PersistenceDiagram& f_;
  const PersistenceDiagram& g_;
  std::vector<std::size_t> order_;
  std::vector<double> deaths_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> match_l_, match_r_, dist_;
  std::vector<std::size_t> it_;
};

}  // namespace detail

/// Exact bottleneck distance under the L-infinity ground metric, with
/// points allowed to match their diagonal projections. The answer is the
/// smallest candidate cost (point-point or point-diagonal) at which a
/// perfect matching exists. Small inputs binary-search the sorted
/// candidate list; large ones bisect over the ordered bit patterns of
/// non-negative doubles, which lands on the same candidate.
inline double bottleneck_distance(const PersistenceDiagram& f, const PersistenceDiagram& g,
                                  std::size_t candidate_limit = 1u << 22) {
  if (f.size() == 0 && g.size() == 0) return 0.0;
  for (const auto* dg : {&f, &g}) {
    for (const auto& p : dg->intervals) {
      if (!std::isfinite(p.birth) || !std::isfinite(p.death)) {
        throw DataError("bottleneck_distance: diagrams must be finite");
      }
    }
  }
  detail::BottleneckMatcher matcher(f, g);

  double upper = 0.0;
  for (const auto& p : f.intervals) upper = std::max(upper, detail::diagonal_cost(p));
  for (const auto& p : g.intervals) upper = std::max(upper, detail::diagonal_cost(p));

  if (f.size() * g.size() <= candidate_limit) {
    std::vector<double> cand;
    cand.reserve(f.size() * g.size() + f.size() + g.size() + 1);
    cand.push_back(0.0);
    for (const auto& p : f.intervals) cand.push_back(detail::diagonal_cost(p));
    for (const auto& q : g.intervals) cand.push_back(detail::diagonal_cost(q));
    for (const auto& p : f.intervals) {
      for (const auto& q : g.intervals) cand.push_back(detail::linf(p, q));
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::size_t lo = 0, hi = cand.size() - 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (matcher.feasible(cand[mid])) hi = mid;
      else lo = mid + 1;
    }
    return cand[lo];
  }

  // Matching every point to the diagonal is always feasible at `upper`.
  std::uint64_t lo = 0, hi = std::bit_cast<std::uint64_t>(upper);
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (matcher.feasible(std::bit_cast<double>(mid))) hi = mid;
    else lo = mid + 1;
  }
  return std::bit_cast<double>(lo);
}

/// The first `n` rows, mean-centered and unit-normalized.
inline RowMatrix centered_unit_rows(const RowMatrix& m, Index n) {
  RowMatrix top = m.topRows(std::min(n, m.rows()));
  Eigen::RowVectorXd mean = top.colwise().mean();
  top.rowwise() -= mean;
  return unit_rows(top);
}

/// Bottleneck distance between the degree-0 diagrams of the `n_points`
/// most frequent words of each side (centered, unit-normed, Euclidean).
inline double gh_lower_bound(const RowMatrix& src, const RowMatrix& tgt, Index n_points) {
  if (n_points < 2) throw DataError("gh_lower_bound: n_points must be at least 2");
  if (n_points > src.rows() || n_points > tgt.rows()) {
    throw DataError("gh_lower_bound: n_points exceeds a vocabulary");
  }
  return bottleneck_distance(rips_persistence_deg0(centered_unit_rows(src, n_points)),
                             rips_persistence_deg0(centered_unit_rows(tgt, n_points)));
}

inline double gh_lower_bound(const EmbeddingTable& src, const EmbeddingTable& tgt, Index n_points) {
  return gh_lower_bound(src.vectors(), tgt.vectors(), n_points);
}

/// Unnormalized Laplacian eigenvalues (descending) of the mutual k-NN
/// cosine graph over unit rows.
inline Vector mutual_knn_laplacian_spectrum(const RowMatrix& unit, Index k) {
  const Index n = unit.rows();
  if (k <= 0 || k >= n) throw DataError("eigenvector_similarity: need n_points >= knn_k + 1");
  RowMatrix sims = unit * unit.transpose();
  std::vector<std::vector<char>> nn(static_cast<std::size_t>(n),
                                    std::vector<char>(static_cast<std::size_t>(n), 0));
  std::vector<Index> scratch;
  for (Index i = 0; i < n; ++i) {
    for (Index j : detail::top_k(sims.row(i).data(), n, k, i, scratch)) {
      nn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
    }
  }
  Matrix L = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (nn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] &&
          nn[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) {
        L(i, j) = L(j, i) = -1.0;
        L(i, i) += 1.0;
        L(j, j) += 1.0;
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(L, Eigen::EigenvaluesOnly);
  Vector ev = es.eigenvalues().reverse();
  return ev.cwiseMax(0.0);
}

namespace detail {

inline Index energy_cutoff(const Vector& desc, double fraction) {
  const double total = desc.sum();
  if (!(total > 0.0)) return desc.size();
  double run = 0.0;
  for (Index j = 0; j < desc.size(); ++j) {
    run += desc(j);
    if (run > fraction * total) return j + 1;
  }
  return desc.size();
}

}  // namespace detail

/// Sum of squared differences between the leading Laplacian eigenvalues of
/// the two mutual k-NN graphs, truncated where either spectrum first
/// exceeds `energy` of its total.
inline double eigenvector_similarity(const RowMatrix& src, const RowMatrix& tgt, Index n_points,
                                     Index knn_k = 10, double energy = 0.9) {
  if (n_points > src.rows() || n_points > tgt.rows()) {
    throw DataError("eigenvector_similarity: n_points exceeds a vocabulary");
  }
  Vector a = mutual_knn_laplacian_spectrum(centered_unit_rows(src, n_points), knn_k);
  Vector b = mutual_knn_laplacian_spectrum(centered_unit_rows(tgt, n_points), knn_k);
  const Index r = std::min(detail::energy_cutoff(a, energy), detail::energy_cutoff(b, energy));
  return (a.head(r) - b.head(r)).squaredNorm();
}

inline double eigenvector_similarity(const EmbeddingTable& src, const EmbeddingTable& tgt,
                                     Index n_points, Index knn_k = 10) {
  return eigenvector_similarity(src.vectors(), tgt.vectors(), n_points, knn_k);
}

/// ||I - W^T W||_F^2.
inline double orthogonality_residual(const Matrix& W) {
  return (Matrix::Identity(W.cols(), W.cols()) - W.transpose() * W).squaredNorm();
}

namespace detail {

inline std::pair<std::vector<double>, std::vector<double>> complete_pairs(
    const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("correlation: series lengths differ");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isfinite(a[i]) && std::isfinite(b[i])) {
      x.push_back(a[i]);
      y.push_back(b[i]);
    }
  }
  if (x.size() < 3) throw DataError("correlation: need at least three complete pairs");
  return {x, y};
}

inline double pearson_complete(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) throw DataError("correlation: constant series");
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace detail

/// Sample Pearson coefficient; pairs with a non-finite entry are dropped.
inline double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  auto [x, y] = detail::complete_pairs(a, b);
  return detail::pearson_complete(x, y);
}

/// Spearman rank coefficient (average ranks for ties), same missing-value rule.
inline double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  auto [x, y] = detail::complete_pairs(a, b);
  return detail::pearson_complete(detail::average_ranks(x), detail::average_ranks(y));
}

struct IsometrySweepEntry {
  Index n_points = 0;
  std::optional<double> gh;
  std::optional<double> eigenvector_similarity;
};

struct IsometryReport {
  std::vector<IsometrySweepEntry> sweep;
  std::optional<double> orthogonality_residual;
};

/// GH bound and eigenvector similarity at each vocabulary size. Sizes
/// larger than either table are skipped.
inline IsometryReport isometry_report(const EmbeddingTable& src, const EmbeddingTable& tgt,
                                      const std::vector<Index>& n_values, Index knn_k = 10,
                                      const Matrix* W = nullptr, bool with_eigen = true) {
  IsometryReport rep;
  for (Index n : n_values) {
    if (n > src.size() || n > tgt.size()) continue;
    IsometrySweepEntry e;
    e.n_points = n;
    e.gh = gh_lower_bound(src, tgt, n);
    if (with_eigen && n > knn_k) e.eigenvector_similarity = eigenvector_similarity(src, tgt, n, knn_k);
    rep.sweep.push_back(e);
  }
  if (W) rep.orthogonality_residual = orthogonality_residual(*W);
  return rep;
}

}  // namespace bliss
