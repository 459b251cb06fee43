#pragma once

// Similarity kernels: cosine, mean k-NN similarity, CSLS scoring,
// exact nearest-neighbour retrieval and hubness counts.

#include "bliss/core.hpp"
#include "bliss/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bliss {

template <class A, class B>
double cosine(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu > 0.0) || !(nv > 0.0)) throw DataError("cosine of a zero vector");
  return u.dot(v) / (nu * nv);
}

/// 2 cos(Wx, y) minus both hubness penalties.
inline double csls_score(double cos_xy, double gamma_src, double gamma_tgt) {
  return 2.0 * cos_xy - gamma_src - gamma_tgt;
}

/// CSLS of a pair given precomputed Gamma_Y(Wx) and Gamma_WX(y).
inline double csls(const Vector& x, const Vector& y, const Matrix& W, double gamma_src,
                   double gamma_tgt) {
  return csls_score(cosine(W * x, y), gamma_src, gamma_tgt);
}

/// Copy of `m` with every row scaled to unit length. Zero rows are an error.
inline RowMatrix unit_rows(const RowMatrix& m) {
  RowMatrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > 0.0)) throw DataError("zero vector at row " + std::to_string(i));
    out.row(i) /= n;
  }
  return out;
}

/// Rows of `src` mapped through W (each row x becomes Wx).
inline RowMatrix map_rows(const RowMatrix& src, const Matrix& W) {
  if (W.cols() != src.cols()) {
    throw DataError("mapping dimension " + std::to_string(W.cols()) +
                    " does not match embedding dimension " + std::to_string(src.cols()));
  }
  return src * W.transpose();
}

namespace detail {

/// Indices of the `k` largest entries of `scores`, ordered by descending
/// score with ties broken by lower index. `skip` (if >= 0) is excluded.
inline std::vector<Index> top_k(const double* scores, Index n, Index k, Index skip,
                                std::vector<Index>& scratch) {
  scratch.clear();
  for (Index j = 0; j < n; ++j) {
    if (j != skip) scratch.push_back(j);
  }
  k = std::min<Index>(k, static_cast<Index>(scratch.size()));
  auto better = [scores](Index a, Index b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end(), better);
  return {scratch.begin(), scratch.begin() + k};
}

inline Index chunk_size(Index chunk_rows) { return std::max<Index>(1, chunk_rows); }

}  // namespace detail

/// Mean cosine similarity between a vector and its k most similar candidates.
template <class A>
double knn_mean_sim(const Eigen::MatrixBase<A>& b, const RowMatrix& candidates, Index k) {
  if (candidates.rows() == 0) throw DataError("knn_mean_sim: empty candidate set");
  if (k <= 0 || k > candidates.rows()) {
    throw DataError("knn_mean_sim: k=" + std::to_string(k) + " exceeds candidate count " +
                    std::to_string(candidates.rows()));
  }
  std::vector<double> sims(static_cast<std::size_t>(candidates.rows()));
  for (Index j = 0; j < candidates.rows(); ++j) {
    sims[static_cast<std::size_t>(j)] = cosine(b, candidates.row(j));
  }
  std::vector<Index> scratch;
  auto top = detail::top_k(sims.data(), candidates.rows(), k, -1, scratch);
  double s = 0.0;
  for (Index j : top) s += sims[static_cast<std::size_t>(j)];
  return s / static_cast<double>(k);
}

/// Gamma for every row of `queries` against `candidates`; both must already
/// have unit rows. With `self_exclude` row i never counts candidate i.
inline Vector knn_mean_sims(const RowMatrix& queries_unit, const RowMatrix& candidates_unit,
                            Index k, bool self_exclude = false, Index chunk_rows = 2048) {
  const Index n = queries_unit.rows();
  const Index m = candidates_unit.rows();
  const Index avail = self_exclude ? m - 1 : m;
  if (m == 0) throw DataError("knn_mean_sims: empty candidate set");
  if (k <= 0 || k > avail) {
    throw DataError("knn_mean_sims: k=" + std::to_string(k) + " exceeds candidate count " +
                    std::to_string(avail));
  }
  Vector gamma(n);
  std::vector<Index> scratch;
  const Index step = detail::chunk_size(chunk_rows);
  for (Index start = 0; start < n; start += step) {
    const Index rows = std::min(step, n - start);
    RowMatrix sims = queries_unit.middleRows(start, rows) * candidates_unit.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index q = start + r;
      auto top = detail::top_k(sims.row(r).data(), m, k, self_exclude ? q : -1, scratch);
      double s = 0.0;
      for (Index j : top) s += sims(r, j);
      gamma(q) = s / static_cast<double>(k);
    }
  }
  return gamma;
}

enum class RetrievalMethod { nn_cosine, csls, euclidean };

inline RetrievalMethod retrieval_method_from_string(const std::string& s) {
  if (s == "nn" || s == "nn_cosine" || s == "cosine") return RetrievalMethod::nn_cosine;
  if (s == "csls") return RetrievalMethod::csls;
  if (s == "euclidean") return RetrievalMethod::euclidean;
  throw UsageError("unknown retrieval method: " + s);
}

struct RetrievalOptions {
  RetrievalMethod method = RetrievalMethod::csls;
  Index k = 10;      // neighbourhood size for both Gamma terms
  Index topn = 10;   // neighbours kept per query
  bool self_exclude = false;
  Index chunk_rows = 2048;
};

/// Per-query ranked neighbour lists.
struct NeighborIndex {
  std::vector<Index> queries;
  std::vector<std::vector<Index>> ids;
  std::vector<std::vector<double>> scores;

  std::size_t size() const { return queries.size(); }

  /// Position of `query` in `queries`, if present.
  std::optional<std::size_t> position(Index query) const {
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (queries[i] == query) return i;
    }
    return std::nullopt;
  }
};

/// Both CSLS penalty vectors for a mapped source set and a target set;
/// rows must be unit length.
struct CslsGammas {
  Vector src;  // Gamma_Y(Wx) per source row
  Vector tgt;  // Gamma_WX(y) per target row
};

inline CslsGammas csls_gammas(const RowMatrix& mapped_unit, const RowMatrix& tgt_unit, Index k,
                              bool self_exclude = false, Index chunk_rows = 2048) {
  return {knn_mean_sims(mapped_unit, tgt_unit, k, self_exclude, chunk_rows),
          knn_mean_sims(tgt_unit, mapped_unit, k, self_exclude, chunk_rows)};
}

/// Ranks targets for each query source row under W. Gamma terms use all
/// rows of `src` (mapped) and all rows of `tgt`. `query_ids` empty means
/// every source row.
inline NeighborIndex nn_retrieve(const RowMatrix& src, const Matrix& W, const RowMatrix& tgt,
                                 const RetrievalOptions& opt,
                                 std::span<const Index> query_ids = {}) {
  if (tgt.rows() == 0) throw DataError("nn_retrieve: empty target set");
  if (opt.topn <= 0) throw UsageError("nn_retrieve: topn must be positive");
  RowMatrix mapped = map_rows(src, W);

  std::vector<Index> queries;
  if (query_ids.empty()) {
    queries.resize(static_cast<std::size_t>(src.rows()));
    std::iota(queries.begin(), queries.end(), Index{0});
  } else {
    queries.assign(query_ids.begin(), query_ids.end());
  }
  for (Index q : queries) {
    if (q < 0 || q >= src.rows()) throw DataError("nn_retrieve: query id out of range");
  }

  NeighborIndex index;
  index.queries = queries;
  index.ids.resize(queries.size());
  index.scores.resize(queries.size());

  RowMatrix mapped_unit, tgt_unit;
  Vector gamma_src, gamma_tgt;
  if (opt.method != RetrievalMethod::euclidean) {
    mapped_unit = unit_rows(mapped);
    tgt_unit = unit_rows(tgt);
  }
  if (opt.method == RetrievalMethod::csls) {
    auto g = csls_gammas(mapped_unit, tgt_unit, opt.k, opt.self_exclude, opt.chunk_rows);
    gamma_src = std::move(g.src);
    gamma_tgt = std::move(g.tgt);
  }

  const Index m = tgt.rows();
  const Index step = detail::chunk_size(opt.chunk_rows);
  std::vector<Index> scratch;
  std::vector<double> row(static_cast<std::size_t>(m));
  for (std::size_t start = 0; start < queries.size(); start += static_cast<std::size_t>(step)) {
    const std::size_t rows = std::min(queries.size() - start, static_cast<std::size_t>(step));
    RowMatrix block(static_cast<Index>(rows), src.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      block.row(static_cast<Index>(r)) = opt.method == RetrievalMethod::euclidean
                                             ? mapped.row(queries[start + r])
                                             : mapped_unit.row(queries[start + r]);
    }
    RowMatrix sims;
    if (opt.method != RetrievalMethod::euclidean) sims = block * tgt_unit.transpose();
    for (std::size_t r = 0; r < rows; ++r) {
      const Index q = queries[start + r];
      for (Index j = 0; j < m; ++j) {
        double s = 0.0;
        switch (opt.method) {
          case RetrievalMethod::nn_cosine: s = sims(static_cast<Index>(r), j); break;
          case RetrievalMethod::csls:
            s = csls_score(sims(static_cast<Index>(r), j), gamma_src(q), gamma_tgt(j));
            break;
          case RetrievalMethod::euclidean:
            s = -(block.row(static_cast<Index>(r)) - tgt.row(j)).norm();
            break;
        }
        row[static_cast<std::size_t>(j)] = s;
      }
      auto top = detail::top_k(row.data(), m, opt.topn, opt.self_exclude ? q : -1, scratch);
      auto& ids = index.ids[start + r];
      auto& sc = index.scores[start + r];
      ids = top;
      sc.reserve(top.size());
      for (Index j : top) sc.push_back(row[static_cast<std::size_t>(j)]);
    }
  }
  return index;
}

inline NeighborIndex nn_retrieve(const EmbeddingTable& src, const Matrix& W,
                                 const EmbeddingTable& tgt, const RetrievalOptions& opt,
                                 std::span<const Index> query_ids = {}) {
  return nn_retrieve(src.vectors(), W, tgt.vectors(), opt, query_ids);
}

/// N_y(1): how many queries have each target as their rank-1 neighbour.
inline std::map<Index, std::size_t> hubness_counts(const NeighborIndex& index) {
  std::map<Index, std::size_t> counts;
  for (const auto& ids : index.ids) {
    if (!ids.empty()) ++counts[ids.front()];
  }
  return counts;
}

inline std::size_t hubness_of(const std::map<Index, std::size_t>& counts, Index target) {
  auto it = counts.find(target);
  return it == counts.end() ? 0 : it->second;
}

/// TSV with columns query_word, rank, target_word, score (rank is 1-based).
inline void export_neighbors_tsv(const NeighborIndex& index, const EmbeddingTable& src,
                                 const EmbeddingTable& tgt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "query_word\trank\ttarget_word\tscore\n";
  char buf[32];
  for (std::size_t q = 0; q < index.size(); ++q) {
    for (std::size_t r = 0; r < index.ids[q].size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", index.scores[q][r]);
      out << src.word(index.queries[q]) << '\t' << (r + 1) << '\t'
          << tgt.word(index.ids[q][r]) << '\t' << buf << '\n';
    }
  }
}

}  // namespace bliss
