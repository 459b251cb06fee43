#pragma once

// Orthogonal Procrustes, mutual-CSLS dictionary expansion, hubness
// filtering and the iterative refinement loop built from them.

#include "bliss/alignment.hpp"
#include "bliss/core.hpp"
#include "bliss/embeddings.hpp"
#include "bliss/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bliss {

struct ProcrustesResult {
  Matrix W;
  bool degenerate = false;  // cross-covariance was rank deficient
};

/// Orthogonal W minimizing sum ||W x_i - y_i||^2 over paired rows.
/// Singular vectors are sign-normalized so the largest-magnitude entry of
/// each left singular vector is positive.
inline ProcrustesResult procrustes_solve(const RowMatrix& src, const RowMatrix& tgt) {
  if (src.rows() < 1 || src.rows() != tgt.rows() || src.cols() != tgt.cols()) {
    throw DataError("procrustes_solve: need matching, non-empty paired rows");
  }
  const Matrix M = tgt.transpose() * src;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix U = svd.matrixU();
  Matrix V = svd.matrixV();
  for (Index j = 0; j < U.cols(); ++j) {
    Index arg = 0;
    U.col(j).cwiseAbs().maxCoeff(&arg);
    if (U(arg, j) < 0) {
      U.col(j) *= -1.0;
      V.col(j) *= -1.0;
    }
  }
  ProcrustesResult r;
  r.W = U * V.transpose();
  const auto& s = svd.singularValues();
  r.degenerate = s.size() == 0 || !(s(s.size() - 1) > 1e-12 * std::max(1.0, s(0)));
  return r;
}

struct RefineConfig {
  Index expansion_vocab = 15000;
  Index csls_k = 10;
  Index hubness_threshold = 20;
  bool filter_hubness = true;
  int rounds = 5;
  bool stop_on_no_improvement = true;
  CriterionOptions criterion;
  Index chunk_rows = 2048;
};

/// Mutually matched (source, target) pairs with their CSLS scores.
struct ExpansionDictionary {
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<double> scores;
  int round = 0;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }
};

/// Pairs (i, j) where j is the CSLS rank-1 target of source i and i is the
/// CSLS rank-1 source of target j, over the `expansion_vocab` most frequent
/// words per side. The source-to-target rank-1 matches are written to
/// `s2t` when requested (for hubness counting).
inline ExpansionDictionary expand_dictionary(const Matrix& W, const RowMatrix& src,
                                             const RowMatrix& tgt, const RefineConfig& cfg,
                                             int round = 0, NeighborIndex* s2t = nullptr) {
  const Index ns = std::min(cfg.expansion_vocab, src.rows());
  const Index nt = std::min(cfg.expansion_vocab, tgt.rows());
  if (ns == 0 || nt == 0) throw DataError("expand_dictionary: empty candidate set");
  const Index k = std::min({cfg.csls_k, ns, nt});
  RowMatrix mapped = unit_rows(map_rows(src.topRows(ns), W));
  RowMatrix tu = unit_rows(tgt.topRows(nt));
  CslsGammas g = csls_gammas(mapped, tu, k, false, cfg.chunk_rows);

  std::vector<Index> row_best(static_cast<std::size_t>(ns));
  std::vector<double> row_score(static_cast<std::size_t>(ns));
  std::vector<Index> col_best(static_cast<std::size_t>(nt), -1);
  std::vector<double> col_score(static_cast<std::size_t>(nt),
                                -std::numeric_limits<double>::infinity());
  const Index step = std::max<Index>(1, cfg.chunk_rows);
  for (Index start = 0; start < ns; start += step) {
    const Index rows = std::min(step, ns - start);
    RowMatrix sims = mapped.middleRows(start, rows) * tu.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      double best = -std::numeric_limits<double>::infinity();
      Index arg = 0;
      for (Index j = 0; j < nt; ++j) {
        const double s = csls_score(sims(r, j), g.src(i), g.tgt(j));
        if (s > best) {
          best = s;
          arg = j;
        }
        // Rows arrive in ascending order, so strict > keeps the lower index on ties.
        if (s > col_score[static_cast<std::size_t>(j)]) {
          col_score[static_cast<std::size_t>(j)] = s;
          col_best[static_cast<std::size_t>(j)] = i;
        }
      }
      row_best[static_cast<std::size_t>(i)] = arg;
      row_score[static_cast<std::size_t>(i)] = best;
    }
  }

  ExpansionDictionary dict;
  dict.round = round;
  for (Index i = 0; i < ns; ++i) {
    const Index j = row_best[static_cast<std::size_t>(i)];
    if (col_best[static_cast<std::size_t>(j)] == i) {
      dict.pairs.emplace_back(i, j);
      dict.scores.push_back(row_score[static_cast<std::size_t>(i)]);
    }
  }
  if (dict.empty()) {
    throw DataError("expand_dictionary: no mutual matches in refinement round " +
                    std::to_string(round));
  }
  if (s2t) {
    s2t->queries.resize(static_cast<std::size_t>(ns));
    s2t->ids.assign(static_cast<std::size_t>(ns), {});
    s2t->scores.assign(static_cast<std::size_t>(ns), {});
    for (Index i = 0; i < ns; ++i) {
      s2t->queries[static_cast<std::size_t>(i)] = i;
      s2t->ids[static_cast<std::size_t>(i)] = {row_best[static_cast<std::size_t>(i)]};
      s2t->scores[static_cast<std::size_t>(i)] = {row_score[static_cast<std::size_t>(i)]};
    }
  }
  return dict;
}

/// Drops every pair whose target is the rank-1 neighbour of more than
/// `threshold` queries in `index`.
inline ExpansionDictionary hubness_filter(const ExpansionDictionary& dict,
                                          const NeighborIndex& index, Index threshold) {
  const auto counts = hubness_counts(index);
  ExpansionDictionary out;
  out.round = dict.round;
  for (std::size_t p = 0; p < dict.pairs.size(); ++p) {
    if (static_cast<Index>(hubness_of(counts, dict.pairs[p].second)) <= threshold) {
      out.pairs.push_back(dict.pairs[p]);
      out.scores.push_back(dict.scores[p]);
    }
  }
  return out;
}

struct RefineRound {
  int round = 0;
  std::size_t dictionary_size = 0;
  std::size_t filtered_out = 0;
  double criterion = 0.0;
  bool degenerate = false;
};

struct RefineResult {
  Matrix W;
  int best_round = 0;  // 0 is the input mapping
  double best_criterion = 0.0;
  std::vector<RefineRound> rounds;  // rounds[0] describes W0
  std::string stop_reason;
};

/// Alternates expansion, hubness filtering and Procrustes for up to
/// `cfg.rounds` rounds and returns the mapping (W0 included) with the best
/// unsupervised criterion.
inline RefineResult iterative_refine(const Matrix& W0, const RowMatrix& src, const RowMatrix& tgt,
                                     const RefineConfig& cfg) {
  if (!W0.allFinite()) throw DataError("iterative_refine: initial mapping is not finite");
  RefineResult res;
  res.W = W0;
  res.best_criterion = unsupervised_criterion(W0, src, tgt, cfg.criterion);
  res.rounds.push_back({0, 0, 0, res.best_criterion, false});
  res.stop_reason = "completed";

  Matrix W = W0;
  for (int r = 1; r <= cfg.rounds; ++r) {
    NeighborIndex s2t;
    ExpansionDictionary dict = expand_dictionary(W, src, tgt, cfg, r, &s2t);
    const std::size_t before = dict.size();
    if (cfg.filter_hubness) dict = hubness_filter(dict, s2t, cfg.hubness_threshold);
    if (dict.empty()) {
      res.stop_reason = "empty dictionary after hubness filtering in round " + std::to_string(r);
      break;
    }
    RowMatrix xs(static_cast<Index>(dict.size()), src.cols());
    RowMatrix ys(static_cast<Index>(dict.size()), tgt.cols());
    for (std::size_t p = 0; p < dict.size(); ++p) {
      xs.row(static_cast<Index>(p)) = src.row(dict.pairs[p].first);
      ys.row(static_cast<Index>(p)) = tgt.row(dict.pairs[p].second);
    }
    ProcrustesResult pr = procrustes_solve(xs, ys);
    W = pr.W;
    const double crit = unsupervised_criterion(W, src, tgt, cfg.criterion);
    res.rounds.push_back({r, dict.size(), before - dict.size(), crit, pr.degenerate});
    if (crit > res.best_criterion) {
      res.best_criterion = crit;
      res.best_round = r;
      res.W = W;
    } else if (cfg.stop_on_no_improvement) {
      res.stop_reason = "criterion did not improve in round " + std::to_string(r);
      break;
    }
  }
  return res;
}

inline RefineResult iterative_refine(const Matrix& W0, const EmbeddingTable& src,
                                     const EmbeddingTable& tgt, const RefineConfig& cfg) {
  return iterative_refine(W0, src.vectors(), tgt.vectors(), cfg);
}

}  // namespace bliss
