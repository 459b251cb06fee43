#pragma once

// Translation accuracy, training-stability traces and the 2-d toy dataset
// with a planted transform.

#include "bliss/alignment.hpp"
#include "bliss/core.hpp"
#include "bliss/embeddings.hpp"
#include "bliss/metric.hpp"

#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace bliss {

/// Fraction of gold source words with any gold translation among their
/// top-k predictions.
inline double precision_at_k(const NeighborIndex& predictions, const AlignedLexicon& gold,
                             Index k) {
  if (gold.empty()) throw DataError("precision_at_k: empty gold dictionary");
  if (k <= 0) throw UsageError("precision_at_k: k must be positive");
  std::map<Index, std::set<Index>> truth;
  for (auto [s, t] : gold.pairs) truth[s].insert(t);
  std::map<Index, std::size_t> pos;
  for (std::size_t i = 0; i < predictions.queries.size(); ++i) pos.emplace(predictions.queries[i], i);

  std::size_t hits = 0;
  for (const auto& [s, targets] : truth) {
    auto it = pos.find(s);
    if (it == pos.end()) throw DataError("precision_at_k: no predictions for a gold source word");
    const auto& ids = predictions.ids[it->second];
    const std::size_t limit = std::min<std::size_t>(ids.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < limit; ++r) {
      if (targets.count(ids[r])) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Unique source ids of a lexicon in ascending order.
inline std::vector<Index> lexicon_sources(const AlignedLexicon& lex) {
  std::set<Index> s;
  for (auto [a, b] : lex.pairs) s.insert(a);
  return {s.begin(), s.end()};
}

struct EvalReport {
  std::map<Index, double> precision_at;
  std::size_t n_queries = 0;
  std::size_t oov_queries = 0;
  double criterion_value = 0.0;
};

/// Precision at each requested cut-off, retrieving for the gold sources only.
inline EvalReport evaluate_mapping(const Matrix& W, const EmbeddingTable& src,
                                   const EmbeddingTable& tgt, const AlignedLexicon& gold,
                                   RetrievalOptions opt, const std::vector<Index>& ks,
                                   const CriterionOptions& crit = {}) {
  EvalReport rep;
  auto queries = lexicon_sources(gold);
  Index topn = 1;
  for (Index k : ks) topn = std::max(topn, k);
  opt.topn = topn;
  NeighborIndex idx = nn_retrieve(src, W, tgt, opt, queries);
  for (Index k : ks) rep.precision_at[k] = precision_at_k(idx, gold, k);
  rep.n_queries = queries.size();
  rep.oov_queries = gold.oov;
  rep.criterion_value = unsupervised_criterion(W, src.vectors(), tgt.vectors(), crit);
  return rep;
}

// ---------------------------------------------------------------------------
// Toy dataset

/// Planted transform: clockwise quarter turn followed by reflection in the
/// x-axis, i.e. (x, y) -> (y, x).
inline Matrix toy_correct_transform() {
  Matrix t(2, 2);
  t << 0, 1, 1, 0;
  return t;
}

/// Counter-clockwise quarter turn, (x, y) -> (-y, x).
inline Matrix toy_ccw_transform() {
  Matrix t(2, 2);
  t << 0, -1, 1, 0;
  return t;
}

enum class ToyShape { disc, rectangle, triangle };

/// One class: a uniform draw over a shape. `center` and `size` place it;
/// for the triangle `size` is (depth along +x, half-height).
struct ToyClass {
  ToyShape shape = ToyShape::disc;
  std::array<double, 2> center{0, 0};
  std::array<double, 2> size{1, 1};
  Index points = 100;
};

/// Six classes: each shape hosts a wide sparse class and a small dense
/// class placed off the x-axis. The wide classes are mirror symmetric in
/// the x-axis, so only the small classes tell the planted reflection
/// apart from a pure rotation.
struct ToySpec {
  std::array<ToyClass, 6> classes{{
      {ToyShape::disc, {-2.5, 0.0}, {1.0, 1.0}, 500},
      {ToyShape::disc, {-2.5, 0.55}, {0.3, 0.3}, 60},
      {ToyShape::rectangle, {0.5, 0.0}, {2.0, 1.0}, 350},
      {ToyShape::rectangle, {0.5, 0.3}, {0.6, 0.3}, 45},
      {ToyShape::triangle, {2.6, 0.0}, {1.6, 1.0}, 250},
      {ToyShape::triangle, {2.9, 0.45}, {0.5, 0.3}, 35},
  }};
  Matrix transform = toy_correct_transform();
  Index anchors_per_class = 0;
  bool paired = false;  // target = transform of the source draw itself
  std::uint64_t seed = 0;
};

struct ToyData {
  EmbeddingTable src;
  EmbeddingTable tgt;
  AlignedLexicon anchors;
  AlignedLexicon gold;  // only filled when the spec is paired
  std::vector<int> src_labels;  // 1-based class per source row
  std::vector<int> tgt_labels;
};

namespace detail {

inline std::array<double, 2> sample_shape(const ToyClass& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (c.shape) {
    case ToyShape::disc: {
      const double r = c.size[0] * std::sqrt(u(rng));
      const double a = 2.0 * M_PI * u(rng);
      return {c.center[0] + r * std::cos(a), c.center[1] + r * std::sin(a)};
    }
    case ToyShape::rectangle:
      return {c.center[0] + (u(rng) - 0.5) * c.size[0], c.center[1] + (u(rng) - 0.5) * c.size[1]};
    case ToyShape::triangle: {
      // Apex at center + (depth, 0); base of half-height h at center.x.
      double a = u(rng), b = u(rng);
      if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
      }
      const double x = a * c.size[0];
      const double y = (b - 0.5 * (1.0 - a)) * 2.0 * c.size[1];
      return {c.center[0] + x, c.center[1] + y};
    }
  }
  return c.center;
}

}  // namespace detail

/// True when the point lies inside the class region.
inline bool toy_contains(const ToyClass& c, double x, double y) {
  const double dx = x - c.center[0], dy = y - c.center[1];
  switch (c.shape) {
    case ToyShape::disc: return dx * dx + dy * dy <= c.size[0] * c.size[0];
    case ToyShape::rectangle:
      return std::abs(dx) <= 0.5 * c.size[0] && std::abs(dy) <= 0.5 * c.size[1];
    case ToyShape::triangle:
      return dx >= 0 && dx <= c.size[0] && std::abs(dy) <= c.size[1] * (1.0 - dx / c.size[0]);
  }
  return false;
}

/// Source draw, target draw through the planted transform, and anchor
/// pairs. Tokens are "c<class>_<i>"; anchor rows are "c<class>_a<i>".
inline ToyData generate_toy(const ToySpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> sw, tw;
  std::vector<std::array<double, 2>> sp, tp;
  ToyData out;

  for (int c = 0; c < 6; ++c) {
    const auto& cls = spec.classes[static_cast<std::size_t>(c)];
    for (Index i = 0; i < cls.points; ++i) {
      sp.push_back(detail::sample_shape(cls, rng));
      sw.push_back("c" + std::to_string(c + 1) + "_" + std::to_string(i));
      out.src_labels.push_back(c + 1);
    }
  }
  for (int c = 0; c < 6; ++c) {
    const auto& cls = spec.classes[static_cast<std::size_t>(c)];
    for (Index i = 0; i < cls.points; ++i) {
      const std::size_t idx = tp.size();
      tp.push_back(spec.paired ? sp[idx] : detail::sample_shape(cls, rng));
      tw.push_back("c" + std::to_string(c + 1) + "_" + std::to_string(i));
      out.tgt_labels.push_back(c + 1);
    }
  }
  if (spec.paired) {
    for (std::size_t i = 0; i < sp.size(); ++i) {
      out.gold.pairs.emplace_back(static_cast<Index>(i), static_cast<Index>(i));
    }
  }
  for (int c = 0; c < 6; ++c) {
    const auto& cls = spec.classes[static_cast<std::size_t>(c)];
    for (Index i = 0; i < spec.anchors_per_class; ++i) {
      auto p = detail::sample_shape(cls, rng);
      const std::string tok = "c" + std::to_string(c + 1) + "_a" + std::to_string(i);
      out.anchors.pairs.emplace_back(static_cast<Index>(sp.size()), static_cast<Index>(tp.size()));
      sp.push_back(p);
      tp.push_back(p);
      sw.push_back(tok);
      tw.push_back(tok);
      out.src_labels.push_back(c + 1);
      out.tgt_labels.push_back(c + 1);
    }
  }

  RowMatrix s(static_cast<Index>(sp.size()), 2), t(static_cast<Index>(tp.size()), 2);
  for (std::size_t i = 0; i < sp.size(); ++i) s.row(static_cast<Index>(i)) << sp[i][0], sp[i][1];
  for (std::size_t i = 0; i < tp.size(); ++i) t.row(static_cast<Index>(i)) << tp[i][0], tp[i][1];
  t = t * spec.transform.transpose();
  out.src = EmbeddingTable(std::move(sw), std::move(s));
  out.tgt = EmbeddingTable(std::move(tw), std::move(t));
  return out;
}

/// ||W - planted transform||_F < tol.
inline bool check_toy_transform(const Matrix& W, const ToySpec& spec, double tol = 0.15) {
  if (W.rows() != spec.transform.rows() || W.cols() != spec.transform.cols()) return false;
  return (W - spec.transform).norm() < tol;
}

struct StabilityPoint {
  int round = 0;
  double accuracy = std::nan("");  // gold precision@1 when it was probed
  double criterion = 0.0;
};

/// Per-round criterion (and probed accuracy) from a training log.
inline std::vector<StabilityPoint> stability_trace(const std::vector<TrainLogRecord>& log) {
  std::vector<StabilityPoint> out;
  for (const auto& r : log) {
    if (!r.criterion) continue;
    StabilityPoint p;
    p.round = r.round;
    p.criterion = *r.criterion;
    if (r.precision_at_1) p.accuracy = *r.precision_at_1;
    out.push_back(p);
  }
  return out;
}

}  // namespace bliss
