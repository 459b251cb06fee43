#pragma once

// Objectives for the mapping W and the discriminator, each with an analytic
// gradient. Batches hold one embedding per row.

#include "bliss/core.hpp"
#include "bliss/discriminator.hpp"
#include "bliss/metric.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bliss {

inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

namespace detail {

/// d cos(u, b) / du.
inline Vector cosine_grad_u(const Vector& u, const Vector& b) {
  const double nu = u.norm();
  const double nb = b.norm();
  if (!(nu > 0.0) || !(nb > 0.0)) return Vector::Zero(u.size());
  const double c = u.dot(b) / (nu * nb);
  return b / (nu * nb) - (c / (nu * nu)) * u;
}

/// dBCE/dlogit for a clamped logistic output with soft label `t`.
inline double bce_dlogit(double p, double t) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return p - t;
}

inline double bce(double p, double t) {
  const double q = clamp_prob(p);
  return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

}  // namespace detail

/// Smoothed cross-entropy of the discriminator: mapped sources carry label
/// eps, genuine targets 1 - eps. Accumulates parameter gradients into
/// `grad` (which must be shaped like `D`) when non-null.
inline double loss_discriminator(const DiscriminatorParams& D, const Matrix& W,
                                 const RowMatrix& src_batch, const RowMatrix& tgt_batch,
                                 DiscriminatorParams* grad = nullptr, bool train_mode = false,
                                 std::mt19937_64* rng = nullptr) {
  if (src_batch.rows() == 0 || tgt_batch.rows() == 0) {
    throw DataError("loss_discriminator: empty batch");
  }
  const double eps = D.label_smoothing;
  const double ns = static_cast<double>(src_batch.rows());
  const double nt = static_cast<double>(tgt_batch.rows());

  double loss = 0.0;
  auto side = [&](const RowMatrix& batch, double label, double count) {
    DiscriminatorTrace tr;
    Vector p = discriminator_forward(D, batch, train_mode, rng, grad ? &tr : nullptr);
    Vector dz(p.size());
    for (Index i = 0; i < p.size(); ++i) {
      loss += detail::bce(p(i), label) / count;
      dz(i) = detail::bce_dlogit(p(i), label) / count;
    }
    if (grad) discriminator_backward(D, tr, dz, grad);
  };
  side(map_rows(src_batch, W), eps, ns);
  side(tgt_batch, 1.0 - eps, nt);
  return loss;
}

/// -mean log D(Wx). D is evaluated without dropout.
inline double loss_generator_adv(const DiscriminatorParams& D, const Matrix& W,
                                 const RowMatrix& src_batch, Matrix* grad_W = nullptr) {
  if (src_batch.rows() == 0) throw DataError("loss_generator_adv: empty batch");
  const double n = static_cast<double>(src_batch.rows());
  DiscriminatorTrace tr;
  Vector p = discriminator_forward(D, map_rows(src_batch, W), false, nullptr,
                                   grad_W ? &tr : nullptr);
  double loss = 0.0;
  Vector dz(p.size());
  for (Index i = 0; i < p.size(); ++i) {
    loss -= std::log(clamp_prob(p(i))) / n;
    dz(i) = detail::bce_dlogit(p(i), 1.0) / n;
  }
  if (grad_W) {
    RowMatrix du = discriminator_backward(D, tr, dz, nullptr);
    *grad_W = du.transpose() * src_batch;
  }
  return loss;
}

enum class SupervisedObjective { cosine, csls };

inline SupervisedObjective supervised_objective_from_string(const std::string& s) {
  if (s == "cosine") return SupervisedObjective::cosine;
  if (s == "csls") return SupervisedObjective::csls;
  throw UsageError("unknown supervised objective: " + s);
}

inline std::string to_string(SupervisedObjective f) {
  return f == SupervisedObjective::cosine ? "cosine" : "csls";
}

/// Frozen neighbour sets for the CSLS supervised objective: for each source
/// row the k targets closest to Wx, and for each target row the k sources
/// whose images are closest to it.
struct CslsContext {
  Index k = 10;
  std::unordered_map<Index, std::vector<Index>> tgt_neighbors;
  std::unordered_map<Index, std::vector<Index>> src_neighbors;
};

/// Neighbour sets of every source and target index that occurs in `pairs`,
/// searched over all rows of `src` (mapped through W) and `tgt`.
inline CslsContext build_csls_context(const Matrix& W, const RowMatrix& src,
                                      const RowMatrix& tgt,
                                      std::span<const std::pair<Index, Index>> pairs, Index k,
                                      Index chunk_rows = 2048) {
  CslsContext ctx;
  ctx.k = k;
  if (k > src.rows() || k > tgt.rows() || k <= 0) {
    throw DataError("CSLS neighbourhood k exceeds table size");
  }
  std::vector<Index> srcs, tgts;
  for (auto [s, t] : pairs) {
    if (!ctx.tgt_neighbors.count(s)) {
      ctx.tgt_neighbors[s];
      srcs.push_back(s);
    }
    if (!ctx.src_neighbors.count(t)) {
      ctx.src_neighbors[t];
      tgts.push_back(t);
    }
  }
  RowMatrix mapped_unit = unit_rows(map_rows(src, W));
  RowMatrix tgt_unit = unit_rows(tgt);
  std::vector<Index> scratch;
  auto fill = [&](const std::vector<Index>& ids, const RowMatrix& from, const RowMatrix& over,
                  std::unordered_map<Index, std::vector<Index>>& into) {
    const Index step = std::max<Index>(1, chunk_rows);
    for (std::size_t start = 0; start < ids.size(); start += static_cast<std::size_t>(step)) {
      const std::size_t rows = std::min(ids.size() - start, static_cast<std::size_t>(step));
      RowMatrix block(static_cast<Index>(rows), from.cols());
      for (std::size_t r = 0; r < rows; ++r) block.row(static_cast<Index>(r)) = from.row(ids[start + r]);
      RowMatrix sims = block * over.transpose();
      for (std::size_t r = 0; r < rows; ++r) {
        into[ids[start + r]] =
            detail::top_k(sims.row(static_cast<Index>(r)).data(), over.rows(), k, -1, scratch);
      }
    }
  };
  fill(srcs, mapped_unit, tgt_unit, ctx.tgt_neighbors);
  fill(tgts, tgt_unit, mapped_unit, ctx.src_neighbors);
  return ctx;
}

/// Negative mean f_s(Wx, y) over `pairs` (indices into src/tgt rows). For
/// f_s = csls the Gamma terms are differentiated through cos(W., .) with
/// the neighbour sets in `ctx` held fixed.
inline double loss_supervised(const Matrix& W, const RowMatrix& src, const RowMatrix& tgt,
                              std::span<const std::pair<Index, Index>> pairs,
                              SupervisedObjective f_s, const CslsContext* ctx = nullptr,
                              Matrix* grad_W = nullptr) {
  if (pairs.empty()) throw DataError("loss_supervised: empty lexicon batch");
  if (f_s == SupervisedObjective::csls && !ctx) {
    throw UsageError("loss_supervised: csls objective needs a neighbour context");
  }
  const double n = static_cast<double>(pairs.size());
  const Index d = W.rows();
  if (grad_W) grad_W->setZero(d, W.cols());
  double total = 0.0;

  // Adds weight * cos(W a, b) to the objective and its gradient.
  auto term = [&](Index src_row, Index tgt_row, double weight) {
    Vector a = src.row(src_row).transpose();
    Vector u = W * a;
    Vector b = tgt.row(tgt_row).transpose();
    total += weight * cosine(u, b);
    if (grad_W) grad_W->noalias() += weight * detail::cosine_grad_u(u, b) * a.transpose();
  };

  for (auto [s, t] : pairs) {
    if (f_s == SupervisedObjective::cosine) {
      term(s, t, -1.0 / n);
      continue;
    }
    auto ts = ctx->tgt_neighbors.find(s);
    auto ss = ctx->src_neighbors.find(t);
    if (ts == ctx->tgt_neighbors.end() || ss == ctx->src_neighbors.end()) {
      throw DataError("loss_supervised: pair missing from CSLS context");
    }
    const double kk = static_cast<double>(ctx->k);
    term(s, t, -2.0 / n);
    for (Index j : ts->second) term(s, j, 1.0 / (n * kk));
    for (Index i : ss->second) term(i, t, 1.0 / (n * kk));
  }
  return total;
}

/// -mean cos(x, W^T W x): minimal (-1) exactly when W is a scaled orthogonal matrix.
inline double loss_orthogonality(const Matrix& W, const RowMatrix& batch,
                                 Matrix* grad_W = nullptr) {
  if (batch.rows() == 0) throw DataError("loss_orthogonality: empty batch");
  const double n = static_cast<double>(batch.rows());
  const Matrix M = W.transpose() * W;
  if (grad_W) grad_W->setZero(W.rows(), W.cols());
  double total = 0.0;
  for (Index i = 0; i < batch.rows(); ++i) {
    Vector x = batch.row(i).transpose();
    Vector v = M * x;
    if (!(v.norm() > 1e-300)) continue;  // W^T W x vanishes: treat as cos = 0
    total -= cosine(x, v) / n;
    if (grad_W) {
      Vector a = -detail::cosine_grad_u(v, x) / n;
      grad_W->noalias() += W * (x * a.transpose() + a * x.transpose());
    }
  }
  return total;
}

struct LossWeights {
  double adv = 1.0;
  double sup = 1.0;
  double orth = 1.0;
};

struct MapLossTerms {
  double adv = 0.0;
  double sup = 0.0;
  double orth = 0.0;
  double total = 0.0;
};

/// Inputs to the joint mapping objective; a null member drops its term.
struct MapLossInputs {
  const DiscriminatorParams* discriminator = nullptr;
  const RowMatrix* adv_batch = nullptr;   // source rows for the adversarial and orthogonality terms
  const RowMatrix* src = nullptr;         // full source rows (supervised term)
  const RowMatrix* tgt = nullptr;         // full target rows (supervised term)
  std::span<const std::pair<Index, Index>> sup_pairs;
  SupervisedObjective f_s = SupervisedObjective::cosine;
  const CslsContext* csls = nullptr;
};

/// Weighted sum of the adversarial, supervised and orthogonality terms.
inline MapLossTerms total_map_loss(const Matrix& W, const LossWeights& w,
                                   const MapLossInputs& in, Matrix* grad_W = nullptr) {
  MapLossTerms t;
  if (grad_W) grad_W->setZero(W.rows(), W.cols());
  Matrix g;
  const bool adv = w.adv != 0.0 && in.discriminator && in.adv_batch;
  const bool sup = w.sup != 0.0 && in.src && in.tgt && !in.sup_pairs.empty();
  const bool orth = w.orth != 0.0 && in.adv_batch;
  if (adv) {
    t.adv = loss_generator_adv(*in.discriminator, W, *in.adv_batch, grad_W ? &g : nullptr);
    t.total += w.adv * t.adv;
    if (grad_W) *grad_W += w.adv * g;
  }
  if (sup) {
    t.sup = loss_supervised(W, *in.src, *in.tgt, in.sup_pairs, in.f_s, in.csls,
                            grad_W ? &g : nullptr);
    t.total += w.sup * t.sup;
    if (grad_W) *grad_W += w.sup * g;
  }
  if (orth) {
    t.orth = loss_orthogonality(W, *in.adv_batch, grad_W ? &g : nullptr);
    t.total += w.orth * t.orth;
    if (grad_W) *grad_W += w.orth * g;
  }
  return t;
}

/// W <- (1 + beta) W - beta (W W^T) W.
inline Matrix beta_projection_step(const Matrix& W, double beta) {
  if (!(beta > 0.0)) throw UsageError("beta must be positive");
  return (1.0 + beta) * W - beta * (W * W.transpose()) * W;
}

}  // namespace bliss
