#pragma once

// One random finite-difference trial per objective. Each returns the
// relative error between the analytic and the central-difference gradient.

#include "bliss/losses.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <random>
#include <utility>
#include <vector>

namespace gradtrial {

using namespace bliss;

struct Instance {
  Index d;
  Matrix W;
  RowMatrix src, tgt;
  std::vector<std::pair<Index, Index>> pairs;
  DiscriminatorParams D;
};

inline Instance make_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> dim(2, 8), batch(1, 16), width(3, 8), rows(12, 24);
  Instance in;
  in.d = dim(rng);
  in.W = Matrix::Identity(in.d, in.d) + 0.3 * Matrix(testutil::gaussian(in.d, in.d, rng));
  in.src = testutil::gaussian(rows(rng), in.d, rng);
  in.tgt = testutil::gaussian(rows(rng), in.d, rng);
  const Index b = batch(rng);
  std::uniform_int_distribution<Index> ps(0, in.src.rows() - 1), pt(0, in.tgt.rows() - 1);
  for (Index i = 0; i < b; ++i) in.pairs.emplace_back(ps(rng), pt(rng));
  in.D = DiscriminatorParams::init(in.d, {width(rng), width(rng)}, rng);
  in.D.label_smoothing = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
  return in;
}

inline RowMatrix batch_of(const RowMatrix& from, std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> n(1, 16), pick(0, from.rows() - 1);
  RowMatrix b(n(rng), from.cols());
  for (Index i = 0; i < b.rows(); ++i) b.row(i) = from.row(pick(rng));
  return b;
}

/// Flattened discriminator parameters, for perturbation.
inline Matrix flatten(const DiscriminatorParams& p) {
  std::vector<double> v;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    v.insert(v.end(), p.weights[l].data(), p.weights[l].data() + p.weights[l].size());
    v.insert(v.end(), p.biases[l].data(), p.biases[l].data() + p.biases[l].size());
  }
  return Eigen::Map<Matrix>(v.data(), static_cast<Index>(v.size()), 1);
}

inline DiscriminatorParams unflatten(const DiscriminatorParams& shape, const Matrix& flat) {
  DiscriminatorParams p = shape;
  Index at = 0;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    for (Index i = 0; i < p.weights[l].size(); ++i) p.weights[l].data()[i] = flat(at++, 0);
    for (Index i = 0; i < p.biases[l].size(); ++i) p.biases[l].data()[i] = flat(at++, 0);
  }
  return p;
}

/// Discriminator cross-entropy w.r.t. its own parameters, with a fixed
/// dropout mask (the engine is re-seeded for every evaluation).
inline double discriminator_trial(std::mt19937_64& rng) {
  Instance in = make_instance(rng);
  RowMatrix xs = batch_of(in.src, rng), ys = batch_of(in.tgt, rng);
  const std::uint64_t mask_seed = rng();
  auto f = [&](const Matrix& flat) {
    std::mt19937_64 r(mask_seed);
    return loss_discriminator(unflatten(in.D, flat), in.W, xs, ys, nullptr, true, &r);
  };
  DiscriminatorParams g = in.D.zeros_like();
  std::mt19937_64 r(mask_seed);
  loss_discriminator(in.D, in.W, xs, ys, &g, true, &r);
  return oracle::relative_error(flatten(g), oracle::numeric_gradient(f, flatten(in.D)));
}

inline double generator_trial(std::mt19937_64& rng) {
  Instance in = make_instance(rng);
  RowMatrix xs = batch_of(in.src, rng);
  Matrix g;
  loss_generator_adv(in.D, in.W, xs, &g);
  auto f = [&](const Matrix& W) { return loss_generator_adv(in.D, W, xs); };
  return oracle::relative_error(g, oracle::numeric_gradient(f, in.W));
}

inline double supervised_trial(std::mt19937_64& rng, SupervisedObjective fs) {
  Instance in = make_instance(rng);
  CslsContext ctx;
  if (fs == SupervisedObjective::csls) {
    const Index k = std::uniform_int_distribution<Index>(1, 5)(rng);
    ctx = build_csls_context(in.W, in.src, in.tgt, in.pairs, k);
  }
  const CslsContext* c = fs == SupervisedObjective::csls ? &ctx : nullptr;
  Matrix g;
  loss_supervised(in.W, in.src, in.tgt, in.pairs, fs, c, &g);
  auto f = [&](const Matrix& W) { return loss_supervised(W, in.src, in.tgt, in.pairs, fs, c); };
  return oracle::relative_error(g, oracle::numeric_gradient(f, in.W));
}

inline double orthogonality_trial(std::mt19937_64& rng) {
  Instance in = make_instance(rng);
  RowMatrix xs = batch_of(in.src, rng);
  Matrix g;
  loss_orthogonality(in.W, xs, &g);
  auto f = [&](const Matrix& W) { return loss_orthogonality(W, xs); };
  return oracle::relative_error(g, oracle::numeric_gradient(f, in.W));
}

inline double total_trial(std::mt19937_64& rng) {
  Instance in = make_instance(rng);
  RowMatrix xs = batch_of(in.src, rng);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  LossWeights w{lam(rng), lam(rng), lam(rng)};
  const bool csls = rng() & 1;
  CslsContext ctx;
  if (csls) ctx = build_csls_context(in.W, in.src, in.tgt, in.pairs, 3);
  MapLossInputs mi;
  mi.discriminator = &in.D;
  mi.adv_batch = &xs;
  mi.src = &in.src;
  mi.tgt = &in.tgt;
  mi.sup_pairs = in.pairs;
  mi.f_s = csls ? SupervisedObjective::csls : SupervisedObjective::cosine;
  mi.csls = csls ? &ctx : nullptr;
  Matrix g;
  total_map_loss(in.W, w, mi, &g);
  auto f = [&](const Matrix& W) { return total_map_loss(W, w, mi).total; };
  return oracle::relative_error(g, oracle::numeric_gradient(f, in.W));
}

}  // namespace gradtrial
