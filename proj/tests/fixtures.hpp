#pragma once

#include "bliss/embeddings.hpp"
#include "bliss/metric.hpp"

#include "test_util.hpp"

#include <random>

namespace fixture {

using namespace bliss;

/// Source/target spaces related by a rotation plus noise, with planted hub
/// targets: several tight source clusters whose true translations are
/// distinct target words, plus one extra target word at each cluster's
/// exact image centre that translates nothing but sits closest to most of
/// the cluster. Gold is the identity pairing over non-hub words.
struct HubFixture {
  EmbeddingTable src, tgt;
  AlignedLexicon gold;
  Matrix R;
  Matrix W0;
  std::vector<Index> hubs;
};

inline HubFixture make_hub_fixture(std::uint64_t seed, Index d = 8, Index background = 300,
                                   Index clusters = 3, Index cluster_size = 40) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const Index n = background + clusters * cluster_size;
  RowMatrix x(n, d);
  RowMatrix centres = unit_rows(testutil::gaussian(clusters, d, rng));
  for (Index c = 0; c < clusters; ++c) {
    for (Index i = 0; i < cluster_size; ++i) {
      for (Index k = 0; k < d; ++k) x(c * cluster_size + i, k) = centres(c, k) + 0.06 * g(rng);
    }
  }
  x.bottomRows(background) = testutil::gaussian(background, d, rng);
  x = unit_rows(x);

  HubFixture f;
  f.R = testutil::haar_orthogonal(d, rng);
  RowMatrix y(n + clusters, d);
  y.topRows(n) = map_rows(x, f.R) + 0.06 * RowMatrix(testutil::gaussian(n, d, rng));
  for (Index c = 0; c < clusters; ++c) {
    y.row(n + c) = (f.R * centres.row(c).transpose()).transpose();
    f.hubs.push_back(n + c);
  }
  y = unit_rows(y);

  f.src = EmbeddingTable(testutil::words(n, "s"), x, NormState::unit);
  f.tgt = EmbeddingTable(testutil::words(n + clusters, "t"), y, NormState::unit);
  for (Index i = 0; i < n; ++i) f.gold.pairs.emplace_back(i, i);
  Matrix noisy = f.R + 0.25 * Matrix(testutil::gaussian(d, d, rng));
  Eigen::JacobiSVD<Matrix> svd(noisy, Eigen::ComputeFullU | Eigen::ComputeFullV);
  f.W0 = svd.matrixU() * svd.matrixV().transpose();
  return f;
}

}  // namespace fixture
