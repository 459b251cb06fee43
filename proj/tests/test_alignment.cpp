#include "bliss/alignment.hpp"
#include "bliss/eval.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace bliss;

namespace {

EmbeddingTable unit_table(const RowMatrix& m, const std::string& prefix = "w") {
  return normalize(testutil::table(m, prefix), NormState::unit);
}

// Straightforward criterion: CSLS rank-1 by full sorting, then mean cosine.
double brute_criterion(const Matrix& W, const RowMatrix& src, const RowMatrix& tgt, Index k) {
  RowMatrix ms = unit_rows(map_rows(src, W)), tu = unit_rows(tgt);
  auto gamma = [&](const RowMatrix& from, Index i, const RowMatrix& over) {
    std::vector<double> s;
    for (Index j = 0; j < over.rows(); ++j) s.push_back(from.row(i).dot(over.row(j)));
    std::sort(s.rbegin(), s.rend());
    double g = 0;
    for (Index j = 0; j < k; ++j) g += s[static_cast<std::size_t>(j)];
    return g / static_cast<double>(k);
  };
  std::vector<double> gt(static_cast<std::size_t>(tu.rows()));
  for (Index j = 0; j < tu.rows(); ++j) gt[static_cast<std::size_t>(j)] = gamma(tu, j, ms);
  double total = 0;
  for (Index i = 0; i < ms.rows(); ++i) {
    const double gs = gamma(ms, i, tu);
    double best = -1e300, cos = 0;
    for (Index j = 0; j < tu.rows(); ++j) {
      const double c = ms.row(i).dot(tu.row(j));
      const double s = 2 * c - gs - gt[static_cast<std::size_t>(j)];
      if (s > best) {
        best = s;
        cos = c;
      }
    }
    total += cos;
  }
  return total / static_cast<double>(ms.rows());
}

TrainConfig small_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.dis_hidden = {16, 16};
  c.rounds = 3;
  c.iters_per_round = 100;
  c.csls_refresh = 50;
  c.log_every = 50;
  return c;
}

}  // namespace

TEST(Criterion, ExactPermutationAlignmentGivesOne) {
  std::mt19937_64 rng(1);
  RowMatrix x = unit_rows(testutil::gaussian(60, 6, rng));
  Matrix R = testutil::haar_orthogonal(6, rng);
  RowMatrix y = map_rows(x, R);
  EXPECT_NEAR(unsupervised_criterion(R, x, y), 1.0, 1e-6);
}

TEST(Criterion, RandomMapScoresLower) {
  std::mt19937_64 rng(2);
  RowMatrix x = unit_rows(testutil::gaussian(80, 6, rng));
  Matrix R = testutil::haar_orthogonal(6, rng);
  RowMatrix y = map_rows(x, R);
  const double aligned = unsupervised_criterion(R, x, y);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LT(unsupervised_criterion(testutil::haar_orthogonal(6, rng), x, y), aligned);
  }
}

TEST(Criterion, MatchesBruteForceOnFiftyPoints) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    RowMatrix x = testutil::gaussian(50, 4, rng), y = testutil::gaussian(50, 4, rng);
    Matrix W = testutil::gaussian(4, 4, rng);
    CriterionOptions opt;
    opt.chunk_rows = 13;
    EXPECT_NEAR(unsupervised_criterion(W, x, y, opt), brute_criterion(W, x, y, 10), 1e-10);
  }
}

TEST(Criterion, RestrictsToTopVocabulary) {
  std::mt19937_64 rng(4);
  RowMatrix x = testutil::gaussian(40, 3, rng), y = testutil::gaussian(45, 3, rng);
  CriterionOptions opt;
  opt.vocab = 20;
  EXPECT_NEAR(unsupervised_criterion(Matrix::Identity(3, 3), x, y, opt),
              brute_criterion(Matrix::Identity(3, 3), x.topRows(20), y.topRows(20), 10), 1e-12);
}

TEST(RandomOrthogonal, IsOrthogonalAndSeeded) {
  std::mt19937_64 a(5), b(5);
  Matrix q = random_orthogonal(7, a);
  EXPECT_LT((q.transpose() * q - Matrix::Identity(7, 7)).norm(), 1e-12);
  EXPECT_EQ(q, random_orthogonal(7, b));
}

TEST(TrainConfig, KeyValuesRoundTrip) {
  TrainConfig c = toy_preset();
  c.mode = TrainMode::supervised;
  c.f_s = SupervisedObjective::csls;
  c.lr = 0.037;
  c.sup_optimizer = SupOptimizer::adam;
  TrainConfig back;
  for (const auto& [k, v] : to_key_values(c)) apply_key_value(back, k, v);
  EXPECT_EQ(to_key_values(back), to_key_values(c));
  EXPECT_EQ(config_fingerprint(back), config_fingerprint(c));
  EXPECT_NE(config_fingerprint(back), config_fingerprint(TrainConfig{}));
}

TEST(TrainConfig, BadKeysAndValuesAreUsageErrors) {
  TrainConfig c;
  EXPECT_THROW(apply_key_value(c, "no_such_key", "1"), UsageError);
  EXPECT_THROW(apply_key_value(c, "lr", "fast"), UsageError);
  EXPECT_THROW(apply_key_value(c, "mode", "weird"), UsageError);
}

TEST(TrainConfig, ModesDropTerms) {
  TrainConfig c;
  c.mode = TrainMode::unsupervised;
  EXPECT_EQ(c.effective_weights().sup, 0.0);
  c.mode = TrainMode::supervised;
  EXPECT_EQ(c.effective_weights().adv, 0.0);
  c.mode = TrainMode::semi;
  EXPECT_EQ(c.effective_weights().adv, 1.0);
  EXPECT_EQ(c.effective_weights().sup, 1.0);
}

TEST(Train, SupervisedRecoversPlantedRotation) {
  std::mt19937_64 rng(6);
  RowMatrix x = unit_rows(testutil::gaussian(200, 5, rng));
  Matrix R = testutil::haar_orthogonal(5, rng);
  auto src = unit_table(x, "s"), tgt = unit_table(map_rows(x, R), "t");
  AlignedLexicon lex;
  for (Index i = 0; i < 200; ++i) lex.pairs.emplace_back(i, i);
  TrainConfig c = small_config(TrainMode::supervised);
  c.weights = {0.0, 1.0, 0.0};
  c.rounds = 10;
  c.iters_per_round = 500;
  auto res = train(src, tgt, &lex, c);
  EXPECT_FALSE(res.diverged);
  EXPECT_LT((res.mapping.W - R).norm(), 0.05);
}

TEST(Train, BitReproducibleForFixedSeed) {
  ToySpec spec;
  spec.seed = 11;
  spec.anchors_per_class = 3;
  auto data = generate_toy(spec);
  TrainConfig c = toy_preset();
  c.rounds = 2;
  c.iters_per_round = 100;
  c.seed = 7;
  auto a = train(data.src, data.tgt, &data.anchors, c);
  auto b = train(data.src, data.tgt, &data.anchors, c);
  EXPECT_EQ(a.mapping.W, b.mapping.W);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss_dis, b.log[i].loss_dis);
  c.seed = 8;
  EXPECT_NE(train(data.src, data.tgt, &data.anchors, c).mapping.W, a.mapping.W);
}

TEST(Train, LogHasOneCriterionPerRoundAndDecaysLr) {
  std::mt19937_64 rng(7);
  auto src = unit_table(testutil::gaussian(60, 4, rng), "s");
  auto tgt = unit_table(testutil::gaussian(60, 4, rng), "t");
  TrainConfig c = small_config(TrainMode::unsupervised);
  c.lr_halving_patience = 1000;
  int probed = 0;
  auto res = train(src, tgt, nullptr, c, [&](const Matrix&) {
    ++probed;
    return 0.25;
  });
  auto trace = stability_trace(res.log);
  ASSERT_EQ(trace.size(), 3u);
  EXPECT_EQ(probed, 3);
  std::vector<double> lrs;
  for (const auto& r : res.log) {
    if (r.criterion) lrs.push_back(r.lr);
  }
  EXPECT_DOUBLE_EQ(lrs[1], lrs[0] * 0.98);
  EXPECT_DOUBLE_EQ(lrs[2], lrs[1] * 0.98);
  EXPECT_EQ(trace[0].accuracy, 0.25);
  EXPECT_EQ(res.log.size(), 3u + 3u * 2u);  // two loss records per round
}

TEST(Train, ReturnsBestCriterionCheckpoint) {
  std::mt19937_64 rng(8);
  auto src = unit_table(testutil::gaussian(60, 4, rng), "s");
  auto tgt = unit_table(testutil::gaussian(60, 4, rng), "t");
  auto res = train(src, tgt, nullptr, small_config(TrainMode::unsupervised));
  double best = -1e9;
  for (const auto& r : res.log) {
    if (r.criterion) best = std::max(best, *r.criterion);
  }
  EXPECT_EQ(res.best_criterion, best);
  EXPECT_NEAR(unsupervised_criterion(res.mapping.W, src, tgt, TrainConfig{}), best, 1e-12);
}

TEST(Train, DivergenceReturnsLastFiniteCheckpoint) {
  std::mt19937_64 rng(9);
  auto src = unit_table(testutil::gaussian(60, 4, rng), "s");
  auto tgt = unit_table(testutil::gaussian(60, 4, rng), "t");
  TrainConfig c = small_config(TrainMode::unsupervised);
  c.lr = 1e200;
  auto res = train(src, tgt, nullptr, c);
  EXPECT_TRUE(res.diverged);
  EXPECT_TRUE(res.mapping.W.allFinite());
}

TEST(Train, RejectsInconsistentInputs) {
  std::mt19937_64 rng(10);
  auto src = unit_table(testutil::gaussian(20, 4, rng), "s");
  auto tgt = unit_table(testutil::gaussian(20, 3, rng), "t");
  EXPECT_THROW(train(src, tgt, nullptr, small_config(TrainMode::unsupervised)), DataError);
  auto tgt4 = unit_table(testutil::gaussian(20, 4, rng), "t");
  EXPECT_THROW(train(src, tgt4, nullptr, small_config(TrainMode::semi)), DataError);
  AlignedLexicon empty;
  EXPECT_THROW(train(src, tgt4, &empty, small_config(TrainMode::supervised)), DataError);
}

TEST(Train, SemiCslsObjectiveAndAdamRun) {
  ToySpec spec;
  spec.seed = 12;
  spec.anchors_per_class = 3;
  auto data = generate_toy(spec);
  TrainConfig c = toy_preset();
  c.rounds = 1;
  c.iters_per_round = 50;
  c.f_s = SupervisedObjective::csls;
  c.sup_optimizer = SupOptimizer::adam;
  c.beta = 0.01;
  auto res = train(data.src, data.tgt, &data.anchors, c);
  EXPECT_FALSE(res.diverged);
  EXPECT_TRUE(res.mapping.W.allFinite());
}

TEST(MappingIo, TextAndBinaryRoundTrip) {
  testutil::TempDir dir("map");
  std::mt19937_64 rng(13);
  Matrix W = testutil::gaussian(6, 6, rng);
  save_mapping_text(W, dir.file("W.txt"));
  save_mapping_binary(W, dir.file("W.bin"));
  EXPECT_EQ(load_mapping_text(dir.file("W.txt")), W);
  EXPECT_EQ(load_mapping_binary(dir.file("W.bin")), W);
  EXPECT_EQ(load_mapping(dir.file("W.txt")), W);
  EXPECT_EQ(load_mapping(dir.file("W.bin")), W);
  testutil::write_file(dir.file("bad.txt"), "2\n1 0\n0\n");
  EXPECT_THROW(load_mapping(dir.file("bad.txt")), DataError);
}
