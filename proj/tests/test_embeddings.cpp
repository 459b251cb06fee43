#include "bliss/embeddings.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace bliss;
using testutil::TempDir;
using testutil::write_file;

TEST(LoadEmbeddings, ThreeLineFileReadsBack) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "a 1 2\nb 3 4\nc 5 6\n");
  auto t = load_embeddings(path, 10);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(t.dim(), 2);
  EXPECT_EQ(t.word(1), "b");
  EXPECT_EQ(t.vectors()(2, 1), 6.0);
  EXPECT_EQ(t.norm_state(), NormState::raw);
}

TEST(LoadEmbeddings, HeaderIsOptionalAndHonoured) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "3 2\na 1 2\nb 3 4\nc 5 6\n");
  LoadStats st;
  auto t = load_embeddings(path, 10, std::nullopt, &st);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(st.header_rows, 3);
}

TEST(LoadEmbeddings, DuplicateTokenKeepsFirst) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "the 1 0\ncat 0 1\nthe 5 5\ndog 1 1\n");
  LoadStats st;
  auto t = load_embeddings(path, 10, std::nullopt, &st);
  EXPECT_EQ(t.size(), 3);
  EXPECT_EQ(st.duplicate_rows, 1u);
  EXPECT_EQ(t.row(*t.find("the"))(0), 1.0);
}

TEST(LoadEmbeddings, MaxVocabTakesFileOrderPrefix) {
  TempDir dir("emb");
  std::string text;
  for (int i = 0; i < 200; ++i) text += "w" + std::to_string(i) + " " + std::to_string(i) + " 1\n";
  auto t = load_embeddings(write_file(dir.file("a.vec"), text), 75);
  ASSERT_EQ(t.size(), 75);
  for (Index i = 0; i < 75; ++i) EXPECT_EQ(t.word(i), "w" + std::to_string(i));
}

TEST(LoadEmbeddings, MalformedRowsAreSkippedAndCounted) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "a 1 2\nb 3\nc x 4\nd 1 2 3\ne 7 8\n");
  LoadStats st;
  auto t = load_embeddings(path, 10, std::nullopt, &st);
  EXPECT_EQ(t.size(), 2);
  EXPECT_EQ(st.skipped_rows, 3u);
}

TEST(LoadEmbeddings, NonFiniteValuesAreMalformed) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "a 1 2\nb nan 1\nc inf 1\n");
  LoadStats st;
  auto t = load_embeddings(path, 10, std::nullopt, &st);
  EXPECT_EQ(t.size(), 1);
  EXPECT_EQ(st.skipped_rows, 2u);
}

TEST(LoadEmbeddings, HeaderDimensionMismatchIsHardError) {
  TempDir dir("emb");
  auto path = write_file(dir.file("a.vec"), "2 3\na 1 2 3\nb 1 2 3\n");
  EXPECT_THROW(load_embeddings(path, 10, Index{2}), DataError);
}

TEST(LoadEmbeddings, ZeroRowsIsHardError) {
  TempDir dir("emb");
  EXPECT_THROW(load_embeddings(write_file(dir.file("a.vec"), "1 2\n"), 10), DataError);
  EXPECT_THROW(load_embeddings(dir.file("missing.vec"), 10), DataError);
}

TEST(LoadEmbeddings, TokensAreNfcNormalized) {
  TempDir dir("emb");
  // "e" + combining acute accent (NFD) becomes the precomposed U+00E9.
  auto path = write_file(dir.file("a.vec"), "caf\x65\xcc\x81 1 2\n");
  auto t = load_embeddings(path, 10);
  EXPECT_TRUE(t.find("caf\xc3\xa9").has_value());
}

TEST(LoadEmbeddings, SaveLoadRoundTripsExactly) {
  TempDir dir("emb");
  std::mt19937_64 rng(3);
  auto t = testutil::table(testutil::gaussian(20, 5, rng));
  save_embeddings(t, dir.file("t.vec"));
  auto back = load_embeddings(dir.file("t.vec"), 100);
  EXPECT_EQ(back.words(), t.words());
  EXPECT_EQ(back.vectors(), t.vectors());
}

TEST(EmbeddingCache, RoundTripsBitExactly) {
  TempDir dir("emb");
  std::mt19937_64 rng(4);
  auto t = normalize(testutil::table(testutil::gaussian(30, 7, rng)), NormState::unit);
  save_embedding_cache(t, dir.file("t.bin"));
  auto back = load_embedding_cache(dir.file("t.bin"));
  EXPECT_EQ(back.words(), t.words());
  EXPECT_EQ(back.vectors(), t.vectors());
  EXPECT_EQ(back.norm_state(), NormState::unit);
}

TEST(EmbeddingCache, RejectsForeignFiles) {
  TempDir dir("emb");
  EXPECT_THROW(load_embedding_cache(write_file(dir.file("x.bin"), "not a cache at all")),
               DataError);
}

TEST(Normalize, UnitThreeFourFive) {
  RowMatrix m(1, 2);
  m << 3, 4;
  auto t = normalize(testutil::table(m), NormState::unit);
  EXPECT_NEAR(t.vectors()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(t.vectors()(0, 1), 0.8, 1e-15);
  EXPECT_EQ(t.norm_state(), NormState::unit);
}

TEST(Normalize, CenteredUnitSymmetricSetUnchanged) {
  RowMatrix m(2, 2);
  m << 1, 0, -1, 0;
  auto t = normalize(testutil::table(m), NormState::centered_unit);
  EXPECT_EQ(t.vectors(), m);
}

TEST(Normalize, CenteredUnitHandArithmetic) {
  RowMatrix m(2, 2);
  m << 2, 0, 0, 2;
  auto t = normalize(testutil::table(m), NormState::centered_unit);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(t.vectors()(0, 0), r, 1e-15);
  EXPECT_NEAR(t.vectors()(0, 1), -r, 1e-15);
  EXPECT_NEAR(t.vectors()(1, 0), -r, 1e-15);
  EXPECT_NEAR(t.vectors()(1, 1), r, 1e-15);
}

TEST(Normalize, RowNormsAreOne) {
  std::mt19937_64 rng(5);
  for (auto scheme : {NormState::unit, NormState::centered_unit}) {
    auto t = normalize(testutil::table(testutil::gaussian(50, 6, rng)), scheme);
    for (Index i = 0; i < t.size(); ++i) EXPECT_NEAR(t.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(Normalize, UnitOnUnitRowsIsIdempotent) {
  std::mt19937_64 rng(6);
  auto once = normalize(testutil::table(testutil::gaussian(40, 4, rng)), NormState::unit);
  auto twice = normalize(EmbeddingTable(once.words(), once.vectors()), NormState::unit);
  EXPECT_LT((twice.vectors() - once.vectors()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Normalize, ZeroRowNamesTheToken) {
  RowMatrix m(2, 2);
  m << 1, 2, 0, 0;
  try {
    normalize(EmbeddingTable({"ok", "empty"}, m), NormState::unit);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty"), std::string::npos);
  }
}

TEST(Normalize, RequiresRawInput) {
  RowMatrix m(1, 2);
  m << 1, 0;
  auto t = normalize(testutil::table(m), NormState::unit);
  EXPECT_THROW(normalize(t, NormState::unit), UsageError);
}

TEST(EmbeddingTable, RejectsDuplicatesAndCountMismatch) {
  RowMatrix m(2, 1);
  m << 1, 2;
  EXPECT_THROW(EmbeddingTable({"a", "a"}, m), DataError);
  EXPECT_THROW(EmbeddingTable({"a"}, m), DataError);
}

class LexiconTest : public ::testing::Test {
 protected:
  void SetUp() override {
    RowMatrix m = RowMatrix::Identity(5, 5);
    src = EmbeddingTable({"a", "b", "c", "d", "e"}, m);
    tgt = EmbeddingTable({"A", "B", "C", "D", "E"}, m);
  }
  TempDir dir{"lex"};
  EmbeddingTable src, tgt;
};

TEST_F(LexiconTest, AllInVocabulary) {
  auto lex = load_lexicon(write_file(dir.file("d.txt"), "a A\nb B\nc C\nd D\ne E\n"), src, tgt);
  EXPECT_EQ(lex.size(), 5u);
  EXPECT_EQ(lex.oov, 0u);
  EXPECT_EQ(lex.pairs[2], (std::pair<Index, Index>{2, 2}));
}

TEST_F(LexiconTest, OovTargetsDroppedAndCounted) {
  auto lex = load_lexicon(write_file(dir.file("d.txt"), "a A\nb X\nc C\nd Y\ne E\n"), src, tgt);
  EXPECT_EQ(lex.size(), 3u);
  EXPECT_EQ(lex.oov, 2u);
}

TEST_F(LexiconTest, DuplicatePairsRemovedOneToManyKept) {
  auto lex = load_lexicon(write_file(dir.file("d.txt"), "# comment\na A\na A\na B\n\nb B\n"),
                          src, tgt);
  EXPECT_EQ(lex.size(), 3u);
}

TEST_F(LexiconTest, SaveWritesScoreColumn) {
  std::vector<std::pair<Index, Index>> pairs{{0, 1}, {2, 2}};
  std::vector<double> scores{0.5, 0.25};
  save_lexicon(dir.file("out.txt"), src, tgt, pairs, &scores);
  EXPECT_EQ(testutil::read_file(dir.file("out.txt")), "a B 0.5\nc C 0.25\n");
  auto back = load_lexicon(dir.file("out.txt"), src, tgt);
  EXPECT_EQ(back.pairs, pairs);
}
