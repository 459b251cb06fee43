#pragma once

// Word-embedding tables and bilingual dictionaries: loading from the
// fastText `.vec` text format, a versioned binary cache, and row
// normalization.

#include "bliss/core.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bliss {

enum class NormState { raw, unit, centered_unit };

inline std::string to_string(NormState s) {
  switch (s) {
    case NormState::raw: return "raw";
    case NormState::unit: return "unit";
    case NormState::centered_unit: return "centered_unit";
  }
  return "raw";
}

inline NormState norm_state_from_string(std::string_view s) {
  if (s == "raw") return NormState::raw;
  if (s == "unit") return NormState::unit;
  if (s == "centered_unit") return NormState::centered_unit;
  throw UsageError("unknown normalization scheme: " + std::string(s));
}

/// Canonical (NFC) form of a UTF-8 token. Pure ASCII is returned unchanged.
inline std::string nfc(std::string_view token) {
  if (std::all_of(token.begin(), token.end(),
                  [](char c) { return static_cast<unsigned char>(c) < 0x80; })) {
    return std::string(token);
  }
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(token.data(), static_cast<int32_t>(token.size())));
  icu::UnicodeString out = norm->normalize(in, status);
  if (U_FAILURE(status)) return std::string(token);
  std::string result;
  out.toUTF8String(result);
  return result;
}

/// Ordered vocabulary with one d-dimensional vector per word. Row order is
/// file order, which for fastText files is frequency order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(std::vector<std::string> words, RowMatrix vectors,
                 NormState state = NormState::raw)
      : words_(std::move(words)), vectors_(std::move(vectors)), state_(state) {
    if (static_cast<Index>(words_.size()) != vectors_.rows()) {
      throw DataError("word count " + std::to_string(words_.size()) +
                      " does not match row count " + std::to_string(vectors_.rows()));
    }
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<Index>(i)).second) {
        throw DataError("duplicate token in table: " + words_[i]);
      }
    }
  }

  Index size() const { return vectors_.rows(); }
  Index dim() const { return vectors_.cols(); }
  bool empty() const { return size() == 0; }

  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(Index i) const { return words_[static_cast<std::size_t>(i)]; }
  const RowMatrix& vectors() const { return vectors_; }
  auto row(Index i) const { return vectors_.row(i); }
  NormState norm_state() const { return state_; }

  std::optional<Index> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// The first `n` rows (or all of them when `n` exceeds the size).
  EmbeddingTable head(Index n) const {
    n = std::min(n, size());
    std::vector<std::string> w(words_.begin(), words_.begin() + n);
    return EmbeddingTable(std::move(w), vectors_.topRows(n), state_);
  }

 private:
  std::vector<std::string> words_;
  RowMatrix vectors_;
  NormState state_ = NormState::raw;
  std::unordered_map<std::string, Index> index_;
};

struct LoadStats {
  std::size_t skipped_rows = 0;
  std::size_t duplicate_rows = 0;
  std::optional<Index> header_rows;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads a `.vec` text file. The optional first line "n d" is honoured when
/// present; otherwise the dimension comes from `dim` or the first data line.
/// Malformed rows are skipped and counted; duplicate tokens keep the first
/// occurrence. At most `max_vocab` rows are returned.
inline EmbeddingTable load_embeddings(const std::string& path, Index max_vocab,
                                      std::optional<Index> dim = std::nullopt,
                                      LoadStats* stats = nullptr) {
  if (max_vocab <= 0) throw UsageError("max_vocab must be positive");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);

  LoadStats local;
  std::optional<Index> d = dim;
  std::vector<std::string> words;
  std::vector<double> values;
  std::set<std::string> seen;
  std::string line;
  bool first = true;

  while (static_cast<Index>(words.size()) < max_vocab && std::getline(in, line)) {
    auto fields = detail::split_ws(line);
    if (first) {
      first = false;
      long long hn = 0, hd = 0;
      if (fields.size() == 2 && detail::parse_int(fields[0], hn) &&
          detail::parse_int(fields[1], hd)) {
        if (d && *d != hd) {
          throw DataError("dimension mismatch: header says " + std::to_string(hd) +
                          ", expected " + std::to_string(*d));
        }
        d = static_cast<Index>(hd);
        local.header_rows = static_cast<Index>(hn);
        continue;
      }
    }
    if (fields.empty()) continue;
    if (!d) d = static_cast<Index>(fields.size()) - 1;
    if (static_cast<Index>(fields.size()) != *d + 1 || *d <= 0) {
      ++local.skipped_rows;
      continue;
    }
    std::vector<double> row(static_cast<std::size_t>(*d));
    bool ok = true;
    for (Index k = 0; k < *d && ok; ++k) {
      ok = detail::parse_double(fields[static_cast<std::size_t>(k + 1)],
                                row[static_cast<std::size_t>(k)]);
    }
    if (!ok) {
      ++local.skipped_rows;
      continue;
    }
    std::string token = nfc(fields[0]);
    if (!seen.insert(token).second) {
      ++local.duplicate_rows;
      continue;
    }
    words.push_back(std::move(token));
    values.insert(values.end(), row.begin(), row.end());
  }
  if (words.empty()) throw DataError("no embedding rows parsed from " + path);

  const Index n = static_cast<Index>(words.size());
  RowMatrix m = Eigen::Map<RowMatrix>(values.data(), n, *d);
  if (stats) *stats = local;
  return EmbeddingTable(std::move(words), std::move(m), NormState::raw);
}

/// Writes a `.vec` file with an "n d" header and round-trip decimal precision.
inline void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[32];
  for (Index i = 0; i < table.size(); ++i) {
    out << table.word(i);
    for (Index k = 0; k < table.dim(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", table.vectors()(i, k));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

inline constexpr char kCacheMagic[8] = {'B', 'L', 'S', 'E', 'M', 'B', '\0', '\1'};
inline constexpr std::uint32_t kCacheVersion = 1;

/// Binary cache: magic, version, n, d, norm state, length-prefixed tokens,
/// then n*d little-endian doubles. Round-trips bit-exactly.
inline void save_embedding_cache(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cache: " + path);
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
  out.write(kCacheMagic, sizeof kCacheMagic);
  put(kCacheVersion);
  put(static_cast<std::uint64_t>(table.size()));
  put(static_cast<std::uint64_t>(table.dim()));
  put(static_cast<std::uint32_t>(table.norm_state()));
  for (const auto& w : table.words()) {
    put(static_cast<std::uint32_t>(w.size()));
    out.write(w.data(), static_cast<std::streamsize>(w.size()));
  }
  out.write(reinterpret_cast<const char*>(table.vectors().data()),
            static_cast<std::streamsize>(sizeof(double) * table.vectors().size()));
  if (!out) throw DataError("failed writing cache: " + path);
}

inline EmbeddingTable load_embedding_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open cache: " + path);
  auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("truncated cache: " + path);
  };
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kCacheMagic)) {
    throw DataError("not an embedding cache: " + path);
  }
  std::uint32_t version = 0, state = 0;
  std::uint64_t n = 0, d = 0;
  get(version);
  if (version != kCacheVersion) {
    throw DataError("unsupported cache version " + std::to_string(version));
  }
  get(n);
  get(d);
  get(state);
  if (state > 2) throw DataError("corrupt cache normalization state");
  std::vector<std::string> words(n);
  for (auto& w : words) {
    std::uint32_t len = 0;
    get(len);
    w.resize(len);
    in.read(w.data(), len);
    if (!in) throw DataError("truncated cache: " + path);
  }
  RowMatrix m(static_cast<Index>(n), static_cast<Index>(d));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw DataError("truncated cache: " + path);
  return EmbeddingTable(std::move(words), std::move(m), static_cast<NormState>(state));
}

/// Unit-normalizes rows, optionally after subtracting the column mean.
/// Requires a raw table.
inline EmbeddingTable normalize(const EmbeddingTable& table, NormState scheme) {
  if (scheme == NormState::raw) throw UsageError("normalize: target scheme must not be raw");
  if (table.norm_state() != NormState::raw) {
    throw UsageError("normalize: table is already " + to_string(table.norm_state()));
  }
  RowMatrix m = table.vectors();
  if (scheme == NormState::centered_unit) {
    Eigen::RowVectorXd mean = m.colwise().mean();
    m.rowwise() -= mean;
  }
  for (Index i = 0; i < m.rows(); ++i) {
    const double nrm = m.row(i).norm();
    if (!(nrm > 0.0)) throw DataError("zero-norm embedding for token: " + table.word(i));
    m.row(i) /= nrm;
  }
  return EmbeddingTable(table.words(), std::move(m), scheme);
}

/// Source/target index pairs; one-to-many allowed, exact duplicates not.
struct AlignedLexicon {
  std::vector<std::pair<Index, Index>> pairs;
  std::size_t oov = 0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Reads "src tgt" lines (UTF-8, `#` comments). Pairs with an OOV side are
/// dropped and counted; duplicates are removed, keeping first-seen order.
inline AlignedLexicon load_lexicon(const std::string& path, const EmbeddingTable& src,
                                   const EmbeddingTable& tgt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dictionary: " + path);
  AlignedLexicon lex;
  std::set<std::pair<Index, Index>> seen;
  std::string line;
  while (std::getline(in, line)) {
    auto fields = detail::split_ws(line);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() < 2) continue;
    auto s = src.find(nfc(fields[0]));
    auto t = tgt.find(nfc(fields[1]));
    if (!s || !t) {
      ++lex.oov;
      continue;
    }
    if (seen.emplace(*s, *t).second) lex.pairs.emplace_back(*s, *t);
  }
  return lex;
}

/// Writes pairs as "src tgt" lines, with an optional third score column.
inline void save_lexicon(const std::string& path, const EmbeddingTable& src,
                         const EmbeddingTable& tgt,
                         const std::vector<std::pair<Index, Index>>& pairs,
                         const std::vector<double>* scores = nullptr) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dictionary: " + path);
  char buf[32];
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out << src.word(pairs[i].first) << ' ' << tgt.word(pairs[i].second);
    if (scores) {
      std::snprintf(buf, sizeof buf, "%.17g", (*scores)[i]);
      out << ' ' << buf;
    }
    out << '\n';
  }
}

}  // namespace bliss
