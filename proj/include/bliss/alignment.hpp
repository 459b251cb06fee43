#pragma once

// Joint training of the linear map W: adversarial distribution matching,
// supervised alignment of seed pairs and the W^T W consistency term, with
// model selection by the unsupervised CSLS criterion.

#include "bliss/core.hpp"
#include "bliss/discriminator.hpp"
#include "bliss/embeddings.hpp"
#include "bliss/losses.hpp"
#include "bliss/metric.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace bliss {

enum class TrainMode { unsupervised, supervised, semi };
enum class InitScheme { identity, random_orthogonal };
enum class SupOptimizer { sgd, adam };

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "unsup" || s == "unsupervised") return TrainMode::unsupervised;
  if (s == "sup" || s == "supervised") return TrainMode::supervised;
  if (s == "semi") return TrainMode::semi;
  throw UsageError("unknown mode: " + s);
}

inline std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::unsupervised: return "unsup";
    case TrainMode::supervised: return "sup";
    case TrainMode::semi: return "semi";
  }
  return "unsup";
}

/// d x d map with the settings that produced it.
struct MappingMatrix {
  Matrix W;
  std::string mode = "none";
  std::uint64_t seed = 0;
  std::string config_hash;

  Index dim() const { return W.rows(); }
};

struct TrainConfig {
  TrainMode mode = TrainMode::semi;
  SupervisedObjective f_s = SupervisedObjective::cosine;
  LossWeights weights;
  Index batch_size = 32;
  Index vocab_cap = 75000;
  int dis_steps = 5;
  int rounds = 15;
  int iters_per_round = 10000;
  double lr = 0.1;
  double dis_lr = 0.0;  // 0 means "same as lr"
  double lr_decay = 0.98;
  int lr_halving_patience = 2;
  Index csls_k = 10;
  int csls_refresh = 500;
  Index hubness_threshold = 20;
  std::uint64_t seed = 0;
  std::vector<Index> dis_hidden = {2048, 2048};
  double dis_dropout = 0.1;
  double label_smoothing = 0.1;
  double leaky_slope = 0.2;
  InitScheme init = InitScheme::identity;
  SupOptimizer sup_optimizer = SupOptimizer::sgd;
  double adam_lr = 0.001;
  double beta = 0.0;  // > 0 enables the projection step after each update
  Index criterion_vocab = 10000;
  int log_every = 1000;
  bool select_best = true;

  /// Terms that participate for this mode.
  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (mode == TrainMode::unsupervised) w.sup = 0.0;
    if (mode == TrainMode::supervised) w.adv = 0.0;
    return w;
  }
};

/// Flat key=value view of a config, in a fixed key order.
inline std::vector<std::pair<std::string, std::string>> to_key_values(const TrainConfig& c) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string hidden;
  for (std::size_t i = 0; i < c.dis_hidden.size(); ++i) {
    if (i) hidden += ',';
    hidden += std::to_string(c.dis_hidden[i]);
  }
  return {
      {"mode", to_string(c.mode)},
      {"f_s", to_string(c.f_s)},
      {"lambda_adv", num(c.weights.adv)},
      {"lambda_sup", num(c.weights.sup)},
      {"lambda_orth", num(c.weights.orth)},
      {"batch_size", std::to_string(c.batch_size)},
      {"vocab_cap", std::to_string(c.vocab_cap)},
      {"dis_steps", std::to_string(c.dis_steps)},
      {"rounds", std::to_string(c.rounds)},
      {"iters_per_round", std::to_string(c.iters_per_round)},
      {"lr", num(c.lr)},
      {"dis_lr", num(c.dis_lr)},
      {"lr_decay", num(c.lr_decay)},
      {"lr_halving_patience", std::to_string(c.lr_halving_patience)},
      {"csls_k", std::to_string(c.csls_k)},
      {"csls_refresh", std::to_string(c.csls_refresh)},
      {"hubness_threshold", std::to_string(c.hubness_threshold)},
      {"seed", std::to_string(c.seed)},
      {"dis_hidden", hidden},
      {"dis_dropout", num(c.dis_dropout)},
      {"label_smoothing", num(c.label_smoothing)},
      {"leaky_slope", num(c.leaky_slope)},
      {"init", c.init == InitScheme::identity ? "identity" : "random_orthogonal"},
      {"sup_optimizer", c.sup_optimizer == SupOptimizer::sgd ? "sgd" : "adam"},
      {"adam_lr", num(c.adam_lr)},
      {"beta", num(c.beta)},
      {"criterion_vocab", std::to_string(c.criterion_vocab)},
      {"log_every", std::to_string(c.log_every)},
      {"select_best", c.select_best ? "true" : "false"},
  };
}

/// Applies one key=value setting; unknown keys are a usage error.
inline void apply_key_value(TrainConfig& c, const std::string& key, const std::string& value) {
  auto to_d = [&](const std::string& v) {
    double out = 0;
    if (!detail::parse_double(v, out)) throw UsageError("bad value for " + key + ": " + v);
    return out;
  };
  auto to_i = [&](const std::string& v) {
    long long out = 0;
    if (!detail::parse_int(v, out)) throw UsageError("bad value for " + key + ": " + v);
    return out;
  };
  if (key == "mode") c.mode = train_mode_from_string(value);
  else if (key == "f_s") c.f_s = supervised_objective_from_string(value);
  else if (key == "lambda_adv") c.weights.adv = to_d(value);
  else if (key == "lambda_sup") c.weights.sup = to_d(value);
  else if (key == "lambda_orth") c.weights.orth = to_d(value);
  else if (key == "batch_size") c.batch_size = to_i(value);
  else if (key == "vocab_cap") c.vocab_cap = to_i(value);
  else if (key == "dis_steps") c.dis_steps = static_cast<int>(to_i(value));
  else if (key == "rounds") c.rounds = static_cast<int>(to_i(value));
  else if (key == "iters_per_round") c.iters_per_round = static_cast<int>(to_i(value));
  else if (key == "lr") c.lr = to_d(value);
  else if (key == "dis_lr") c.dis_lr = to_d(value);
  else if (key == "lr_decay") c.lr_decay = to_d(value);
  else if (key == "lr_halving_patience") c.lr_halving_patience = static_cast<int>(to_i(value));
  else if (key == "csls_k") c.csls_k = to_i(value);
  else if (key == "csls_refresh") c.csls_refresh = static_cast<int>(to_i(value));
  else if (key == "hubness_threshold") c.hubness_threshold = to_i(value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_i(value));
  else if (key == "dis_hidden") {
    c.dis_hidden.clear();
    std::stringstream ss(value);
    std::string part;
    while (std::getline(ss, part, ',')) c.dis_hidden.push_back(to_i(part));
  } else if (key == "dis_dropout") c.dis_dropout = to_d(value);
  else if (key == "label_smoothing") c.label_smoothing = to_d(value);
  else if (key == "leaky_slope") c.leaky_slope = to_d(value);
  else if (key == "init") {
    if (value == "identity") c.init = InitScheme::identity;
    else if (value == "random_orthogonal") c.init = InitScheme::random_orthogonal;
    else throw UsageError("bad init scheme: " + value);
  } else if (key == "sup_optimizer") {
    if (value == "sgd") c.sup_optimizer = SupOptimizer::sgd;
    else if (value == "adam") c.sup_optimizer = SupOptimizer::adam;
    else throw UsageError("bad supervised optimizer: " + value);
  } else if (key == "adam_lr") c.adam_lr = to_d(value);
  else if (key == "beta") c.beta = to_d(value);
  else if (key == "criterion_vocab") c.criterion_vocab = to_i(value);
  else if (key == "log_every") c.log_every = static_cast<int>(to_i(value));
  else if (key == "select_best") c.select_best = (value == "true" || value == "1");
  else throw UsageError("unknown config key: " + key);
}

/// Hyperparameters of the 2-d toy study: tiny discriminator, short schedule,
/// a Haar-random orthogonal start and a heavier supervised term.
inline TrainConfig toy_preset() {
  TrainConfig c;
  c.weights.sup = 3.0;
  c.dis_hidden = {64, 64};
  c.batch_size = 32;
  c.rounds = 5;
  c.iters_per_round = 800;
  c.csls_k = 10;
  c.csls_refresh = 100;
  c.init = InitScheme::random_orthogonal;
  c.criterion_vocab = 100000;
  c.log_every = 200;
  return c;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix).
inline Matrix random_orthogonal(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(d, d);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

struct CriterionOptions {
  Index vocab = 10000;  // most frequent words per side
  Index k = 10;
  Index chunk_rows = 2048;
};

/// Mean cos(Wx, y_hat) where y_hat is the CSLS rank-1 translation of x,
/// over the `vocab` most frequent source words against the `vocab` most
/// frequent target words.
inline double unsupervised_criterion(const Matrix& W, const RowMatrix& src, const RowMatrix& tgt,
                                     const CriterionOptions& opt = {}) {
  const Index ns = std::min(opt.vocab, src.rows());
  const Index nt = std::min(opt.vocab, tgt.rows());
  const Index k = std::min({opt.k, ns, nt});
  RowMatrix mapped = unit_rows(map_rows(src.topRows(ns), W));
  RowMatrix tu = unit_rows(tgt.topRows(nt));
  CslsGammas g = csls_gammas(mapped, tu, k, false, opt.chunk_rows);
  double sum = 0.0;
  const Index step = std::max<Index>(1, opt.chunk_rows);
  for (Index start = 0; start < ns; start += step) {
    const Index rows = std::min(step, ns - start);
    RowMatrix sims = mapped.middleRows(start, rows) * tu.transpose();
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      Index best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < nt; ++j) {
        const double s = csls_score(sims(r, j), g.src(i), g.tgt(j));
        if (s > best_score) {
          best_score = s;
          best = j;
        }
      }
      sum += sims(r, best);
    }
  }
  return sum / static_cast<double>(ns);
}

inline double unsupervised_criterion(const Matrix& W, const EmbeddingTable& src,
                                     const EmbeddingTable& tgt, const TrainConfig& cfg) {
  return unsupervised_criterion(W, src.vectors(), tgt.vectors(),
                                {cfg.criterion_vocab, cfg.csls_k, 2048});
}

/// One line of the training log. Round-end records carry the criterion.
struct TrainLogRecord {
  int round = 0;
  long long iter = 0;
  double loss_dis = 0.0;
  double loss_adv = 0.0;
  double loss_sup = 0.0;
  double loss_orth = 0.0;
  double lr = 0.0;
  std::optional<double> criterion;
  std::optional<double> precision_at_1;
};

struct TrainResult {
  MappingMatrix mapping;
  std::vector<TrainLogRecord> log;
  double best_criterion = -std::numeric_limits<double>::infinity();
  int best_round = -1;
  bool diverged = false;
};

/// Optional per-round probe, e.g. gold precision@1 of the current W.
using RoundProbe = std::function<double(const Matrix&)>;

inline std::string config_fingerprint(const TrainConfig& cfg) {
  // FNV-1a over the canonical key=value text.
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, v] : to_key_values(cfg)) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Alternates discriminator updates and mapping updates on the joint loss.
/// Returns the W with the best unsupervised criterion across rounds (or the
/// final W when `select_best` is off). On a non-finite loss training stops
/// and the last finite checkpoint is returned with `diverged` set.
inline TrainResult train(const EmbeddingTable& src, const EmbeddingTable& tgt,
                         const AlignedLexicon* lexicon, const TrainConfig& cfg,
                         const RoundProbe& probe = {}) {
  if (src.dim() != tgt.dim()) throw DataError("source and target dimensions differ");
  if (src.empty() || tgt.empty()) throw DataError("empty embedding table");
  const bool needs_lex = cfg.mode != TrainMode::unsupervised;
  if (needs_lex && (!lexicon || lexicon->empty())) {
    throw DataError("mode " + to_string(cfg.mode) + " requires a non-empty lexicon");
  }
  for (auto [s, t] : needs_lex ? lexicon->pairs : std::vector<std::pair<Index, Index>>{}) {
    if (s < 0 || s >= src.size() || t < 0 || t >= tgt.size()) {
      throw DataError("lexicon index out of range");
    }
  }
  if (cfg.batch_size <= 0 || cfg.rounds <= 0 || cfg.iters_per_round <= 0) {
    throw UsageError("batch_size, rounds and iters_per_round must be positive");
  }

  const Index d = src.dim();
  const LossWeights w = cfg.effective_weights();
  const bool adversarial = w.adv != 0.0;
  const bool supervised = w.sup != 0.0 && needs_lex;
  const double dis_lr = cfg.dis_lr > 0.0 ? cfg.dis_lr : cfg.lr;

  std::mt19937_64 rng(cfg.seed);
  Matrix W = cfg.init == InitScheme::identity ? Matrix::Identity(d, d) : random_orthogonal(d, rng);
  DiscriminatorParams D = DiscriminatorParams::init(d, cfg.dis_hidden, rng);
  D.input_dropout = cfg.dis_dropout;
  D.label_smoothing = cfg.label_smoothing;
  D.leaky_slope = cfg.leaky_slope;

  const Index src_cap = std::min(cfg.vocab_cap, src.size());
  const Index tgt_cap = std::min(cfg.vocab_cap, tgt.size());
  std::uniform_int_distribution<Index> pick_src(0, src_cap - 1);
  std::uniform_int_distribution<Index> pick_tgt(0, tgt_cap - 1);
  std::uniform_int_distribution<std::size_t> pick_pair(0, needs_lex ? lexicon->size() - 1 : 0);

  auto gather = [&](const RowMatrix& from, auto& dist) {
    RowMatrix b(cfg.batch_size, d);
    for (Index i = 0; i < cfg.batch_size; ++i) b.row(i) = from.row(dist(rng));
    return b;
  };

  TrainResult result;
  result.mapping.mode = to_string(cfg.mode);
  result.mapping.seed = cfg.seed;
  result.mapping.config_hash = config_fingerprint(cfg);
  Matrix best_W = W;

  CslsContext ctx;
  std::vector<std::pair<Index, Index>> sup_batch(static_cast<std::size_t>(cfg.batch_size));
  Matrix adam_m = Matrix::Zero(d, d), adam_v = Matrix::Zero(d, d);
  long long adam_t = 0;

  double lr = cfg.lr;
  int stale_rounds = 0;
  long long step = 0;
  TrainLogRecord acc;
  int acc_n = 0;

  auto finish_diverged = [&]() {
    result.diverged = true;
    result.mapping.W = best_W;
    return result;
  };

  for (int round = 0; round < cfg.rounds; ++round) {
    for (int it = 0; it < cfg.iters_per_round; ++it, ++step) {
      double ld = 0.0;
      if (adversarial) {
        for (int s = 0; s < cfg.dis_steps; ++s) {
          RowMatrix xb = gather(src.vectors(), pick_src);
          RowMatrix yb = gather(tgt.vectors(), pick_tgt);
          DiscriminatorParams g = D.zeros_like();
          ld = loss_discriminator(D, W, xb, yb, &g, true, &rng);
          if (!std::isfinite(ld)) return finish_diverged();
          D.axpy(-dis_lr, g);
        }
      }

      RowMatrix xb = gather(src.vectors(), pick_src);
      if (supervised) {
        for (auto& p : sup_batch) p = lexicon->pairs[pick_pair(rng)];
        if (cfg.f_s == SupervisedObjective::csls && step % std::max(1, cfg.csls_refresh) == 0) {
          ctx = build_csls_context(W, src.vectors(), tgt.vectors(), lexicon->pairs, cfg.csls_k);
        }
      }

      MapLossInputs in;
      in.discriminator = &D;
      in.adv_batch = &xb;
      LossWeights unsup_w = w;
      unsup_w.sup = 0.0;
      Matrix g_unsup, g_sup;
      MapLossTerms terms = total_map_loss(W, unsup_w, in, &g_unsup);
      if (supervised) {
        terms.sup = loss_supervised(W, src.vectors(), tgt.vectors(), sup_batch, cfg.f_s,
                                    cfg.f_s == SupervisedObjective::csls ? &ctx : nullptr,
                                    &g_sup);
        terms.total += w.sup * terms.sup;
        g_sup *= w.sup;
      }
      if (!std::isfinite(terms.total)) return finish_diverged();

      W -= lr * g_unsup;
      if (supervised) {
        if (cfg.sup_optimizer == SupOptimizer::sgd) {
          W -= lr * g_sup;
        } else {
          constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
          ++adam_t;
          adam_m = b1 * adam_m + (1 - b1) * g_sup;
          adam_v = b2 * adam_v + (1 - b2) * g_sup.cwiseProduct(g_sup);
          const double c1 = 1 - std::pow(b1, static_cast<double>(adam_t));
          const double c2 = 1 - std::pow(b2, static_cast<double>(adam_t));
          W.array() -= cfg.adam_lr * (adam_m.array() / c1) /
                       ((adam_v.array() / c2).sqrt() + eps);
        }
      }
      if (cfg.beta > 0.0) W = beta_projection_step(W, cfg.beta);
      if (!W.allFinite()) return finish_diverged();

      acc.loss_dis += ld;
      acc.loss_adv += terms.adv;
      acc.loss_sup += terms.sup;
      acc.loss_orth += terms.orth;
      ++acc_n;
      if (cfg.log_every > 0 && (it + 1) % cfg.log_every == 0) {
        TrainLogRecord rec;
        rec.round = round;
        rec.iter = step + 1;
        rec.loss_dis = acc.loss_dis / acc_n;
        rec.loss_adv = acc.loss_adv / acc_n;
        rec.loss_sup = acc.loss_sup / acc_n;
        rec.loss_orth = acc.loss_orth / acc_n;
        rec.lr = lr;
        result.log.push_back(rec);
        acc = {};
        acc_n = 0;
      }
    }

    const double crit = unsupervised_criterion(W, src, tgt, cfg);
    if (!std::isfinite(crit)) return finish_diverged();
    TrainLogRecord rec;
    rec.round = round;
    rec.iter = step;
    rec.lr = lr;
    rec.criterion = crit;
    if (probe) rec.precision_at_1 = probe(W);
    result.log.push_back(rec);

    if (crit > result.best_criterion) {
      result.best_criterion = crit;
      result.best_round = round;
      best_W = W;
      stale_rounds = 0;
    } else if (++stale_rounds >= cfg.lr_halving_patience) {
      lr *= 0.5;
      stale_rounds = 0;
    }
    lr *= cfg.lr_decay;
  }
  result.mapping.W = cfg.select_best ? best_W : W;
  return result;
}

/// Text form: first line d, then d rows of d decimals.
inline void save_mapping_text(const Matrix& W, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write mapping: " + path);
  out << W.rows() << '\n';
  char buf[32];
  for (Index i = 0; i < W.rows(); ++i) {
    for (Index j = 0; j < W.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", W(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

inline Matrix load_mapping_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open mapping: " + path);
  long long d = 0;
  if (!(in >> d) || d <= 0) throw DataError("bad mapping header in " + path);
  Matrix W(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      std::string tok;
      if (!(in >> tok) || !detail::parse_double(tok, W(i, j))) {
        throw DataError("bad mapping entry in " + path);
      }
    }
  }
  return W;
}

inline constexpr char kMappingMagic[8] = {'B', 'L', 'S', 'M', 'A', 'P', '\0', '\1'};
inline constexpr std::uint32_t kMappingVersion = 1;

inline void save_mapping_binary(const Matrix& W, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write mapping: " + path);
  out.write(kMappingMagic, sizeof kMappingMagic);
  const std::uint32_t version = kMappingVersion;
  const std::uint64_t d = static_cast<std::uint64_t>(W.rows());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = W;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

inline Matrix load_mapping_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mapping: " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t d = 0;
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMappingMagic)) {
    throw DataError("not a binary mapping: " + path);
  }
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  if (!in || version != kMappingVersion || d == 0) throw DataError("bad mapping header: " + path);
  RowMatrix rm(static_cast<Index>(d), static_cast<Index>(d));
  in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
  if (!in) throw DataError("truncated mapping: " + path);
  return rm;
}

/// Loads either format, sniffing the binary magic.
inline Matrix load_mapping(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mapping: " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (in && std::equal(magic, magic + 8, kMappingMagic)) return load_mapping_binary(path);
  return load_mapping_text(path);
}

}  // namespace bliss
