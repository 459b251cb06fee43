#pragma once

// Subcommands behind the `bliss` tool. Kept in a header so tests can drive
// them in-process through run_cli().
//
// Exit codes: 0 ok, 2 usage, 3 data, 4 numeric divergence, 1 anything else.

#include "bliss/alignment.hpp"
#include "bliss/core.hpp"
#include "bliss/embeddings.hpp"
#include "bliss/eval.hpp"
#include "bliss/isometry.hpp"
#include "bliss/metric.hpp"
#include "bliss/refinement.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace bliss::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kDivergence = 4 };

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Reads `key = value` lines; blank lines and `#` comments are ignored.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  };
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

inline void write_config_file(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

inline std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    long long v = 0;
    if (!detail::parse_int(tok, v) || v <= 0) throw UsageError("bad positive integer list: " + s);
    out.push_back(static_cast<Index>(v));
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

struct Manifest {
  json j = json::object();

  Manifest(const std::string& command, const std::vector<std::string>& argv) {
    j["command"] = command;
    j["argv"] = argv;
    j["version"] = kVersion;
  }
  void input(const std::string& role, const std::string& path) {
    j["inputs"][role] = {{"path", path}, {"sha256", sha256_file(path)}};
  }
  void output(const std::string& role, const std::string& path) { j["outputs"][role] = path; }
  void config(const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [k, v] : kv) j["config"][k] = v;
  }
};

/// Shared embedding-loading flags.
struct EmbeddingArgs {
  std::string src, tgt;
  Index max_vocab = 200000;
  std::string normalize = "raw";

  void add(CLI::App& app) {
    app.add_option("--src-emb", src, "source embeddings (.vec)")->required();
    app.add_option("--tgt-emb", tgt, "target embeddings (.vec)")->required();
    app.add_option("--max-vocab", max_vocab, "rows to load from each file")->capture_default_str();
    app.add_option("--normalize", normalize, "raw | unit | centered_unit")->capture_default_str();
  }
  std::pair<EmbeddingTable, EmbeddingTable> load(std::ostream& err) const {
    const NormState scheme = norm_state_from_string(normalize);
    auto one = [&](const std::string& path) {
      LoadStats st;
      EmbeddingTable t = load_embeddings(path, max_vocab, std::nullopt, &st);
      if (st.skipped_rows || st.duplicate_rows) {
        err << "warning: " << path << ": skipped " << st.skipped_rows << " malformed and "
            << st.duplicate_rows << " duplicate rows\n";
      }
      return scheme == NormState::raw ? t : normalize_table(t, scheme);
    };
    auto s = one(src);
    auto t = one(tgt);
    if (s.dim() != t.dim()) throw DataError("source and target dimensions differ");
    return {std::move(s), std::move(t)};
  }
  static EmbeddingTable normalize_table(const EmbeddingTable& t, NormState s) {
    return bliss::normalize(t, s);
  }
  void record(Manifest& m) const {
    m.input("src_emb", src);
    m.input("tgt_emb", tgt);
  }
};

/// Loss records carry the losses; per-round criterion records carry only
/// the criterion (and the probed precision, when there is one).
inline json log_record_json(const TrainLogRecord& r) {
  json j = {{"round", r.round}, {"iter", r.iter}};
  if (r.criterion) {
    j["criterion"] = *r.criterion;
    if (r.precision_at_1) j["precision_at_1"] = *r.precision_at_1;
  } else {
    j["loss_dis"] = r.loss_dis;
    j["loss_adv"] = r.loss_adv;
    j["loss_sup"] = r.loss_sup;
    j["loss_orth"] = r.loss_orth;
  }
  j["lr"] = r.lr;
  return j;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  EmbeddingArgs emb;
  std::string dict, eval_dict, out = ".", config, preset;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;  // config key -> value from flags
};

inline int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out,
                     std::ostream& err) {
  // Precedence: preset defaults < config file < flags.
  TrainConfig cfg;
  if (a.preset == "toy") cfg = toy_preset();
  else if (!a.preset.empty()) throw UsageError("unknown preset: " + a.preset);
  if (!a.config.empty()) {
    for (const auto& [k, v] : read_config_file(a.config)) apply_key_value(cfg, k, v);
  }
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value: " + s);
    apply_key_value(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [k, v] : a.flag_values) apply_key_value(cfg, k, v);
  if (cfg.mode != TrainMode::unsupervised && a.dict.empty()) {
    throw UsageError("--mode " + to_string(cfg.mode) + " requires --dict");
  }

  fs::create_directories(a.out);
  const std::string w_txt = (fs::path(a.out) / "W.txt").string();
  const std::string w_bin = (fs::path(a.out) / "W.bin").string();
  const std::string log_path = (fs::path(a.out) / "train_log.jsonl").string();
  const std::string cfg_path = (fs::path(a.out) / "config.txt").string();

  Manifest m("train", argv);
  a.emb.record(m);
  if (!a.dict.empty()) m.input("dict", a.dict);
  if (!a.eval_dict.empty()) m.input("eval_dict", a.eval_dict);
  m.j["seed"] = cfg.seed;
  m.j["max_vocab"] = a.emb.max_vocab;
  m.j["normalize"] = a.emb.normalize;
  m.config(to_key_values(cfg));
  m.j["config_hash"] = config_fingerprint(cfg);
  m.output("mapping_text", w_txt);
  m.output("mapping_binary", w_bin);
  m.output("log", log_path);
  m.output("config", cfg_path);
  write_json((fs::path(a.out) / "manifest.json").string(), m.j);
  write_config_file(cfg_path, to_key_values(cfg));

  auto [src, tgt] = a.emb.load(err);
  std::optional<AlignedLexicon> lex;
  if (!a.dict.empty() && cfg.mode != TrainMode::unsupervised) {
    lex = load_lexicon(a.dict, src, tgt);
    if (lex->empty()) throw DataError("dictionary has no in-vocabulary pairs: " + a.dict);
    if (lex->oov) err << "warning: " << lex->oov << " dictionary pairs out of vocabulary\n";
  }
  RoundProbe probe;
  std::optional<AlignedLexicon> gold;
  if (!a.eval_dict.empty()) {
    gold = load_lexicon(a.eval_dict, src, tgt);
    if (gold->empty()) throw DataError("evaluation dictionary has no in-vocabulary pairs");
    probe = [&](const Matrix& W) {
      RetrievalOptions opt;
      opt.topn = 1;
      opt.k = cfg.csls_k;
      auto q = lexicon_sources(*gold);
      return precision_at_k(nn_retrieve(src, W, tgt, opt, q), *gold, 1);
    };
  }

  TrainResult res = train(src, tgt, lex ? &*lex : nullptr, cfg, probe);
  save_mapping_text(res.mapping.W, w_txt);
  save_mapping_binary(res.mapping.W, w_bin);
  {
    std::ofstream lo(log_path);
    for (const auto& r : res.log) lo << log_record_json(r).dump() << '\n';
  }
  if (res.diverged) {
    err << "error: training diverged; last finite checkpoint written to " << w_txt << '\n';
    return kDivergence;
  }
  out << "best_round " << res.best_round << '\n';
  std::ostringstream crit;
  crit.precision(17);
  crit << res.best_criterion;
  out << "criterion " << crit.str() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct RefineArgs {
  EmbeddingArgs emb;
  std::string mapping, out = ".", config;
  std::map<std::string, std::string> flag_values;
};

inline std::vector<std::pair<std::string, std::string>> refine_key_values(const RefineConfig& c) {
  return {{"rounds", std::to_string(c.rounds)},
          {"hubness_threshold", std::to_string(c.hubness_threshold)},
          {"filter_hubness", c.filter_hubness ? "true" : "false"},
          {"expansion_vocab", std::to_string(c.expansion_vocab)},
          {"csls_k", std::to_string(c.csls_k)},
          {"criterion_vocab", std::to_string(c.criterion.vocab)},
          {"stop_on_no_improvement", c.stop_on_no_improvement ? "true" : "false"}};
}

inline void apply_refine_key(RefineConfig& c, const std::string& key, const std::string& value) {
  long long v = 0;
  auto to_i = [&]() {
    if (!detail::parse_int(value, v)) throw UsageError("bad integer for " + key + ": " + value);
    return static_cast<Index>(v);
  };
  auto to_b = [&]() {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError("bad boolean for " + key + ": " + value);
  };
  if (key == "rounds") c.rounds = static_cast<int>(to_i());
  else if (key == "hubness_threshold") c.hubness_threshold = to_i();
  else if (key == "filter_hubness") c.filter_hubness = to_b();
  else if (key == "expansion_vocab") c.expansion_vocab = to_i();
  else if (key == "csls_k") c.csls_k = to_i();
  else if (key == "criterion_vocab") c.criterion.vocab = to_i();
  else if (key == "stop_on_no_improvement") c.stop_on_no_improvement = to_b();
  else throw UsageError("unknown refine config key: " + key);
  if (c.rounds <= 0) throw UsageError("rounds must be positive");
  if (c.hubness_threshold <= 0) throw UsageError("hubness_threshold must be positive");
}

inline int cmd_refine(const RefineArgs& a, const std::vector<std::string>& argv, std::ostream& out,
                      std::ostream& err) {
  RefineConfig cfg;
  if (!a.config.empty()) {
    for (const auto& [k, v] : read_config_file(a.config)) apply_refine_key(cfg, k, v);
  }
  for (const auto& [k, v] : a.flag_values) apply_refine_key(cfg, k, v);

  fs::create_directories(a.out);
  const std::string w_txt = (fs::path(a.out) / "W_refined.txt").string();
  const std::string w_bin = (fs::path(a.out) / "W_refined.bin").string();
  const std::string rounds_path = (fs::path(a.out) / "refine_rounds.json").string();
  const std::string cfg_path = (fs::path(a.out) / "refine_config.txt").string();

  Manifest m("refine", argv);
  a.emb.record(m);
  m.input("mapping", a.mapping);
  m.j["max_vocab"] = a.emb.max_vocab;
  m.j["normalize"] = a.emb.normalize;
  m.config(refine_key_values(cfg));
  m.output("mapping_text", w_txt);
  m.output("mapping_binary", w_bin);
  m.output("rounds", rounds_path);
  m.output("config", cfg_path);
  write_json((fs::path(a.out) / "refine_manifest.json").string(), m.j);
  write_config_file(cfg_path, refine_key_values(cfg));

  Matrix W0 = load_mapping(a.mapping);
  auto [src, tgt] = a.emb.load(err);
  if (W0.rows() != src.dim()) throw DataError("mapping dimension does not match embeddings");
  RefineResult res = iterative_refine(W0, src, tgt, cfg);
  save_mapping_text(res.W, w_txt);
  save_mapping_binary(res.W, w_bin);

  json rounds = json::array();
  out << "round\tdictionary\tfiltered\tcriterion\n";
  for (const auto& r : res.rounds) {
    rounds.push_back({{"round", r.round},
                      {"dictionary_size", r.dictionary_size},
                      {"filtered_out", r.filtered_out},
                      {"criterion", r.criterion},
                      {"degenerate", r.degenerate}});
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", r.criterion);
    out << r.round << '\t' << r.dictionary_size << '\t' << r.filtered_out << '\t' << buf << '\n';
  }
  write_json(rounds_path, {{"best_round", res.best_round},
                           {"best_criterion", res.best_criterion},
                           {"stop_reason", res.stop_reason},
                           {"rounds", rounds}});
  out << "best_round " << res.best_round << " (" << res.stop_reason << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  EmbeddingArgs emb;
  std::string mapping, gold, report, ks = "1,5,10";
  Index csls_k = 10;
  Index criterion_vocab = 10000;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.gold.empty()) throw UsageError("evaluate requires --gold");
  const auto ks = parse_index_list(a.ks);
  Matrix W = load_mapping(a.mapping);
  auto [src, tgt] = a.emb.load(err);
  if (W.rows() != src.dim()) throw DataError("mapping dimension does not match embeddings");
  AlignedLexicon gold = load_lexicon(a.gold, src, tgt);
  if (gold.empty()) throw DataError("gold dictionary has no in-vocabulary pairs: " + a.gold);

  CriterionOptions crit;
  crit.vocab = a.criterion_vocab;
  crit.k = a.csls_k;
  json report = {{"mapping", a.mapping}, {"gold", a.gold}};
  json methods = json::object();
  double criterion = 0.0;
  std::size_t nq = 0;
  for (auto method : {RetrievalMethod::csls, RetrievalMethod::nn_cosine}) {
    RetrievalOptions opt;
    opt.method = method;
    opt.k = a.csls_k;
    EvalReport rep = evaluate_mapping(W, src, tgt, gold, opt, ks, crit);
    json p = json::object();
    for (const auto& [k, v] : rep.precision_at) p["p@" + std::to_string(k)] = v;
    methods[method == RetrievalMethod::csls ? "csls" : "nn_cosine"] = p;
    criterion = rep.criterion_value;
    nq = rep.n_queries;
  }
  report["n_queries"] = nq;
  report["oov_queries"] = gold.oov;
  report["criterion"] = criterion;
  report["precision"] = methods;
  if (!a.report.empty()) write_json(a.report, report);
  out << report.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct GhArgs {
  EmbeddingArgs emb;
  std::string mapping, report, csv, n_values = "100,500,1000,5000,10000";
  Index knn_k = 10;
  Index eigen_max_n = 5000;
  bool no_eigen = false;
};

inline int cmd_gh(const GhArgs& a, std::ostream& out, std::ostream& err) {
  const auto ns = parse_index_list(a.n_values);
  auto [src, tgt] = a.emb.load(err);
  json sweep = json::array();
  std::string csv = "n,gh,eigenvector_similarity\n";
  for (Index n : ns) {
    if (n > src.size() || n > tgt.size()) {
      err << "warning: n=" << n << " exceeds a vocabulary; skipped\n";
      continue;
    }
    json e = {{"n", n}, {"gh", gh_lower_bound(src, tgt, n)}};
    std::string eig;
    if (!a.no_eigen && n > a.knn_k && n <= a.eigen_max_n) {
      const double ev = eigenvector_similarity(src, tgt, n, a.knn_k);
      e["eigenvector_similarity"] = ev;
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", ev);
      eig = buf;
    } else {
      e["eigenvector_similarity"] = nullptr;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", e["gh"].get<double>());
    csv += std::to_string(n) + "," + buf + "," + eig + "\n";
    sweep.push_back(e);
  }
  if (sweep.empty()) throw DataError("no n value fits both vocabularies");
  json report = {{"src_emb", a.emb.src}, {"tgt_emb", a.emb.tgt}, {"knn_k", a.knn_k},
                 {"sweep", sweep}};
  if (!a.mapping.empty()) report["orthogonality_residual"] = orthogonality_residual(load_mapping(a.mapping));
  if (!a.report.empty()) write_json(a.report, report);
  if (!a.csv.empty()) {
    std::ofstream c(a.csv);
    if (!c) throw DataError("cannot write " + a.csv);
    c << csv;
  }
  out << report.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct ToygenArgs {
  std::string out = ".";
  std::uint64_t seed = 0;
  Index anchors = 3;
  bool paired = false;
};

inline int cmd_toygen(const ToygenArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.anchors < 0) throw UsageError("--anchors must be non-negative");
  ToySpec spec;
  spec.seed = a.seed;
  spec.anchors_per_class = a.anchors;
  spec.paired = a.paired;
  ToyData data = generate_toy(spec);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  save_embeddings(data.src, (dir / "src.vec").string());
  save_embeddings(data.tgt, (dir / "tgt.vec").string());
  save_lexicon((dir / "anchors.txt").string(), data.src, data.tgt, data.anchors.pairs);
  if (spec.paired) save_lexicon((dir / "gold.txt").string(), data.src, data.tgt, data.gold.pairs);

  static const char* shapes[] = {"disc", "rectangle", "triangle"};
  json classes = json::array();
  for (const auto& c : spec.classes) {
    classes.push_back({{"shape", shapes[static_cast<int>(c.shape)]},
                       {"center", c.center},
                       {"size", c.size},
                       {"points", c.points}});
  }
  json t = json::array();
  for (Index i = 0; i < spec.transform.rows(); ++i) {
    t.push_back({spec.transform(i, 0), spec.transform(i, 1)});
  }
  Manifest m("toygen", argv);
  m.j["seed"] = a.seed;
  m.j["spec"] = {{"classes", classes},
                 {"transform", t},
                 {"anchors_per_class", a.anchors},
                 {"paired", a.paired}};
  m.output("src", (dir / "src.vec").string());
  m.output("tgt", (dir / "tgt.vec").string());
  m.output("anchors", (dir / "anchors.txt").string());
  if (spec.paired) m.output("gold", (dir / "gold.txt").string());
  write_json((dir / "toy_manifest.json").string(), m.j);
  out << "wrote " << data.src.size() << " source and " << data.tgt.size() << " target points, "
      << data.anchors.size() << " anchors to " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

/// Parses argv and dispatches to a subcommand.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Bilingual lexicon induction toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // train
  TrainArgs ta;
  std::map<std::string, std::string> train_flags;
  auto* train_cmd = app.add_subcommand("train", "learn a mapping W");
  ta.emb.add(*train_cmd);
  train_cmd->add_option("--dict", ta.dict, "seed dictionary (required for sup/semi)");
  train_cmd->add_option("--eval-dict", ta.eval_dict, "gold dictionary probed each round");
  train_cmd->add_option("--out", ta.out, "output directory")->capture_default_str();
  train_cmd->add_option("--config", ta.config, "key=value config file");
  train_cmd->add_option("--preset", ta.preset, "built-in defaults: toy");
  train_cmd->add_option("--set", ta.sets, "extra key=value override (repeatable)");
  const std::vector<std::pair<std::string, std::string>> train_keys = {
      {"--mode", "mode"},           {"--f-s", "f_s"},
      {"--seed", "seed"},           {"--lambda-adv", "lambda_adv"},
      {"--lambda-sup", "lambda_sup"}, {"--lambda-orth", "lambda_orth"},
      {"--batch-size", "batch_size"}, {"--vocab-cap", "vocab_cap"},
      {"--dis-steps", "dis_steps"}, {"--rounds", "rounds"},
      {"--iters-per-round", "iters_per_round"}, {"--lr", "lr"},
      {"--csls-k", "csls_k"},       {"--init", "init"},
      {"--sup-optimizer", "sup_optimizer"}, {"--beta", "beta"},
      {"--dis-hidden", "dis_hidden"}, {"--criterion-vocab", "criterion_vocab"}};
  for (const auto& [flag, key] : train_keys) {
    train_cmd->add_option_function<std::string>(
        flag, [&train_flags, key = key](const std::string& v) { train_flags[key] = v; },
        "sets config key " + key);
  }

  // refine
  RefineArgs ra;
  std::map<std::string, std::string> refine_flags;
  auto* refine_cmd = app.add_subcommand("refine", "iterative Procrustes refinement");
  ra.emb.add(*refine_cmd);
  refine_cmd->add_option("--mapping", ra.mapping, "initial W (text or binary)")->required();
  refine_cmd->add_option("--out", ra.out, "output directory")->capture_default_str();
  refine_cmd->add_option("--config", ra.config, "key=value config file");
  for (const auto& [flag, key] : std::vector<std::pair<std::string, std::string>>{
           {"--rounds", "rounds"},
           {"--hubness-threshold", "hubness_threshold"},
           {"--expansion-vocab", "expansion_vocab"},
           {"--csls-k", "csls_k"},
           {"--criterion-vocab", "criterion_vocab"}}) {
    refine_cmd->add_option_function<std::string>(
        flag, [&refine_flags, key = key](const std::string& v) { refine_flags[key] = v; },
        "sets config key " + key);
  }
  refine_cmd->add_flag_callback("--no-hubness-filter",
                                [&refine_flags] { refine_flags["filter_hubness"] = "false"; },
                                "keep hub targets in the expanded dictionary");
  refine_cmd->add_flag_callback("--all-rounds",
                                [&refine_flags] { refine_flags["stop_on_no_improvement"] = "false"; },
                                "run every round even without improvement");

  // evaluate
  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "precision@k against a gold dictionary");
  ea.emb.add(*eval_cmd);
  eval_cmd->add_option("--mapping", ea.mapping, "W (text or binary)")->required();
  eval_cmd->add_option("--gold", ea.gold, "gold dictionary");
  eval_cmd->add_option("--report", ea.report, "write the JSON report here");
  eval_cmd->add_option("--ks", ea.ks, "comma-separated cut-offs")->capture_default_str();
  eval_cmd->add_option("--csls-k", ea.csls_k)->capture_default_str();
  eval_cmd->add_option("--criterion-vocab", ea.criterion_vocab)->capture_default_str();

  // gh
  GhArgs ga;
  auto* gh_cmd = app.add_subcommand("gh", "isometry report: GH lower bound and eigenvector similarity");
  ga.emb.add(*gh_cmd);
  gh_cmd->add_option("--n", ga.n_values, "comma-separated vocabulary sizes")->capture_default_str();
  gh_cmd->add_option("--knn-k", ga.knn_k)->capture_default_str();
  gh_cmd->add_option("--eigen-max-n", ga.eigen_max_n, "skip the dense eigen-solve above this n")
      ->capture_default_str();
  gh_cmd->add_flag("--no-eigen", ga.no_eigen, "GH only");
  gh_cmd->add_option("--mapping", ga.mapping, "adds the orthogonality residual of W");
  gh_cmd->add_option("--report", ga.report, "write the JSON report here");
  gh_cmd->add_option("--csv", ga.csv, "write n,gh,eigenvector_similarity rows here");

  // toygen
  ToygenArgs tg;
  auto* toy_cmd = app.add_subcommand("toygen", "write the 2-d toy dataset");
  toy_cmd->add_option("--out", tg.out, "output directory")->capture_default_str();
  toy_cmd->add_option("--seed", tg.seed)->capture_default_str();
  toy_cmd->add_option("--anchors", tg.anchors, "anchor pairs per class")->capture_default_str();
  toy_cmd->add_flag("--paired", tg.paired, "target is the transformed source draw (adds gold.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      ta.flag_values = train_flags;
      return cmd_train(ta, args, out, err);
    }
    if (*refine_cmd) {
      ra.flag_values = refine_flags;
      return cmd_refine(ra, args, out, err);
    }
    if (*eval_cmd) return cmd_evaluate(ea, out, err);
    if (*gh_cmd) return cmd_gh(ga, out, err);
    if (*toy_cmd) return cmd_toygen(tg, args, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace bliss::cli
