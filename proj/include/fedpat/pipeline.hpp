#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpat/encode.hpp"
#include "fedpat/fcm.hpp"
#include "fedpat/federation.hpp"
#include "fedpat/log_parse.hpp"
#include "fedpat/metrics.hpp"
#include "fedpat/presentation.hpp"
#include "fedpat/ranking.hpp"
#include "fedpat/transactions.hpp"
#include "fedpat/version.hpp"

namespace fedpat {

struct LogSpec {
  std::string path;
  std::string log_type;
  std::string schema_path;
  std::string prefix;  // unique letter(s): A, B, C, ...
  bool phase2_included = true;
};

struct PipelineConfig {
  std::vector<LogSpec> logs;
  // clustering
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  int max_iter = 300;
  int restarts = 1;
  unsigned threads = 1;
  int default_year = 2005;
  // federation (in-process: each log's rows are dealt round-robin to P
  // simulated parties)
  bool federation_enabled = false;
  std::size_t num_clients = 1;
  int rounds = 3;
  int key_bits = 2048;
  std::string server_address;  // used by fed-client; empty means in-process
  // phase 2
  TxnFeatures txn_features = TxnFeatures::DatetimePid;
  std::size_t min_pts = 2;
  // phase 3
  std::string feature_map_path;  // empty: derive from schema annotations
  std::vector<std::string> report_formats = {"csv", "markdown", "html"};
  // output
  std::string out_dir = "out";
};

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read config file: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw InputError("config is not a JSON object: " + path);
  }
  PipelineConfig cfg;
  try {
    for (const auto& lj : j.value("logs", nlohmann::json::array())) {
      LogSpec spec;
      spec.path = lj.at("path").get<std::string>();
      spec.log_type = lj.at("log_type").get<std::string>();
      spec.schema_path = lj.at("schema").get<std::string>();
      spec.prefix = lj.at("prefix").get<std::string>();
      spec.phase2_included = lj.value("phase2", true);
      cfg.logs.push_back(std::move(spec));
    }
    if (j.contains("clustering")) {
      const auto& c = j["clustering"];
      cfg.seed = c.value("seed", cfg.seed);
      cfg.tolerance = c.value("tolerance", cfg.tolerance);
      cfg.max_iter = c.value("max_iter", cfg.max_iter);
      cfg.restarts = c.value("restarts", cfg.restarts);
      cfg.threads = c.value("threads", cfg.threads);
      cfg.default_year = c.value("default_year", cfg.default_year);
    }
    if (j.contains("federation")) {
      const auto& f = j["federation"];
      cfg.federation_enabled = f.value("enabled", false);
      cfg.num_clients = f.value("clients", cfg.num_clients);
      cfg.rounds = f.value("rounds", cfg.rounds);
      cfg.key_bits = f.value("key_bits", cfg.key_bits);
      cfg.server_address = f.value("server", cfg.server_address);
    }
    if (j.contains("phase2")) {
      const auto& p = j["phase2"];
      cfg.txn_features =
          txn_features_from_string(p.value("features", std::string(
                                                           "datetime,pid")));
      cfg.min_pts = p.value("min_pts", cfg.min_pts);
    }
    if (j.contains("phase3")) {
      const auto& p = j["phase3"];
      cfg.feature_map_path = p.value("feature_map", cfg.feature_map_path);
      if (p.contains("report_formats")) {
        cfg.report_formats =
            p["report_formats"].get<std::vector<std::string>>();
      }
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad config field: ") + e.what());
  }
  // Relative input paths are taken relative to the config file, so a config
  // can sit next to its corpus and work from any working directory. out_dir
  // stays relative to the invocation.
  const auto config_dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (config_dir / p).string();
    }
  };
  for (auto& spec : cfg.logs) {
    resolve(spec.path);
    resolve(spec.schema_path);
  }
  resolve(cfg.feature_map_path);
  // Environment override; an explicit --out flag beats both.
  if (const char* env = std::getenv("FEDPAT_OUT"); env && *env) {
    cfg.out_dir = env;
  }
  std::set<std::string> prefixes;
  std::set<std::string> basenames;
  for (const auto& spec : cfg.logs) {
    if (spec.prefix.empty() || !prefixes.insert(spec.prefix).second) {
      throw InputError("config: log prefixes must be unique and non-empty");
    }
    // Records are keyed by (file basename, line index) downstream, so two
    // logs may not share a filename even when their directories differ.
    const std::string base =
        std::filesystem::path(spec.path).filename().string();
    if (base.empty() || !basenames.insert(base).second) {
      throw InputError("config: log filenames must be unique and non-empty");
    }
  }
  if (cfg.federation_enabled && cfg.num_clients < 1) {
    throw InputError("config: federation needs at least one client");
  }
  return cfg;
}

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  nlohmann::json logs = nlohmann::json::array();
  for (const auto& spec : cfg.logs) {
    logs.push_back({{"path", spec.path},
                    {"log_type", spec.log_type},
                    {"schema", spec.schema_path},
                    {"prefix", spec.prefix},
                    {"phase2", spec.phase2_included}});
  }
  return nlohmann::json{
      {"logs", std::move(logs)},
      {"clustering",
       {{"seed", cfg.seed},
        {"tolerance", cfg.tolerance},
        {"max_iter", cfg.max_iter},
        {"restarts", cfg.restarts},
        {"threads", cfg.threads},
        {"default_year", cfg.default_year}}},
      {"federation",
       {{"enabled", cfg.federation_enabled},
        {"clients", cfg.num_clients},
        {"rounds", cfg.rounds},
        {"key_bits", cfg.key_bits},
        {"server", cfg.server_address}}},
      {"phase2",
       {{"features", to_string(cfg.txn_features)},
        {"min_pts", cfg.min_pts}}},
      {"phase3",
       {{"feature_map", cfg.feature_map_path},
        {"report_formats", cfg.report_formats}}},
      {"out_dir", cfg.out_dir}};
}

struct StageRecord {
  std::string name;
  std::vector<std::string> artifacts;
  double seconds = 0.0;
};

struct RunManifest {
  std::string tool_version;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<StageRecord> stages;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"name", s.name},
                      {"artifacts", s.artifacts},
                      {"seconds", s.seconds}});
  }
  return nlohmann::json{{"tool_version", m.tool_version},
                        {"config_digest", m.config_digest},
                        {"seed", m.seed},
                        {"stages", std::move(stages)}};
}

// --- model / labels files ----------------------------------------------------

inline void save_model(const std::string& path, const FuzzyModel& model,
                       const std::string& columns_digest_hex) {
  nlohmann::json centers = nlohmann::json::array();
  for (std::size_t i = 0; i < model.centers.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < model.centers.cols(); ++j) {
      row.push_back(model.centers(i, j));
    }
    centers.push_back(std::move(row));
  }
  const nlohmann::json j{{"k", model.k},
                         {"m", model.fuzzifier_m},
                         {"seed", model.seed},
                         {"tolerance", model.tolerance},
                         {"max_iter", model.max_iter},
                         {"columns_digest", columns_digest_hex},
                         {"centers", std::move(centers)}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write model file: " + path);
  os << j.dump(2) << "\n";
}

inline FuzzyModel load_model(const std::string& path,
                             std::string* columns_digest_hex = nullptr) {
  nlohmann::json j = detail::load_json_file(path);
  FuzzyModel model;
  try {
    model.k = j.at("k").get<std::size_t>();
    model.fuzzifier_m = j.at("m").get<double>();
    model.seed = j.value("seed", std::uint64_t{0});
    model.tolerance = j.value("tolerance", 1e-6);
    model.max_iter = j.value("max_iter", 300);
    const auto& centers = j.at("centers");
    const std::size_t rows = centers.size();
    const std::size_t cols = rows ? centers[0].size() : 0;
    model.centers = Matrix(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t jj = 0; jj < cols; ++jj) {
        model.centers(i, jj) = centers[i][jj].get<double>();
      }
    }
    if (columns_digest_hex) {
      *columns_digest_hex = j.value("columns_digest", std::string());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad model file: ") + e.what());
  }
  return model;
}

inline void write_labels_csv(std::ostream& os,
                             const std::vector<RawLogRecord>& records,
                             const std::vector<int>& labels) {
  csv::write_row(os, {"source_file", "original_index", "label"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    csv::write_row(os, {records[i].source_file,
                        std::to_string(records[i].original_index),
                        std::to_string(labels[i])});
  }
}

// Returns labels aligned with `records` (matched by file + index).
inline std::vector<int> read_labels_csv(const std::string& path,
                                        const std::vector<RawLogRecord>& records) {
  const auto rows = csv::read_file(path);
  const std::vector<std::string> expected = {"source_file", "original_index",
                                             "label"};
  if (rows.empty() || rows[0] != expected) {
    throw InputError("labels file has an unexpected header: " + path);
  }
  std::map<std::pair<std::string, int>, int> by_key;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) {
      throw InputError("labels row " + std::to_string(i) + " has wrong arity");
    }
    by_key[{rows[i][0], std::stoi(rows[i][1])}] = std::stoi(rows[i][2]);
  }
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    auto it = by_key.find({r.source_file, r.original_index});
    if (it == by_key.end()) {
      throw InputError("labels file misses record " + r.source_file + "#" +
                       std::to_string(r.original_index));
    }
    labels.push_back(it->second);
  }
  return labels;
}

// Plain label column in row order (for eval against ground truth files).
inline std::vector<int> read_label_column(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw InputError("label file is empty: " + path);
  // Accept either the 3-column labels file or a single-column file with an
  // optional "label" header.
  std::vector<int> labels;
  std::size_t start = 0;
  std::size_t col = 0;
  if (rows[0].size() == 3 && rows[0][2] == "label") {
    start = 1;
    col = 2;
  } else if (rows[0].size() == 1 && rows[0][0] == "label") {
    start = 1;
  } else if (rows[0].size() != 1) {
    throw InputError("unrecognized label file shape: " + path);
  }
  for (std::size_t i = start; i < rows.size(); ++i) {
    if (rows[i].size() <= col) {
      throw InputError("label row " + std::to_string(i) + " has wrong arity");
    }
    labels.push_back(std::stoi(rows[i][col]));
  }
  return labels;
}

// --- per-log stage helpers -----------------------------------------------------

struct IngestedLog {
  LogSpec spec;
  Schema schema;
  ParseResult parsed;
};

inline IngestedLog ingest_log(const LogSpec& spec, const ParseOptions& opts,
                              const PatternRegistry& registry) {
  IngestedLog out;
  out.spec = spec;
  out.schema = load_schema(spec.schema_path);
  out.parsed = parse_log(spec.path, spec.log_type, out.schema, registry, opts);
  if (out.parsed.records.empty()) {
    throw InputError("no records parsed from " + spec.path);
  }
  return out;
}

struct TuneResult {
  std::size_t n = 0, d = 0;
  double fuzzifier_m = 0.0;
  KSelection selection;
};

// Deals rows round-robin into P shards (the in-process federation split).
inline std::vector<Matrix> shard_rows(const Matrix& data, std::size_t p) {
  std::vector<std::vector<std::vector<double>>> parts(p);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto row = data.row(i);
    parts[i % p].push_back(std::vector<double>(row.begin(), row.end()));
  }
  std::vector<Matrix> shards;
  for (auto& part : parts) {
    if (part.empty()) {
      throw InputError("too few rows to give every federation client data");
    }
    shards.push_back(Matrix::from_rows(part));
  }
  return shards;
}

inline TuneResult tune_features(const FeatureMatrix& fm,
                                const PipelineConfig& cfg,
                                std::uint64_t log_seed,
                                const PaillierKeypair* keypair = nullptr) {
  TuneResult t;
  t.n = fm.data.rows();
  t.d = fm.data.cols();
  t.fuzzifier_m = compute_fuzzifier(t.n, t.d);
  if (cfg.federation_enabled) {
    FederationConfig fed;
    fed.num_clients = cfg.num_clients;
    fed.rounds = cfg.rounds;
    fed.key_bits = cfg.key_bits;
    fed.fuzzifier_m = t.fuzzifier_m;
    fed.seed = log_seed;
    fed.tolerance = cfg.tolerance;
    fed.max_iter = cfg.max_iter;
    t.selection =
        federated_select_k(fed, shard_rows(fm.data, cfg.num_clients), keypair);
  } else {
    t.selection =
        select_cluster_count(fm.data, t.fuzzifier_m, log_seed, cfg.threads);
  }
  return t;
}

struct ClusterResult {
  FuzzyModel model;
  std::vector<int> labels;
};

inline ClusterResult cluster_features(const FeatureMatrix& fm,
                                      std::size_t k, double m,
                                      const PipelineConfig& cfg,
                                      std::uint64_t log_seed,
                                      const PaillierKeypair* keypair = nullptr) {
  ClusterResult out;
  if (cfg.federation_enabled) {
    FederationConfig fed;
    fed.num_clients = cfg.num_clients;
    fed.rounds = cfg.rounds;
    fed.key_bits = cfg.key_bits;
    fed.k = k;
    fed.fuzzifier_m = m;
    fed.seed = log_seed;
    fed.tolerance = cfg.tolerance;
    fed.max_iter = cfg.max_iter;
    out.model = run_federation(fed, shard_rows(fm.data, cfg.num_clients),
                               keypair);
    out.labels = hard_labels(membership_for(fm.data, out.model.centers, m));
  } else {
    FcmResult fit =
        fcm_fit(fm.data, k, m, log_seed, cfg.tolerance, cfg.max_iter);
    out.model = fit.model;
    out.labels = hard_labels(fit.membership);
  }
  return out;
}

// --- the full pipeline ------------------------------------------------------------

namespace detail {

class StageTimer {
 public:
  explicit StageTimer(RunManifest& manifest, std::string name)
      : manifest_(manifest), start_(std::chrono::steady_clock::now()) {
    record_.name = std::move(name);
  }
  void add_artifact(const std::string& path) {
    record_.artifacts.push_back(path);
  }
  void finish() {
    record_.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    manifest_.stages.push_back(record_);
  }

 private:
  RunManifest& manifest_;
  StageRecord record_;
  std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
auto run_stage(RunManifest& manifest, const std::string& name, Fn&& fn) {
  StageTimer timer(manifest, name);
  try {
    if constexpr (std::is_void_v<decltype(fn(timer))>) {
      fn(timer);
      timer.finish();
    } else {
      auto result = fn(timer);
      timer.finish();
      return result;
    }
  } catch (const InputError& e) {
    throw InputError("stage " + name + ": " + e.what());
  } catch (const ProtocolError& e) {
    throw ProtocolError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error("stage " + name + ": " + e.what());
  }
}

inline std::string path_join(const std::string& dir, const std::string& leaf) {
  return (std::filesystem::path(dir) / leaf).string();
}

}  // namespace detail

// Runs ingest → tune → cluster → chronological merge → transactions →
// patterns → ranking → reports, persisting every stage under out_dir and
// returning the manifest (also written as manifest.json).
inline RunManifest run_pipeline(const PipelineConfig& cfg,
                                std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  if (cfg.logs.empty()) throw InputError("config lists no log files");

  RunManifest manifest;
  manifest.tool_version = kVersion;
  manifest.seed = cfg.seed;
  manifest.config_digest =
      hex64(fnv1a64(pipeline_config_to_json(cfg).dump()));

  const std::string ingest_dir = detail::path_join(cfg.out_dir, "ingest");
  const std::string tune_dir = detail::path_join(cfg.out_dir, "tune");
  const std::string cluster_dir = detail::path_join(cfg.out_dir, "cluster");
  const std::string phase2_dir = detail::path_join(cfg.out_dir, "phase2");
  const std::string phase3_dir = detail::path_join(cfg.out_dir, "phase3");
  for (const auto& d :
       {ingest_dir, tune_dir, cluster_dir, phase2_dir, phase3_dir}) {
    fs::create_directories(d);
  }

  auto say = [&](const std::string& s) {
    if (log) *log << s << "\n";
  };

  // Shared key for all federated stages of this run.
  PaillierKeypair keypair;
  const PaillierKeypair* keypair_ptr = nullptr;
  if (cfg.federation_enabled) {
    keypair = keygen(cfg.key_bits, derive_seed(cfg.seed, 0x6665646b6579ull),
                     log);
    keypair_ptr = &keypair;
  }

  ParseOptions popts;
  popts.default_year = cfg.default_year;
  const PatternRegistry registry = PatternRegistry::with_builtins();

  // --- ingest
  auto ingested = detail::run_stage(
      manifest, "ingest", [&](detail::StageTimer& timer) {
        std::vector<IngestedLog> logs;
        for (const auto& spec : cfg.logs) {
          IngestedLog il = ingest_log(spec, popts, registry);
          const std::string rec_path =
              detail::path_join(ingest_dir, spec.prefix + "_records.csv");
          const std::string rej_path =
              detail::path_join(ingest_dir, spec.prefix + "_rejects.csv");
          {
            std::ofstream os(rec_path, std::ios::binary);
            write_records_csv(os, il.parsed.records, il.schema);
          }
          {
            std::ofstream os(rej_path, std::ios::binary);
            write_rejects_csv(os, il.parsed.rejects, il.schema);
          }
          timer.add_artifact(rec_path);
          timer.add_artifact(rej_path);
          say("ingest " + spec.prefix + ": " +
              std::to_string(il.parsed.records.size()) + " records, " +
              std::to_string(il.parsed.rejects.size()) + " rejected");
          logs.push_back(std::move(il));
        }
        return logs;
      });

  // --- encode + tune
  std::vector<FeatureMatrix> features(ingested.size());
  auto tunes = detail::run_stage(
      manifest, "tune", [&](detail::StageTimer& timer) {
        std::vector<TuneResult> tunes;
        for (std::size_t i = 0; i < ingested.size(); ++i) {
          features[i] = encode(ingested[i].parsed.records, ingested[i].schema);
          const std::uint64_t log_seed =
              derive_seed(cfg.seed, fnv1a64(ingested[i].spec.prefix));
          TuneResult t = tune_features(features[i], cfg, log_seed, keypair_ptr);
          const nlohmann::json j{{"prefix", ingested[i].spec.prefix},
                                 {"n", t.n},
                                 {"d", t.d},
                                 {"m", t.fuzzifier_m},
                                 {"k_star", t.selection.k_star},
                                 {"mcd_curve", t.selection.mcd_curve}};
          const std::string path = detail::path_join(
              tune_dir, ingested[i].spec.prefix + "_tuning.json");
          std::ofstream os(path, std::ios::binary);
          os << j.dump(2) << "\n";
          timer.add_artifact(path);
          say("tune " + ingested[i].spec.prefix + ": m=" +
              std::to_string(t.fuzzifier_m) +
              " k=" + std::to_string(t.selection.k_star));
          tunes.push_back(std::move(t));
        }
        return tunes;
      });

  // --- cluster
  auto clusters = detail::run_stage(
      manifest, "cluster", [&](detail::StageTimer& timer) {
        std::vector<ClusterResult> results;
        for (std::size_t i = 0; i < ingested.size(); ++i) {
          const std::uint64_t log_seed = derive_seed(
              cfg.seed, fnv1a64(ingested[i].spec.prefix) ^ 0x636c7573ull);
          ClusterResult r =
              cluster_features(features[i], tunes[i].selection.k_star,
                               tunes[i].fuzzifier_m, cfg, log_seed,
                               keypair_ptr);
          const std::string model_path = detail::path_join(
              cluster_dir, ingested[i].spec.prefix + "_model.json");
          save_model(model_path, r.model, columns_digest(features[i].columns));
          const std::string labels_path = detail::path_join(
              cluster_dir, ingested[i].spec.prefix + "_labels.csv");
          {
            std::ofstream os(labels_path, std::ios::binary);
            write_labels_csv(os, ingested[i].parsed.records, r.labels);
          }
          timer.add_artifact(model_path);
          timer.add_artifact(labels_path);
          results.push_back(std::move(r));
        }
        return results;
      });

  // --- chronological merge
  const std::string chron_path = detail::path_join(phase2_dir, "chron.csv");
  auto chron = detail::run_stage(
      manifest, "chronological_db", [&](detail::StageTimer& timer) {
        std::vector<LabelledLog> labelled;
        for (std::size_t i = 0; i < ingested.size(); ++i) {
          if (!ingested[i].spec.phase2_included) continue;
          labelled.push_back(LabelledLog{ingested[i].parsed.records,
                                         clusters[i].labels,
                                         ingested[i].spec.prefix});
        }
        if (labelled.empty()) {
          throw InputError("no logs are included in phase 2");
        }
        auto chron = build_chronological_db(labelled);
        std::ofstream os(chron_path, std::ios::binary);
        write_chron_csv(os, chron);
        timer.add_artifact(chron_path);
        say("chronological db: " + std::to_string(chron.size()) + " events");
        return chron;
      });

  // --- transactions
  const std::string txn_path =
      detail::path_join(phase2_dir, "transactions.jsonl");
  auto txns = detail::run_stage(
      manifest, "transactions", [&](detail::StageTimer& timer) {
        auto txns = cluster_transactions(chron, cfg.min_pts, cfg.txn_features);
        std::ofstream os(txn_path, std::ios::binary);
        write_transactions_jsonl(os, txns);
        timer.add_artifact(txn_path);
        say("transactions: " + std::to_string(txns.size()));
        return txns;
      });

  // --- patterns
  const std::string pattern_path =
      detail::path_join(phase2_dir, "patterns.jsonl");
  auto patterns = detail::run_stage(
      manifest, "patterns", [&](detail::StageTimer& timer) {
        auto patterns = extract_patterns(txns);
        std::ofstream os(pattern_path, std::ios::binary);
        write_patterns_jsonl(os, patterns);
        timer.add_artifact(pattern_path);
        say("patterns: " + std::to_string(patterns.size()) + " unique");
        return patterns;
      });

  // --- ranking
  const std::string ranking_path =
      detail::path_join(phase3_dir, "ranking.csv");
  auto ranked = detail::run_stage(
      manifest, "ranking", [&](detail::StageTimer& timer) {
        auto ranked = rank_patterns(patterns, txns.size());
        std::ofstream os(ranking_path, std::ios::binary);
        write_ranking_index(os, ranked);
        timer.add_artifact(ranking_path);
        return ranked;
      });

  // --- reports
  detail::run_stage(manifest, "report", [&](detail::StageTimer& timer) {
    FeatureMap fmap;
    if (!cfg.feature_map_path.empty()) {
      fmap = load_feature_map(cfg.feature_map_path);
    } else {
      std::map<std::string, Schema> schemas;
      for (const auto& il : ingested) schemas[il.spec.log_type] = il.schema;
      fmap = feature_map_from_schemas(schemas);
    }
    RecordIndex index;
    for (const auto& il : ingested) index.add_records(il.parsed.records);
    index.add_chron(chron);
    std::vector<std::vector<PresentationRow>> rendered;
    rendered.reserve(ranked.size());
    for (const auto& r : ranked) {
      rendered.push_back(render_pattern(r, txns, index, fmap));
    }
    for (const auto& fmt_name : cfg.report_formats) {
      const ReportFormat fmt = report_format_from_string(fmt_name);
      const char* ext = fmt == ReportFormat::Csv
                            ? "csv"
                            : (fmt == ReportFormat::Markdown ? "md" : "html");
      const std::string path =
          detail::path_join(phase3_dir, std::string("report.") + ext);
      emit_report(path, ranked, rendered, fmt);
      timer.add_artifact(path);
    }
  });

  // --- manifest
  const std::string manifest_path =
      detail::path_join(cfg.out_dir, "manifest.json");
  {
    std::ofstream os(manifest_path, std::ios::binary);
    if (!os) throw InputError("cannot write manifest: " + manifest_path);
    os << manifest_to_json(manifest).dump(2) << "\n";
  }
  say("manifest: " + manifest_path);
  return manifest;
}

}  // namespace fedpat
