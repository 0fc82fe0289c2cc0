// Command-line front end: phase-by-phase subcommands plus the end-to-end
// pipeline, evaluation, and benchmarking.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedpat/common.hpp"
#include "fedpat/encode.hpp"
#include "fedpat/evaluate.hpp"
#include "fedpat/fcm.hpp"
#include "fedpat/federation.hpp"
#include "fedpat/fednet.hpp"
#include "fedpat/log_parse.hpp"
#include "fedpat/metrics.hpp"
#include "fedpat/pipeline.hpp"
#include "fedpat/presentation.hpp"
#include "fedpat/ranking.hpp"
#include "fedpat/transactions.hpp"
#include "fedpat/version.hpp"

namespace {

struct EncodedLog {
  fedpat::Schema schema;
  std::vector<fedpat::RawLogRecord> records;
  fedpat::FeatureMatrix features;
};

EncodedLog read_and_encode(const std::string& records_path,
                           const std::string& schema_path) {
  EncodedLog out;
  out.schema = fedpat::load_schema(schema_path);
  out.records = fedpat::read_records_csv(records_path, out.schema);
  out.features = fedpat::encode(out.records, out.schema);
  return out;
}

void split_host_port(const std::string& address, std::string& host,
                     int& port) {
  const std::size_t pos = address.rfind(':');
  if (pos == std::string::npos || pos + 1 == address.size()) {
    throw fedpat::InputError("address must look like host:port: " + address);
  }
  host = address.substr(0, pos);
  try {
    port = std::stoi(address.substr(pos + 1));
  } catch (const std::exception&) {
    throw fedpat::InputError("bad port in address: " + address);
  }
  if (port < 1 || port > 65535) {
    throw fedpat::InputError("port out of range in address: " + address);
  }
}

std::vector<std::string> split_tuple(const std::string& value,
                                     std::size_t arity,
                                     const std::string& what) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : value) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() != arity) {
    throw fedpat::InputError(what + " needs " + std::to_string(arity) +
                             " comma-separated fields, got '" + value + "'");
  }
  return parts;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_label_file(const std::string& path,
                      const std::vector<fedpat::RawLogRecord>& records,
                      const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw fedpat::InputError("cannot write labels file: " + path);
  fedpat::write_labels_csv(os, records, labels);
}

void write_tuning_json(const std::string& path, std::size_t n, std::size_t d,
                       double m, const fedpat::KSelection& sel) {
  const nlohmann::json j{{"n", n},
                         {"d", d},
                         {"m", m},
                         {"k_star", sel.k_star},
                         {"mcd_curve", sel.mcd_curve}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw fedpat::InputError("cannot write tuning file: " + path);
  os << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedpat: privacy-preserving log pattern extraction"};
  app.set_version_flag("--version", fedpat::kVersion);
  app.require_subcommand(1);

  // ---------------------------------------------------------------- ingest
  struct {
    std::string log, type, schema, records_out, rejects_out;
    int default_year = 2005;
  } ing;
  {
    auto* sub = app.add_subcommand("ingest", "parse a raw log into records");
    sub->add_option("--log", ing.log, "raw log file")->required();
    sub->add_option("--type", ing.type, "log type (e.g. http_access)")
        ->required();
    sub->add_option("--schema", ing.schema, "schema file")->required();
    sub->add_option("--records-out", ing.records_out, "records CSV to write")
        ->required();
    sub->add_option("--rejects-out", ing.rejects_out,
                    "rejected-lines CSV to write");
    sub->add_option("--default-year", ing.default_year,
                    "year for syslog timestamps");
    sub->callback([&] {
      const auto registry = fedpat::PatternRegistry::with_builtins();
      const auto schema = fedpat::load_schema(ing.schema);
      fedpat::ParseOptions opts;
      opts.default_year = ing.default_year;
      const auto result =
          fedpat::parse_log(ing.log, ing.type, schema, registry, opts);
      {
        std::ofstream os(ing.records_out, std::ios::binary);
        if (!os) {
          throw fedpat::InputError("cannot write " + ing.records_out);
        }
        fedpat::write_records_csv(os, result.records, schema);
      }
      if (!ing.rejects_out.empty()) {
        std::ofstream os(ing.rejects_out, std::ios::binary);
        if (!os) {
          throw fedpat::InputError("cannot write " + ing.rejects_out);
        }
        fedpat::write_rejects_csv(os, result.rejects, schema);
      }
      std::cout << "records: " << result.records.size()
                << "\nrejected: " << result.rejects.size() << "\n";
    });
  }

  // ------------------------------------------------------------------ tune
  struct {
    std::string records, schema, out;
    std::uint64_t seed = 1;
    unsigned threads = 1;
  } tun;
  {
    auto* sub =
        app.add_subcommand("tune", "estimate the fuzzifier and cluster count");
    sub->add_option("--records", tun.records, "records CSV")->required();
    sub->add_option("--schema", tun.schema, "schema file")->required();
    sub->add_option("--seed", tun.seed, "random seed");
    sub->add_option("--threads", tun.threads, "parallel sweep width");
    sub->add_option("--out", tun.out, "tuning JSON to write");
    sub->callback([&] {
      const auto log = read_and_encode(tun.records, tun.schema);
      const std::size_t n = log.features.data.rows();
      const std::size_t d = log.features.data.cols();
      const double m = fedpat::compute_fuzzifier(n, d);
      const auto sel = fedpat::select_cluster_count(log.features.data, m,
                                                    tun.seed, tun.threads);
      std::cout << "n: " << n << "\nd: " << d << "\nm: " << m
                << "\nk_star: " << sel.k_star << "\nmcd_curve:";
      for (std::size_t i = 0; i < sel.mcd_curve.size(); ++i) {
        std::cout << " k=" << (i + 2) << ":" << sel.mcd_curve[i];
      }
      std::cout << "\n";
      if (!tun.out.empty()) write_tuning_json(tun.out, n, d, m, sel);
    });
  }

  // --------------------------------------------------------------- cluster
  struct {
    std::string records, schema, model_out, labels_out;
    std::size_t k = 0;
    double m = 0.0;
    std::uint64_t seed = 1;
    double tolerance = 1e-6;
    int max_iter = 300;
    unsigned threads = 1;
  } clu;
  {
    auto* sub = app.add_subcommand("cluster", "fuzzy-cluster one log");
    sub->add_option("--records", clu.records, "records CSV")->required();
    sub->add_option("--schema", clu.schema, "schema file")->required();
    sub->add_option("--k", clu.k, "cluster count (0 = choose automatically)");
    sub->add_option("--m", clu.m, "fuzzifier (0 = data-driven)");
    sub->add_option("--seed", clu.seed, "random seed");
    sub->add_option("--tolerance", clu.tolerance, "convergence tolerance");
    sub->add_option("--max-iter", clu.max_iter, "iteration cap");
    sub->add_option("--threads", clu.threads, "parallel sweep width");
    sub->add_option("--model-out", clu.model_out, "model JSON to write");
    sub->add_option("--labels-out", clu.labels_out, "labels CSV to write");
    sub->callback([&] {
      const auto log = read_and_encode(clu.records, clu.schema);
      const double m =
          clu.m > 1.0 ? clu.m
                      : fedpat::compute_fuzzifier(log.features.data.rows(),
                                                  log.features.data.cols());
      std::size_t k = clu.k;
      if (k == 0) {
        k = fedpat::select_cluster_count(log.features.data, m, clu.seed,
                                         clu.threads)
                .k_star;
      }
      const auto fit = fedpat::fcm_fit(log.features.data, k, m, clu.seed,
                                       clu.tolerance, clu.max_iter);
      std::cout << "k: " << k << "\nm: " << m
                << "\niterations: " << fit.iterations
                << "\nconverged: " << (fit.converged ? "yes" : "no")
                << "\nobjective: " << fit.objective_history.back() << "\n";
      if (!clu.model_out.empty()) {
        fedpat::save_model(clu.model_out, fit.model,
                           fedpat::columns_digest(log.features.columns));
      }
      if (!clu.labels_out.empty()) {
        write_label_file(clu.labels_out, log.records,
                         fedpat::hard_labels(fit.membership));
      }
    });
  }

  // ---------------------------------------------------------------- keygen
  struct {
    int bits = 2048;
    std::uint64_t seed = 1;
    std::string out, public_out;
  } key;
  {
    auto* sub = app.add_subcommand(
        "keygen", "generate a Paillier keypair for the federation");
    sub->add_option("--bits", key.bits, "modulus size in bits");
    sub->add_option("--seed", key.seed, "deterministic generation seed");
    sub->add_option("--out", key.out, "keypair JSON to write")->required();
    sub->add_option("--public-out", key.public_out,
                    "public-only JSON to write (for the aggregator)");
    sub->callback([&] {
      const auto kp = fedpat::keygen(key.bits, key.seed, &std::cerr);
      fedpat::save_keypair(key.out, kp);
      if (!key.public_out.empty()) {
        fedpat::save_public_key(key.public_out, kp.pub);
      }
      std::cout << "modulus bits: " << kp.pub.bits << "\n";
    });
  }

  // ------------------------------------------------------------ fed-server
  struct {
    std::string key, host = "0.0.0.0";
    int port = 0;
    std::size_t clients = 1;
    std::size_t k = 2;
    double m = 2.0;
    std::uint64_t seed = 1;
    int rounds = 3;
    double tolerance = 1e-6;
    int max_iter = 300;
    bool plaintext = false;
  } srv;
  {
    auto* sub = app.add_subcommand(
        "fed-server", "aggregate encrypted updates from TCP clients");
    sub->add_option("--key", srv.key, "public key JSON (no private part used)")
        ->required();
    sub->add_option("--port", srv.port, "TCP port to listen on")->required();
    sub->add_option("--host", srv.host, "bind address");
    sub->add_option("--clients", srv.clients, "number of participants")
        ->required();
    sub->add_option("--k", srv.k, "cluster count to broadcast")->required();
    sub->add_option("--m", srv.m, "fuzzifier to broadcast")->required();
    sub->add_option("--seed", srv.seed, "seed to broadcast");
    sub->add_option("--rounds", srv.rounds, "federation rounds");
    sub->add_option("--tolerance", srv.tolerance, "convergence tolerance");
    sub->add_option("--max-iter", srv.max_iter, "iteration cap");
    sub->add_flag("--plaintext", srv.plaintext,
                  "skip encryption (testing only)");
    sub->callback([&] {
      fedpat::FederationConfig fc;
      fc.num_clients = srv.clients;
      fc.rounds = srv.rounds;
      fc.k = srv.k;
      fc.fuzzifier_m = srv.m;
      fc.seed = srv.seed;
      fc.tolerance = srv.tolerance;
      fc.max_iter = srv.max_iter;
      fc.encrypted = !srv.plaintext;
      const auto pub = fedpat::load_public_key(srv.key);
      fedpat::TcpListener listener(static_cast<std::uint16_t>(srv.port),
                                   srv.host);
      // Flushed so wrappers polling a redirected stdout see the port before
      // the accept loop blocks.
      std::cout << "listening on " << srv.host << ":" << listener.port()
                << " for " << srv.clients << " clients" << std::endl;
      auto transports = listener.accept_many(srv.clients);
      std::vector<fedpat::FrameTransport*> raw;
      for (auto& t : transports) raw.push_back(t.get());
      const auto summary = fedpat::AggregatorSession(pub, fc).run(raw);
      std::cout << "aggregated " << summary.clients << " clients over "
                << summary.rounds_completed << " rounds\n";
    });
  }

  // ------------------------------------------------------------ fed-client
  struct {
    std::string connect, records, schema, key, id, model_out, labels_out;
    std::size_t clients = 1;
    int timeout = 10;
  } cli;
  {
    auto* sub = app.add_subcommand(
        "fed-client", "join a federation round over TCP with local data");
    sub->add_option("--connect", cli.connect, "server address host:port")
        ->required();
    sub->add_option("--records", cli.records, "records CSV")->required();
    sub->add_option("--schema", cli.schema, "schema file")->required();
    sub->add_option("--key", cli.key, "shared keypair JSON")->required();
    sub->add_option("--id", cli.id, "client identifier")->required();
    sub->add_option("--clients", cli.clients, "expected number of participants")
        ->required();
    sub->add_option("--timeout", cli.timeout, "connect timeout in seconds");
    sub->add_option("--model-out", cli.model_out, "global model JSON to write");
    sub->add_option("--labels-out", cli.labels_out,
                    "labels CSV for the local records");
    sub->callback([&] {
      std::string host;
      int port = 0;
      split_host_port(cli.connect, host, port);
      const auto log = read_and_encode(cli.records, cli.schema);
      const auto kp = fedpat::load_keypair(cli.key);
      auto transport = fedpat::tcp_connect(
          host, static_cast<std::uint16_t>(port),
          std::chrono::seconds(cli.timeout));
      const auto model = fedpat::run_client(kp, log.features.data, *transport,
                                            cli.id, cli.clients);
      std::cout << "global model: k=" << model.k << " m=" << model.fuzzifier_m
                << "\n";
      if (!cli.model_out.empty()) {
        fedpat::save_model(cli.model_out, model,
                           fedpat::columns_digest(log.features.columns));
      }
      if (!cli.labels_out.empty()) {
        const auto membership = fedpat::membership_for(
            log.features.data, model.centers, model.fuzzifier_m);
        write_label_file(cli.labels_out, log.records,
                         fedpat::hard_labels(membership));
      }
    });
  }

  // --------------------------------------------------------------- fed-sim
  struct {
    std::string records, schema, model_out, labels_out, tuning_out;
    std::size_t clients = 3;
    std::size_t k = 0;
    double m = 0.0;
    std::uint64_t seed = 1;
    int rounds = 3;
    int key_bits = 2048;
    double tolerance = 1e-6;
    int max_iter = 300;
    bool plaintext = false;
  } sim;
  {
    auto* sub = app.add_subcommand(
        "fed-sim", "simulate a P-client federation in one process");
    sub->add_option("--records", sim.records, "records CSV")->required();
    sub->add_option("--schema", sim.schema, "schema file")->required();
    sub->add_option("--clients", sim.clients, "number of simulated clients");
    sub->add_option("--k", sim.k, "cluster count (0 = choose automatically)");
    sub->add_option("--m", sim.m, "fuzzifier (0 = data-driven)");
    sub->add_option("--seed", sim.seed, "random seed");
    sub->add_option("--rounds", sim.rounds, "federation rounds");
    sub->add_option("--key-bits", sim.key_bits, "Paillier modulus bits");
    sub->add_option("--tolerance", sim.tolerance, "convergence tolerance");
    sub->add_option("--max-iter", sim.max_iter, "iteration cap");
    sub->add_flag("--plaintext", sim.plaintext,
                  "skip encryption (testing only)");
    sub->add_option("--model-out", sim.model_out, "model JSON to write");
    sub->add_option("--labels-out", sim.labels_out, "labels CSV to write");
    sub->add_option("--tuning-out", sim.tuning_out, "tuning JSON to write");
    sub->callback([&] {
      const auto log = read_and_encode(sim.records, sim.schema);
      const double m =
          sim.m > 1.0 ? sim.m
                      : fedpat::compute_fuzzifier(log.features.data.rows(),
                                                  log.features.data.cols());
      fedpat::FederationConfig fc;
      fc.num_clients = sim.clients;
      fc.rounds = sim.rounds;
      fc.key_bits = sim.key_bits;
      fc.fuzzifier_m = m;
      fc.seed = sim.seed;
      fc.tolerance = sim.tolerance;
      fc.max_iter = sim.max_iter;
      fc.encrypted = !sim.plaintext;
      const auto shards = fedpat::shard_rows(log.features.data, sim.clients);
      const auto keypair = fedpat::keygen(
          sim.key_bits, fedpat::derive_seed(sim.seed, 0x6665646b6579ull),
          &std::cerr);
      std::size_t k = sim.k;
      if (k == 0) {
        const auto sel = fedpat::federated_select_k(fc, shards, &keypair);
        k = sel.k_star;
        std::cout << "k_star: " << k << "\n";
        if (!sim.tuning_out.empty()) {
          write_tuning_json(sim.tuning_out, log.features.data.rows(),
                            log.features.data.cols(), m, sel);
        }
      }
      fc.k = k;
      const auto model = fedpat::run_federation(fc, shards, &keypair);
      std::cout << "clients: " << sim.clients << "\nrounds: " << sim.rounds
                << "\nk: " << k << "\nm: " << m << "\n";
      if (!sim.model_out.empty()) {
        fedpat::save_model(sim.model_out, model,
                           fedpat::columns_digest(log.features.columns));
      }
      if (!sim.labels_out.empty()) {
        const auto membership = fedpat::membership_for(
            log.features.data, model.centers, model.fuzzifier_m);
        write_label_file(sim.labels_out, log.records,
                         fedpat::hard_labels(membership));
      }
    });
  }

  // --------------------------------------------------------------- extract
  struct {
    std::vector<std::string> inputs;
    std::string features = "datetime,pid";
    std::size_t min_pts = 2;
    std::string chron_out, txn_out, patterns_out;
  } ext;
  {
    auto* sub = app.add_subcommand(
        "extract", "build the chronological DB, transactions, and patterns");
    sub->add_option("--input", ext.inputs,
                    "records.csv,labels.csv,schema,prefix (repeatable)")
        ->required();
    sub->add_option("--features", ext.features,
                    "transaction features: datetime,pid or datetime,logtype");
    sub->add_option("--min-pts", ext.min_pts, "DBSCAN min_pts");
    sub->add_option("--chron-out", ext.chron_out, "chronological CSV to write");
    sub->add_option("--txn-out", ext.txn_out, "transactions JSONL to write");
    sub->add_option("--patterns-out", ext.patterns_out,
                    "patterns JSONL to write");
    sub->callback([&] {
      std::vector<EncodedLog> logs;
      std::vector<fedpat::LabelledLog> labelled;
      for (const auto& spec : ext.inputs) {
        const auto parts = split_tuple(spec, 4, "--input");
        EncodedLog log;
        log.schema = fedpat::load_schema(parts[2]);
        log.records = fedpat::read_records_csv(parts[0], log.schema);
        logs.push_back(std::move(log));
        const auto labels =
            fedpat::read_labels_csv(parts[1], logs.back().records);
        labelled.push_back(
            fedpat::LabelledLog{logs.back().records, labels, parts[3]});
      }
      const auto chron = fedpat::build_chronological_db(labelled);
      const auto txns = fedpat::cluster_transactions(
          chron, ext.min_pts, fedpat::txn_features_from_string(ext.features));
      const auto patterns = fedpat::extract_patterns(txns);
      if (!ext.chron_out.empty()) {
        std::ofstream os(ext.chron_out, std::ios::binary);
        fedpat::write_chron_csv(os, chron);
      }
      if (!ext.txn_out.empty()) {
        std::ofstream os(ext.txn_out, std::ios::binary);
        fedpat::write_transactions_jsonl(os, txns);
      }
      if (!ext.patterns_out.empty()) {
        std::ofstream os(ext.patterns_out, std::ios::binary);
        fedpat::write_patterns_jsonl(os, patterns);
      }
      std::cout << "events: " << chron.size()
                << "\ntransactions: " << txns.size()
                << "\npatterns: " << patterns.size() << "\n";
    });
  }

  // ------------------------------------------------------------------ rank
  struct {
    std::string patterns, transactions, out;
    std::size_t total = 0;
    std::size_t top = 10;
  } rnk;
  {
    auto* sub =
        app.add_subcommand("rank", "score patterns by suspicion and sort");
    sub->add_option("--patterns", rnk.patterns, "patterns JSONL")->required();
    sub->add_option("--transactions", rnk.transactions,
                    "transactions JSONL (supplies the transaction total)");
    sub->add_option("--total", rnk.total,
                    "transaction total (overrides --transactions)");
    sub->add_option("--out", rnk.out, "ranking CSV to write");
    sub->add_option("--top", rnk.top, "rows to print");
    sub->callback([&] {
      const auto patterns = fedpat::read_patterns_jsonl(rnk.patterns);
      std::size_t total = rnk.total;
      if (total == 0) {
        if (rnk.transactions.empty()) {
          throw fedpat::InputError(
              "rank needs --total or --transactions for the transaction "
              "count");
        }
        total = fedpat::read_transactions_jsonl(rnk.transactions).size();
      }
      const auto ranked = fedpat::rank_patterns(patterns, total);
      if (!rnk.out.empty()) {
        std::ofstream os(rnk.out, std::ios::binary);
        if (!os) throw fedpat::InputError("cannot write " + rnk.out);
        fedpat::write_ranking_index(os, ranked);
      }
      for (const auto& r : ranked) {
        if (r.rank > rnk.top) break;
        std::cout << r.rank << ". score=" << r.score << " supports="
                  << r.pattern.instances.size() << " labels=";
        for (std::size_t i = 0; i < r.pattern.labels.size(); ++i) {
          std::cout << (i ? " " : "") << r.pattern.labels[i];
        }
        std::cout << "\n";
      }
    });
  }

  // ---------------------------------------------------------------- report
  struct {
    std::string transactions, chron, feature_map, format = "csv", out;
    std::vector<std::string> inputs;
  } rep;
  {
    auto* sub = app.add_subcommand(
        "report", "render ranked patterns with mapped presentation fields");
    sub->add_option("--transactions", rep.transactions, "transactions JSONL")
        ->required();
    sub->add_option("--chron", rep.chron, "chronological CSV")->required();
    sub->add_option("--input", rep.inputs,
                    "records.csv,schema (repeatable, for attribute values)")
        ->required();
    sub->add_option("--feature-map", rep.feature_map,
                    "feature map JSON (default: schema annotations)");
    sub->add_option("--format", rep.format, "csv, markdown, or html");
    sub->add_option("--out", rep.out, "report file to write")->required();
    sub->callback([&] {
      const auto txns = fedpat::read_transactions_jsonl(rep.transactions);
      const auto chron = fedpat::read_chron_csv(rep.chron);
      const auto ranked =
          fedpat::rank_patterns(fedpat::extract_patterns(txns), txns.size());
      std::vector<EncodedLog> logs;
      std::map<std::string, fedpat::Schema> schemas;
      for (const auto& spec : rep.inputs) {
        const auto parts = split_tuple(spec, 2, "--input");
        EncodedLog log;
        log.schema = fedpat::load_schema(parts[1]);
        log.records = fedpat::read_records_csv(parts[0], log.schema);
        if (!log.records.empty()) {
          schemas[log.records.front().log_type] = log.schema;
        }
        logs.push_back(std::move(log));
      }
      fedpat::FeatureMap fmap;
      if (!rep.feature_map.empty()) {
        fmap = fedpat::load_feature_map(rep.feature_map);
      } else {
        fmap = fedpat::feature_map_from_schemas(schemas);
      }
      fedpat::RecordIndex index;
      for (const auto& log : logs) index.add_records(log.records);
      index.add_chron(chron);
      std::vector<std::vector<fedpat::PresentationRow>> rendered;
      for (const auto& r : ranked) {
        rendered.push_back(fedpat::render_pattern(r, txns, index, fmap));
      }
      fedpat::emit_report(rep.out, ranked, rendered,
                          fedpat::report_format_from_string(rep.format));
      std::cout << "patterns: " << ranked.size() << "\nreport: " << rep.out
                << "\n";
    });
  }

  // ------------------------------------------------------------------ eval
  struct {
    std::string pred, truth;
  } evl;
  {
    auto* sub = app.add_subcommand(
        "eval", "score predicted labels against ground truth");
    sub->add_option("--pred", evl.pred, "predicted labels file or directory")
        ->required();
    sub->add_option("--truth", evl.truth, "true labels file or directory")
        ->required();
    sub->callback([&] {
      namespace fs = std::filesystem;
      std::vector<fedpat::EvalRow> rows;
      const bool dir_mode =
          fs::is_directory(evl.pred) && fs::is_directory(evl.truth);
      if (dir_mode) {
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(evl.pred)) {
          if (entry.is_regular_file()) {
            names.push_back(entry.path().filename().string());
          }
        }
        std::sort(names.begin(), names.end());
        for (const auto& name : names) {
          const fs::path truth_path = fs::path(evl.truth) / name;
          if (!fs::exists(truth_path)) {
            throw fedpat::InputError("no matching truth file for " + name);
          }
          const auto pred = fedpat::read_label_column(
              (fs::path(evl.pred) / name).string());
          const auto truth =
              fedpat::read_label_column(truth_path.string());
          rows.push_back({name, fedpat::metrics(truth, pred)});
        }
        if (rows.empty()) {
          throw fedpat::InputError("no label files in " + evl.pred);
        }
      } else {
        const auto pred = fedpat::read_label_column(evl.pred);
        const auto truth = fedpat::read_label_column(evl.truth);
        rows.push_back({fs::path(evl.pred).filename().string(),
                        fedpat::metrics(truth, pred)});
      }
      fedpat::write_eval_table(std::cout, rows, dir_mode);
    });
  }

  // ----------------------------------------------------------------- bench
  struct {
    std::string config;
    std::vector<std::string> modes = {"pure", "federated-128",
                                      "federated-256"};
    std::size_t clients = 3;
    int runs = 1;
  } ben;
  {
    auto* sub = app.add_subcommand(
        "bench", "time cluster validation and clustering per mode");
    sub->add_option("--config", ben.config, "pipeline config JSON")
        ->required();
    sub->add_option("--modes", ben.modes, "subset of pure/federated-128/256");
    sub->add_option("--clients", ben.clients,
                    "party count for the federated modes");
    sub->add_option("--runs", ben.runs, "repetitions (median reported)");
    sub->callback([&] {
      const auto cfg = fedpat::load_pipeline_config(ben.config);
      if (cfg.logs.empty()) {
        throw fedpat::InputError("bench: config lists no log files");
      }
      fedpat::ParseOptions opts;
      opts.default_year = cfg.default_year;
      const auto registry = fedpat::PatternRegistry::with_builtins();
      std::vector<fedpat::FeatureMatrix> features;
      std::vector<double> fuzzifiers;
      for (const auto& spec : cfg.logs) {
        const auto il = fedpat::ingest_log(spec, opts, registry);
        features.push_back(fedpat::encode(il.parsed.records, il.schema));
        if (features.back().data.rows() == 0) {
          throw fedpat::InputError("bench: " + spec.path + " is empty");
        }
        fuzzifiers.push_back(fedpat::compute_fuzzifier(
            features.back().data.rows(), features.back().data.cols()));
      }
      std::vector<fedpat::BenchRow> table;
      for (const auto& mode : ben.modes) {
        int bits = 0;
        if (mode == "federated-128") {
          bits = 128;
        } else if (mode == "federated-256") {
          bits = 256;
        } else if (mode != "pure") {
          throw fedpat::InputError("bench: unknown mode '" + mode + "'");
        }
        fedpat::PaillierKeypair kp;
        if (bits) {
          kp = fedpat::keygen(bits, fedpat::derive_seed(cfg.seed, bits),
                              nullptr);
        }
        std::vector<double> val_runs, clu_runs;
        for (int run = 0; run < ben.runs; ++run) {
          double val_s = 0.0, clu_s = 0.0;
          for (std::size_t i = 0; i < features.size(); ++i) {
            const auto& data = features[i].data;
            const double m = fuzzifiers[i];
            const std::uint64_t seed =
                fedpat::derive_seed(cfg.seed, fedpat::fnv1a64(
                                                  cfg.logs[i].prefix));
            using clock = std::chrono::steady_clock;
            if (bits == 0) {
              auto t0 = clock::now();
              const auto sel = fedpat::select_cluster_count(data, m, seed,
                                                            cfg.threads);
              auto t1 = clock::now();
              fedpat::fcm_fit(data, sel.k_star, m, seed, cfg.tolerance,
                              cfg.max_iter);
              auto t2 = clock::now();
              val_s += std::chrono::duration<double>(t1 - t0).count();
              clu_s += std::chrono::duration<double>(t2 - t1).count();
            } else {
              fedpat::FederationConfig fc;
              fc.num_clients = ben.clients;
              fc.rounds = cfg.rounds;
              fc.key_bits = bits;
              fc.fuzzifier_m = m;
              fc.seed = seed;
              fc.tolerance = cfg.tolerance;
              fc.max_iter = cfg.max_iter;
              const auto shards = fedpat::shard_rows(data, ben.clients);
              auto t0 = clock::now();
              const auto sel = fedpat::federated_select_k(fc, shards, &kp);
              auto t1 = clock::now();
              fc.k = sel.k_star;
              fedpat::run_federation(fc, shards, &kp);
              auto t2 = clock::now();
              val_s += std::chrono::duration<double>(t1 - t0).count();
              clu_s += std::chrono::duration<double>(t2 - t1).count();
            }
          }
          val_runs.push_back(val_s);
          clu_runs.push_back(clu_s);
        }
        table.push_back({mode, median(val_runs), median(clu_runs)});
      }
      fedpat::write_bench_table(std::cout, table);
    });
  }

  // -------------------------------------------------------------- pipeline
  struct {
    std::string config, out, txn_features;
    std::uint64_t seed = 0;
    int key_bits = 0;
    std::vector<std::string> report_formats;
    bool federated = false;
    std::size_t clients = 0;
  } pip;
  {
    auto* sub = app.add_subcommand(
        "pipeline", "run every stage end-to-end from a config file");
    sub->add_option("--config", pip.config, "pipeline config JSON")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", pip.out, "output directory (overrides config)");
    auto* seed_opt =
        sub->add_option("--seed", pip.seed, "seed (overrides config)");
    auto* bits_opt = sub->add_option("--key-bits", pip.key_bits,
                                     "Paillier bits (overrides config)");
    sub->add_option("--txn-features", pip.txn_features,
                    "datetime,pid or datetime,logtype (overrides config)");
    sub->add_option("--report-format", pip.report_formats,
                    "report formats (overrides config)");
    auto* fed_opt = sub->add_flag("--federated", pip.federated,
                                  "force federated clustering on");
    auto* cl_opt = sub->add_option("--clients", pip.clients,
                                   "federation party count (overrides config)");
    sub->callback([&] {
      auto cfg = fedpat::load_pipeline_config(pip.config);
      if (!pip.out.empty()) cfg.out_dir = pip.out;
      if (seed_opt->count()) cfg.seed = pip.seed;
      if (bits_opt->count()) cfg.key_bits = pip.key_bits;
      if (!pip.txn_features.empty()) {
        cfg.txn_features = fedpat::txn_features_from_string(pip.txn_features);
      }
      if (!pip.report_formats.empty()) cfg.report_formats = pip.report_formats;
      if (fed_opt->count()) cfg.federation_enabled = true;
      if (cl_opt->count()) cfg.num_clients = pip.clients;
      fedpat::run_pipeline(cfg, &std::cout);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fedpat::kExitBadInput;
  } catch (const fedpat::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fedpat::kExitBadInput;
  } catch (const fedpat::ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fedpat::kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fedpat::kExitInternal;
  }
  return fedpat::kExitOk;
}
