#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedpat/csv.hpp"
#include "fedpat/dbscan.hpp"
#include "fedpat/log_parse.hpp"
#include "fedpat/time.hpp"

namespace fedpat {

// One row of the merged, time-ordered event database.
struct ChronRecord {
  std::int64_t datetime = 0;
  std::string phase1_label;  // log prefix + local cluster id, e.g. "E2"
  std::string log_type;
  long pid = 1;  // 1 when the source record had none
  std::string source_file;
  int original_index = 0;
};

struct LabelledLog {
  std::vector<RawLogRecord> records;
  std::vector<int> labels;  // cluster id per record, aligned 1:1
  std::string log_prefix;   // unique letter(s) per log file: A, B, C, ...
};

// Merges labelled logs into one chronological database. Sorting is stable,
// so same-second events keep their input order.
inline std::vector<ChronRecord> build_chronological_db(
    const std::vector<LabelledLog>& logs) {
  std::set<std::string> prefixes;
  for (const auto& log : logs) {
    if (log.records.size() != log.labels.size()) {
      throw InputError("chronological db: records and labels differ in length");
    }
    if (log.log_prefix.empty() || !prefixes.insert(log.log_prefix).second) {
      throw InputError("chronological db: log prefixes must be unique and "
                       "non-empty");
    }
  }
  std::vector<ChronRecord> chron;
  for (const auto& log : logs) {
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      const RawLogRecord& r = log.records[i];
      ChronRecord c;
      c.datetime = r.timestamp;
      c.phase1_label = log.log_prefix + std::to_string(log.labels[i]);
      c.log_type = r.log_type;
      c.pid = r.pid.value_or(1);
      c.source_file = r.source_file;
      c.original_index = r.original_index;
      chron.push_back(std::move(c));
    }
  }
  std::stable_sort(chron.begin(), chron.end(),
                   [](const ChronRecord& a, const ChronRecord& b) {
                     return a.datetime < b.datetime;
                   });
  return chron;
}

struct Transaction {
  int transaction_id = 0;
  std::vector<std::string> item_set;  // sorted unique labels of the members
  std::vector<std::pair<std::string, int>> member_records;  // (file, index)
};

// Which two attributes the density clustering groups on. Time plus process
// id is the default; time plus log type is the documented alternative.
enum class TxnFeatures { DatetimePid, DatetimeLogType };

inline TxnFeatures txn_features_from_string(const std::string& s) {
  if (s == "datetime,pid") return TxnFeatures::DatetimePid;
  if (s == "datetime,logtype") return TxnFeatures::DatetimeLogType;
  throw InputError("unknown transaction features '" + s +
                   "' (expected datetime,pid or datetime,logtype)");
}

inline std::string to_string(TxnFeatures f) {
  return f == TxnFeatures::DatetimePid ? "datetime,pid" : "datetime,logtype";
}

// Groups the chronological database into transactions: the two selected
// columns are min-max scaled, eps comes from the k-distance knee, and each
// density cluster becomes one transaction. Noise points are kept as
// singleton transactions. Ids follow first appearance in time order.
inline std::vector<Transaction> cluster_transactions(
    const std::vector<ChronRecord>& chron, std::size_t min_pts = 2,
    TxnFeatures features = TxnFeatures::DatetimePid) {
  if (chron.empty()) throw InputError("cluster_transactions: empty input");

  Matrix feat(chron.size(), 2);
  if (features == TxnFeatures::DatetimePid) {
    for (std::size_t i = 0; i < chron.size(); ++i) {
      feat(i, 0) = static_cast<double>(chron[i].datetime);
      feat(i, 1) = static_cast<double>(chron[i].pid);
    }
  } else {
    std::set<std::string> types;
    for (const auto& c : chron) types.insert(c.log_type);
    std::map<std::string, double> code;
    double next = 0.0;
    for (const auto& t : types) code[t] = next++;
    for (std::size_t i = 0; i < chron.size(); ++i) {
      feat(i, 0) = static_cast<double>(chron[i].datetime);
      feat(i, 1) = code[chron[i].log_type];
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    double lo = feat(0, j), hi = feat(0, j);
    for (std::size_t i = 1; i < feat.rows(); ++i) {
      lo = std::min(lo, feat(i, j));
      hi = std::max(hi, feat(i, j));
    }
    for (std::size_t i = 0; i < feat.rows(); ++i) {
      feat(i, j) = (hi > lo) ? (feat(i, j) - lo) / (hi - lo) : 0.0;
    }
  }

  std::vector<int> labels;
  std::set<std::vector<double>> distinct;
  for (std::size_t i = 0; i < feat.rows(); ++i) {
    auto row = feat.row(i);
    distinct.insert(std::vector<double>(row.begin(), row.end()));
  }
  if (distinct.size() < 2) {
    // Every event shares one (time, pid) point: a single dense group.
    labels.assign(chron.size(), 0);
    if (chron.size() < min_pts) labels.assign(chron.size(), -1);
  } else {
    const double eps = knee_eps(feat, 2);
    labels = dbscan(feat, DbscanParams{eps, min_pts});
  }

  // Assign transaction ids by first appearance; records are already in
  // chronological order.
  std::map<int, int> cluster_to_txn;
  std::vector<Transaction> txns;
  for (std::size_t i = 0; i < chron.size(); ++i) {
    int txn_id;
    if (labels[i] == -1) {
      txn_id = static_cast<int>(txns.size());  // fresh singleton
      txns.push_back(Transaction{txn_id, {}, {}});
    } else {
      auto it = cluster_to_txn.find(labels[i]);
      if (it == cluster_to_txn.end()) {
        txn_id = static_cast<int>(txns.size());
        cluster_to_txn.emplace(labels[i], txn_id);
        txns.push_back(Transaction{txn_id, {}, {}});
      } else {
        txn_id = it->second;
      }
    }
    txns[static_cast<std::size_t>(txn_id)].member_records.emplace_back(
        chron[i].source_file, chron[i].original_index);
    txns[static_cast<std::size_t>(txn_id)].item_set.push_back(
        chron[i].phase1_label);
  }
  for (auto& t : txns) {
    std::sort(t.item_set.begin(), t.item_set.end());
    t.item_set.erase(std::unique(t.item_set.begin(), t.item_set.end()),
                     t.item_set.end());
  }
  return txns;
}

struct Pattern {
  std::vector<std::string> labels;  // a unique sorted item-set
  std::vector<int> instances;       // ids of the transactions equal to it
};

// One pattern per distinct item-set; instances are ascending transaction
// ids. Patterns come out in lexicographic label order (deterministic).
inline std::vector<Pattern> extract_patterns(
    const std::vector<Transaction>& transactions) {
  if (transactions.empty()) throw InputError("extract_patterns: no transactions");
  std::map<std::vector<std::string>, std::vector<int>> groups;
  for (const auto& t : transactions) {
    groups[t.item_set].push_back(t.transaction_id);
  }
  std::vector<Pattern> patterns;
  patterns.reserve(groups.size());
  for (auto& [labels, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    patterns.push_back(Pattern{labels, std::move(ids)});
  }
  return patterns;
}

// --- interchange files --------------------------------------------------------

inline void write_chron_csv(std::ostream& os,
                            const std::vector<ChronRecord>& chron) {
  csv::write_row(os, {"datetime", "phase1_label", "log_type", "pid",
                      "source_file", "original_index"});
  for (const auto& c : chron) {
    csv::write_row(os, {format_datetime(c.datetime), c.phase1_label,
                        c.log_type, std::to_string(c.pid), c.source_file,
                        std::to_string(c.original_index)});
  }
}

inline std::vector<ChronRecord> read_chron_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  const std::vector<std::string> expected = {"datetime",    "phase1_label",
                                             "log_type",    "pid",
                                             "source_file", "original_index"};
  if (rows.empty() || rows[0] != expected) {
    throw InputError("chronological db has an unexpected header: " + path);
  }
  std::vector<ChronRecord> chron;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != expected.size()) {
      throw InputError("chronological db row " + std::to_string(i) +
                       " has wrong arity");
    }
    ChronRecord c;
    const auto ts = parse_datetime(rows[i][0]);
    if (!ts) throw InputError("bad datetime in chronological db: " + rows[i][0]);
    c.datetime = *ts;
    c.phase1_label = rows[i][1];
    c.log_type = rows[i][2];
    c.pid = std::stol(rows[i][3]);
    c.source_file = rows[i][4];
    c.original_index = std::stoi(rows[i][5]);
    chron.push_back(std::move(c));
  }
  return chron;
}

// One transaction per line: {"id":…, "items":[…], "members":[[file,index]…]}.
inline void write_transactions_jsonl(std::ostream& os,
                                     const std::vector<Transaction>& txns) {
  for (const auto& t : txns) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& [file, index] : t.member_records) {
      members.push_back({file, index});
    }
    const nlohmann::json j{{"id", t.transaction_id},
                           {"items", t.item_set},
                           {"members", std::move(members)}};
    os << j.dump() << "\n";
  }
}

inline std::vector<Transaction> read_transactions_jsonl(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read transactions file: " + path);
  std::vector<Transaction> txns;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw InputError("malformed transaction line in " + path);
    }
    Transaction t;
    try {
      t.transaction_id = j.at("id").get<int>();
      t.item_set = j.at("items").get<std::vector<std::string>>();
      for (const auto& m : j.at("members")) {
        t.member_records.emplace_back(m.at(0).get<std::string>(),
                                      m.at(1).get<int>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("bad transaction record: ") + e.what());
    }
    txns.push_back(std::move(t));
  }
  return txns;
}

inline void write_patterns_jsonl(std::ostream& os,
                                 const std::vector<Pattern>& patterns) {
  for (const auto& p : patterns) {
    const nlohmann::json j{{"labels", p.labels}, {"instances", p.instances}};
    os << j.dump() << "\n";
  }
}

inline std::vector<Pattern> read_patterns_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read patterns file: " + path);
  std::vector<Pattern> patterns;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw InputError("malformed pattern line in " + path);
    }
    Pattern p;
    try {
      p.labels = j.at("labels").get<std::vector<std::string>>();
      p.instances = j.at("instances").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("bad pattern record: ") + e.what());
    }
    patterns.push_back(std::move(p));
  }
  return patterns;
}

}  // namespace fedpat
