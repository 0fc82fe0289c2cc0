#pragma once

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedpat/csv.hpp"
#include "fedpat/log_parse.hpp"
#include "fedpat/ranking.hpp"
#include "fedpat/schema.hpp"
#include "fedpat/time.hpp"
#include "fedpat/transactions.hpp"

namespace fedpat {

// The fixed 10-field analyst row. Every source log maps its own attributes
// into this shape; anything unmapped renders as "-".
struct PresentationRow {
  std::string date = "-";
  std::string time = "-";
  std::string medium = "-";
  std::string message = "-";
  std::string message2 = "-";
  std::string src_ip = "-";
  std::string dest_ip = "-";
  std::string user = "-";
  std::string target = "-";
  std::string label = "-";

  std::vector<std::string> to_cells() const {
    return {date,    time,    medium, message, message2,
            src_ip,  dest_ip, user,   target,  label};
  }
};

// Per log type: source attribute -> one or more presentation fields.
struct FeatureMap {
  std::map<std::string, std::map<std::string, std::vector<std::string>>> by_log_type;
};

namespace detail {

inline void validate_feature_targets(
    const std::string& log_type,
    const std::map<std::string, std::vector<std::string>>& mapping) {
  std::set<std::string> used_targets;
  for (const auto& [attr, fields] : mapping) {
    for (const auto& field : fields) {
      if (!is_presentation_field(field)) {
        throw InputError("feature map (" + log_type + "): '" + field +
                         "' is not a presentation field");
      }
      if (is_reserved_presentation_field(field)) {
        throw InputError("feature map (" + log_type + "): " + field +
                         " is filled automatically and cannot be mapped");
      }
      if (!used_targets.insert(field).second) {
        throw InputError("feature map (" + log_type + "): two attributes map "
                         "to " + field);
      }
    }
  }
}

}  // namespace detail

// File format: {"log_type": {"Attr": "Field" | ["Field", …], …}, …}
inline FeatureMap load_feature_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read feature map: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw InputError("feature map is not a JSON object: " + path);
  }
  FeatureMap fmap;
  for (const auto& [log_type, entries] : j.items()) {
    if (!entries.is_object()) {
      throw InputError("feature map (" + log_type + "): expected an object");
    }
    std::map<std::string, std::vector<std::string>> mapping;
    for (const auto& [attr, target] : entries.items()) {
      if (target.is_string()) {
        mapping[attr] = {target.get<std::string>()};
      } else if (target.is_array()) {
        mapping[attr] = target.get<std::vector<std::string>>();
      } else {
        throw InputError("feature map (" + log_type + "): target of '" +
                         attr + "' must be a field name or list");
      }
    }
    detail::validate_feature_targets(log_type, mapping);
    fmap.by_log_type[log_type] = std::move(mapping);
  }
  return fmap;
}

// Derives a map from schemas: any attribute annotated with a presentation
// target contributes one entry for its log type.
inline FeatureMap feature_map_from_schemas(
    const std::map<std::string, Schema>& schemas_by_log_type) {
  FeatureMap fmap;
  for (const auto& [log_type, schema] : schemas_by_log_type) {
    std::map<std::string, std::vector<std::string>> mapping;
    for (const auto& attr : schema) {
      if (attr.presentation_target) {
        mapping[attr.name].push_back(*attr.presentation_target);
      }
    }
    detail::validate_feature_targets(log_type, mapping);
    fmap.by_log_type[log_type] = std::move(mapping);
  }
  return fmap;
}

// Fast lookup from (source_file, original_index) to parsed record / chron row.
struct RecordIndex {
  std::map<std::pair<std::string, int>, const RawLogRecord*> records;
  std::map<std::pair<std::string, int>, const ChronRecord*> chron;

  void add_records(const std::vector<RawLogRecord>& rs) {
    for (const auto& r : rs) records[{r.source_file, r.original_index}] = &r;
  }
  void add_chron(const std::vector<ChronRecord>& cs) {
    for (const auto& c : cs) chron[{c.source_file, c.original_index}] = &c;
  }
};

// Emits one 10-field row per member record of every instance of the ranked
// pattern, ordered by (instance id, time). Date/Time/Label come from the
// chronological record; the remaining fields follow the feature map.
inline std::vector<PresentationRow> render_pattern(
    const RankedPattern& ranked, const std::vector<Transaction>& transactions,
    const RecordIndex& index, const FeatureMap& fmap) {
  std::map<int, const Transaction*> by_id;
  for (const auto& t : transactions) by_id[t.transaction_id] = &t;

  std::vector<PresentationRow> rows;
  for (int instance : ranked.pattern.instances) {
    auto it = by_id.find(instance);
    if (it == by_id.end()) {
      throw InputError("render_pattern: unknown transaction id " +
                       std::to_string(instance));
    }
    for (const auto& key : it->second->member_records) {
      auto cit = index.chron.find(key);
      auto rit = index.records.find(key);
      if (cit == index.chron.end() || rit == index.records.end()) {
        throw InputError("render_pattern: member record not indexed: " +
                         key.first + "#" + std::to_string(key.second));
      }
      const ChronRecord& chron = *cit->second;
      const RawLogRecord& raw = *rit->second;
      auto mit = fmap.by_log_type.find(chron.log_type);
      if (mit == fmap.by_log_type.end()) {
        throw InputError("render_pattern: no feature map for log type '" +
                         chron.log_type + "'");
      }

      PresentationRow row;
      row.date = format_date(chron.datetime);
      row.time = format_time(chron.datetime);
      row.label = chron.phase1_label;
      for (const auto& [attr, fields] : mit->second) {
        const auto ait = raw.attributes.find(attr);
        if (ait == raw.attributes.end() || ait->second.empty()) continue;
        for (const auto& field : fields) {
          if (field == "Medium") row.medium = ait->second;
          else if (field == "Message") row.message = ait->second;
          else if (field == "Message2") row.message2 = ait->second;
          else if (field == "SrcIP") row.src_ip = ait->second;
          else if (field == "DestIP") row.dest_ip = ait->second;
          else if (field == "User") row.user = ait->second;
          else if (field == "Target") row.target = ait->second;
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// --- reports -------------------------------------------------------------------

enum class ReportFormat { Csv, Markdown, Html };

inline ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "html") return ReportFormat::Html;
  throw InputError("unknown report format '" + s +
                   "' (expected csv, markdown, or html)");
}

namespace detail {

inline std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += " ";
    out += l;
  }
  return out;
}

inline std::string format_score(double s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", s);
  return buf;
}

inline std::string format_log10(double s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", std::log10(s));
  return buf;
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string md_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '|') out += "\\|";
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline const std::array<const char*, 11>& report_row_header() {
  static const std::array<const char*, 11> h = {
      "rank",  "Date",   "Time",  "Medium", "Message", "Message2",
      "SrcIP", "DestIP", "User", "Target", "Label"};
  return h;
}

// The Table-style index: one line per pattern, most suspicious first.
inline void write_ranking_index(std::ostream& os,
                                const std::vector<RankedPattern>& ranked) {
  csv::write_row(os, {"rank", "labels", "supports", "num_instances", "score",
                      "log10_score"});
  for (const auto& r : ranked) {
    std::string supports;
    for (int id : r.pattern.instances) {
      if (!supports.empty()) supports += " ";
      supports += std::to_string(id);
    }
    csv::write_row(os, {std::to_string(r.rank),
                        detail::join_labels(r.pattern.labels), supports,
                        std::to_string(r.pattern.instances.size()),
                        detail::format_score(r.score),
                        detail::format_log10(r.score)});
  }
}

// Reads an index back (from a ranking file or the first section of a CSV
// report). Stops at the first blank row.
inline std::vector<RankedPattern> read_ranking_index(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0].size() != 6 || rows[0][0] != "rank") {
    throw InputError("ranking file has an unexpected header: " + path);
  }
  std::vector<RankedPattern> ranked;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() == 1 && row[0].empty()) break;  // report body follows
    if (row.size() != 6) {
      throw InputError("ranking row " + std::to_string(i) + " has wrong arity");
    }
    RankedPattern r;
    r.rank = std::stoi(row[0]);
    for (auto& l : split(row[1], ' ')) {
      if (!l.empty()) r.pattern.labels.push_back(l);
    }
    for (auto& s : split(row[2], ' ')) {
      if (!s.empty()) r.pattern.instances.push_back(std::stoi(s));
    }
    r.score = std::stod(row[4]);
    ranked.push_back(std::move(r));
  }
  return ranked;
}

// Writes the rank index (rank, labels, supports, score, log10 score)
// followed by every pattern's instance rows. `rendered` aligns 1:1 with
// `ranked`. The CSV flavor keeps both tables in one file separated by a
// blank line; the index re-parses with csv::read_file.
inline std::string render_report(
    const std::vector<RankedPattern>& ranked,
    const std::vector<std::vector<PresentationRow>>& rendered,
    ReportFormat format) {
  if (ranked.empty()) throw InputError("render_report: empty ranking");
  if (rendered.size() != ranked.size()) {
    throw InputError("render_report: rendered rows misaligned with ranking");
  }

  std::ostringstream os;
  if (format == ReportFormat::Csv) {
    write_ranking_index(os, ranked);
    os << "\r\n";
    std::vector<std::string> header(report_row_header().begin(),
                                    report_row_header().end());
    csv::write_row(os, header);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      for (const auto& row : rendered[i]) {
        std::vector<std::string> cells = {std::to_string(ranked[i].rank)};
        const auto rc = row.to_cells();
        cells.insert(cells.end(), rc.begin(), rc.end());
        csv::write_row(os, cells);
      }
    }
  } else if (format == ReportFormat::Markdown) {
    os << "# Pattern report\n\n";
    os << "| Rank | Pattern | Supports | Score | log10(s) |\n";
    os << "| --- | --- | --- | --- | --- |\n";
    for (const auto& r : ranked) {
      os << "| " << r.rank << " | " << detail::md_escape(detail::join_labels(
                r.pattern.labels))
         << " | " << r.pattern.instances.size() << " | "
         << detail::format_score(r.score) << " | "
         << detail::format_log10(r.score) << " |\n";
    }
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      os << "\n## Rank " << ranked[i].rank << ": "
         << detail::md_escape(detail::join_labels(ranked[i].pattern.labels))
         << "\n\n";
      os << "| Date | Time | Medium | Message | Message2 | SrcIP | DestIP "
            "| User | Target | Label |\n";
      os << "| --- | --- | --- | --- | --- | --- | --- | --- | --- | --- |\n";
      for (const auto& row : rendered[i]) {
        os << "|";
        for (const auto& cell : row.to_cells()) {
          os << " " << detail::md_escape(cell) << " |";
        }
        os << "\n";
      }
    }
  } else {
    os << "<!doctype html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
          "<title>Pattern report</title>\n<style>\n"
          "body{font-family:sans-serif;margin:2em}\n"
          "table{border-collapse:collapse;margin-bottom:1.5em}\n"
          "th,td{border:1px solid #999;padding:0.25em 0.6em;"
          "font-size:0.9em}\nth{background:#eee}\n</style>\n</head>\n<body>\n";
    os << "<h1>Pattern report</h1>\n<table>\n<tr><th>Rank</th><th>Pattern"
          "</th><th>Supports</th><th>Score</th><th>log10(s)</th></tr>\n";
    for (const auto& r : ranked) {
      os << "<tr><td>" << r.rank << "</td><td>"
         << detail::html_escape(detail::join_labels(r.pattern.labels))
         << "</td><td>" << r.pattern.instances.size() << "</td><td>"
         << detail::format_score(r.score) << "</td><td>"
         << detail::format_log10(r.score) << "</td></tr>\n";
    }
    os << "</table>\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      os << "<h2>Rank " << ranked[i].rank << ": "
         << detail::html_escape(detail::join_labels(ranked[i].pattern.labels))
         << "</h2>\n<table>\n<tr>";
      for (const auto f : kPresentationFields) os << "<th>" << f << "</th>";
      os << "</tr>\n";
      for (const auto& row : rendered[i]) {
        os << "<tr>";
        for (const auto& cell : row.to_cells()) {
          os << "<td>" << detail::html_escape(cell) << "</td>";
        }
        os << "</tr>\n";
      }
      os << "</table>\n";
    }
    os << "</body>\n</html>\n";
  }
  return os.str();
}

inline void emit_report(const std::string& path,
                        const std::vector<RankedPattern>& ranked,
                        const std::vector<std::vector<PresentationRow>>& rendered,
                        ReportFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write report: " + path);
  os << render_report(ranked, rendered, format);
}

}  // namespace fedpat
