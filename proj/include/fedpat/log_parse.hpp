#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "fedpat/csv.hpp"
#include "fedpat/schema.hpp"
#include "fedpat/time.hpp"

namespace fedpat {

struct RawLogRecord {
  std::string source_file;
  int original_index = 0;  // 0-based line number, unique per source file
  std::int64_t timestamp = 0;
  std::optional<long> pid;
  std::string log_type;
  std::map<std::string, std::string> attributes;
};

struct RejectedLine {
  std::string source_file;
  int original_index = 0;
  std::string log_type;
  std::string error;
};

struct ParseResult {
  std::vector<RawLogRecord> records;
  std::vector<RejectedLine> rejects;
};

struct ParseOptions {
  // Classic syslog timestamps carry no year.
  int default_year = 2005;
};

// A line parser fills the record (attributes, timestamp, pid) or reports why
// the line cannot be parsed.
using LineParser = std::function<bool(
    const std::string& line, const ParseOptions& opts, RawLogRecord& out,
    std::string& error)>;

namespace detail {

inline void set_date_time_attrs(RawLogRecord& rec) {
  rec.attributes["Date"] = format_date(rec.timestamp);
  rec.attributes["Time"] = format_time(rec.timestamp);
}

// "27/Feb/2005:03:51:20 -0500" — the offset is ignored (naive local time).
inline bool parse_apache_clf_time(const std::string& s, std::int64_t& out) {
  static const std::regex re(
      R"(^(\d{1,2})/(\w{3})/(\d{4}):(\d{2}):(\d{2}):(\d{2})(?: [+-]\d{4})?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return false;
  auto month = month_from_abbrev(m[2].str());
  if (!month) return false;
  CivilTime t;
  t.day = std::stoi(m[1]);
  t.month = *month;
  t.year = std::stoi(m[3]);
  t.hour = std::stoi(m[4]);
  t.minute = std::stoi(m[5]);
  t.second = std::stoi(m[6]);
  out = to_epoch_seconds(t);
  return true;
}

inline bool parse_http_access(const std::string& line,
                              const ParseOptions& /*opts*/, RawLogRecord& rec,
                              std::string& error) {
  static const std::regex re(
      R"re(^(\S+) (\S+) (\S+) \[([^\]]+)\] "([^"]*)" (\d{3}) (\S+)(?: "([^"]*)" "([^"]*)")?\s*$)re");
  std::smatch m;
  if (!std::regex_match(line, m, re)) {
    error = "does not match Apache combined log format";
    return false;
  }
  if (!parse_apache_clf_time(m[4].str(), rec.timestamp)) {
    error = "bad timestamp '" + m[4].str() + "'";
    return false;
  }
  rec.attributes["ClientIP"] = m[1];
  const std::string request = m[5];
  static const std::regex req_re(R"(^(\S+) (\S+) (\S+)$)");
  std::smatch rm;
  if (std::regex_match(request, rm, req_re)) {
    rec.attributes["HTTP_method"] = rm[1];
    rec.attributes["ClientRequestLine"] = rm[2];
    rec.attributes["Http_protocol"] = rm[3];
  } else {
    // Raw or truncated request lines (common in attack traffic).
    rec.attributes["HTTP_method"] = "-";
    rec.attributes["ClientRequestLine"] = request;
    rec.attributes["Http_protocol"] = "-";
  }
  rec.attributes["StatusCode"] = m[6];
  rec.attributes["ObjectSize"] = m[7];
  rec.attributes["Referrer"] = m[8].matched ? m[8].str() : "-";
  rec.attributes["Agent"] = m[9].matched ? m[9].str() : "-";
  set_date_time_attrs(rec);
  return true;
}

// "[Sun Feb 27 03:51:22 2005] [error] [client 1.2.3.4] body"
inline bool parse_apache_error_common(const std::string& line,
                                      RawLogRecord& rec, std::string& error,
                                      std::string& body) {
  static const std::regex re(
      R"(^\[\w{3} (\w{3}) +(\d{1,2}) (\d{2}):(\d{2}):(\d{2}) (\d{4})\] \[(\w+)\](?: \[client ([^\]]+)\])? (.*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, re)) {
    error = "does not match Apache error log format";
    return false;
  }
  auto month = month_from_abbrev(m[1].str());
  if (!month) {
    error = "bad month '" + m[1].str() + "'";
    return false;
  }
  CivilTime t;
  t.month = *month;
  t.day = std::stoi(m[2]);
  t.hour = std::stoi(m[3]);
  t.minute = std::stoi(m[4]);
  t.second = std::stoi(m[5]);
  t.year = std::stoi(m[6]);
  rec.timestamp = to_epoch_seconds(t);
  rec.attributes["Type"] = m[7];
  if (m[8].matched) rec.attributes["ClientIP"] = m[8];
  body = m[9];
  set_date_time_attrs(rec);
  return true;
}

inline bool parse_http_error(const std::string& line,
                             const ParseOptions& /*opts*/, RawLogRecord& rec,
                             std::string& error) {
  std::string body;
  if (!parse_apache_error_common(line, rec, error, body)) return false;
  // "reason: detail" splits at the first colon; bare bodies keep the whole
  // text as the message.
  const std::size_t pos = body.find(": ");
  if (pos != std::string::npos) {
    rec.attributes["Reason_Phrase"] = body.substr(0, pos);
    rec.attributes["Message"] = body.substr(pos + 2);
  } else {
    rec.attributes["Reason_Phrase"] = "";
    rec.attributes["Message"] = body;
  }
  return true;
}

inline bool parse_http_ssl_error(const std::string& line,
                                 const ParseOptions& /*opts*/,
                                 RawLogRecord& rec, std::string& error) {
  std::string body;
  if (!parse_apache_error_common(line, rec, error, body)) return false;
  rec.attributes["Message"] = body;
  return true;
}

// "Feb 27 03:51:20 host daemon[123]: body"
inline bool parse_syslog_common(const std::string& line,
                                const ParseOptions& opts, RawLogRecord& rec,
                                std::string& error, std::string& body) {
  static const std::regex re(
      R"(^(\w{3}) +(\d{1,2}) (\d{2}):(\d{2}):(\d{2}) (\S+) ([^:\[\]]+)(?:\[(\d+)\])?: (.*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, re)) {
    error = "does not match syslog format";
    return false;
  }
  auto month = month_from_abbrev(m[1].str());
  if (!month) {
    error = "bad month '" + m[1].str() + "'";
    return false;
  }
  CivilTime t;
  t.year = opts.default_year;
  t.month = *month;
  t.day = std::stoi(m[2]);
  t.hour = std::stoi(m[3]);
  t.minute = std::stoi(m[4]);
  t.second = std::stoi(m[5]);
  rec.timestamp = to_epoch_seconds(t);
  rec.attributes["Logging_device"] = m[6];
  rec.attributes["Logging_Daemon"] = m[7];
  if (m[8].matched) {
    rec.pid = std::stol(m[8]);
    rec.attributes["PID"] = m[8];
  }
  body = m[9];
  set_date_time_attrs(rec);
  return true;
}

inline bool parse_syslog_secure(const std::string& line,
                                const ParseOptions& opts, RawLogRecord& rec,
                                std::string& error) {
  std::string body;
  if (!parse_syslog_common(line, opts, rec, error, body)) return false;
  static const std::regex auth_re(
      R"(^(Accepted|Failed) (\S+) for (?:(?:illegal|invalid) user )?(\S+) from (?:::ffff:)?(\S+)(?: port (\d+))?.*$)");
  static const std::regex illegal_re(
      R"(^Illegal user (\S+) from (?:::ffff:)?(\S+)\s*$)");
  std::smatch m;
  if (std::regex_match(body, m, auth_re)) {
    rec.attributes["Operation"] = m[1].str() + " " + m[2].str();
    rec.attributes["User"] = m[3];
    rec.attributes["Source"] = m[4];
    if (m[5].matched) rec.attributes["Port"] = m[5];
  } else if (std::regex_match(body, m, illegal_re)) {
    rec.attributes["Operation"] = "Illegal user";
    rec.attributes["User"] = m[1];
    rec.attributes["Source"] = m[2];
  } else {
    rec.attributes["Operation"] = body;
  }
  return true;
}

inline bool parse_syslog_messages(const std::string& line,
                                  const ParseOptions& opts, RawLogRecord& rec,
                                  std::string& error) {
  std::string body;
  if (!parse_syslog_common(line, opts, rec, error, body)) return false;
  static const std::regex session_re(
      R"(^(.*session (?:opened|closed) for user) (\S+?)(?: by \(uid=(\d+)\))?\s*$)");
  static const std::regex root_login_re(R"(^ROOT LOGIN ON (\S+)\s*$)");
  std::smatch m;
  if (std::regex_match(body, m, session_re)) {
    rec.attributes["Operation"] = m[1];
    rec.attributes["User"] = m[2];
    if (m[3].matched) rec.attributes["UID"] = m[3];
  } else if (std::regex_match(body, m, root_login_re)) {
    rec.attributes["Operation"] = "ROOT LOGIN";
    rec.attributes["User"] = "root";
    rec.attributes["Tty"] = m[1];
  } else {
    rec.attributes["System_message"] = body;
  }
  return true;
}

inline bool parse_syslog_mail(const std::string& line, const ParseOptions& opts,
                              RawLogRecord& rec, std::string& error) {
  std::string body;
  if (!parse_syslog_common(line, opts, rec, error, body)) return false;
  static const std::regex qid_re(R"(^(\w{14}|\w{8,12}): (.*)$)");
  std::smatch m;
  if (!std::regex_match(body, m, qid_re)) {
    return true;  // daemon status line; keep the record with header attrs only
  }
  rec.attributes["QID"] = m[1];
  static const std::map<std::string, std::string> kKeyMap = {
      {"from", "From"},       {"to", "To"},         {"size", "Size"},
      {"class", "Class"},     {"nrcpts", "nrcpts"}, {"msgid", "Msgid"},
      {"proto", "Protocol"},  {"daemon", "Daemon"}, {"relay", "Relay"},
      {"ruleset", "Ruleset"}, {"arg1", "Arg"},      {"ctladdr", "Ctladdr"},
      {"delay", "Delay"},     {"xdelay", "xDelay"}, {"mailer", "Mailer"},
      {"pri", "Priv"},        {"dsn", "DNS"},       {"stat", "Stat"},
      {"reject", "Reject"}};
  for (const auto& part : split(m[2].str(), ',')) {
    const std::string kv = trim(part);
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = kv.substr(0, eq);
    auto it = kKeyMap.find(key);
    if (it != kKeyMap.end()) rec.attributes[it->second] = kv.substr(eq + 1);
  }
  return true;
}

inline bool parse_snort_alert(const std::string& line, const ParseOptions& opts,
                              RawLogRecord& rec, std::string& error) {
  std::string body;
  if (!parse_syslog_common(line, opts, rec, error, body)) return false;
  static const std::regex alert_re(
      R"(^\[(\d+:\d+:\d+)\] (.*?)(?: \[Classification: ([^\]]+)\])?(?: \[Priority: (\d+)\])?: \{(\w+)\} (\S+?)(?::(\d+))? -> (\S+?)(?::(\d+))?\s*$)");
  std::smatch m;
  if (!std::regex_match(body, m, alert_re)) {
    rec.attributes["Rule"] = body;
    return true;
  }
  rec.attributes["RuleNumber"] = m[1];
  rec.attributes["Rule"] = m[2];
  if (m[3].matched) rec.attributes["Classification"] = m[3];
  if (m[4].matched) rec.attributes["Priority"] = m[4];
  rec.attributes["Protocol"] = m[5];
  rec.attributes["SrcIP"] = m[6];
  if (m[7].matched) rec.attributes["SrcPort"] = m[7];
  rec.attributes["DstIP"] = m[8];
  if (m[9].matched) rec.attributes["DstPort"] = m[9];
  return true;
}

}  // namespace detail

class PatternRegistry {
 public:
  static PatternRegistry with_builtins() {
    PatternRegistry reg;
    reg.add("http_access", detail::parse_http_access);
    reg.add("http_error", detail::parse_http_error);
    reg.add("http_ssl_error", detail::parse_http_ssl_error);
    reg.add("syslog_messages", detail::parse_syslog_messages);
    reg.add("syslog_secure", detail::parse_syslog_secure);
    reg.add("syslog_mail", detail::parse_syslog_mail);
    reg.add("snort_alert", detail::parse_snort_alert);
    return reg;
  }

  void add(const std::string& log_type, LineParser parser) {
    parsers_[log_type] = std::move(parser);
  }

  // User-supplied pattern: a regex whose capture groups are bound to `fields`
  // in order. A field named "Timestamp" (required) must hold
  // "YYYY-MM-DD HH:MM:SS"; a field named "PID" is parsed as an integer.
  void add_regex_pattern(const std::string& log_type, const std::string& regex,
                         std::vector<std::string> fields) {
    bool has_ts = false;
    for (const auto& f : fields) has_ts |= (f == "Timestamp");
    if (!has_ts) {
      throw InputError("pattern for '" + log_type +
                       "' has no Timestamp field");
    }
    auto re = std::make_shared<std::regex>(regex);
    auto names = std::make_shared<std::vector<std::string>>(std::move(fields));
    add(log_type, [re, names](const std::string& line,
                              const ParseOptions& /*opts*/, RawLogRecord& rec,
                              std::string& error) {
      std::smatch m;
      if (!std::regex_match(line, m, *re)) {
        error = "does not match user pattern";
        return false;
      }
      if (m.size() - 1 < names->size()) {
        error = "pattern has fewer groups than fields";
        return false;
      }
      bool ts_ok = false;
      for (std::size_t i = 0; i < names->size(); ++i) {
        const std::string value = m[i + 1].matched ? m[i + 1].str() : "";
        const std::string& name = (*names)[i];
        if (name == "Timestamp") {
          auto ts = parse_datetime(value);
          if (!ts) {
            error = "bad timestamp '" + value + "'";
            return false;
          }
          rec.timestamp = *ts;
          ts_ok = true;
        } else if (name == "PID") {
          if (!value.empty()) {
            rec.pid = std::stol(value);
            rec.attributes["PID"] = value;
          }
        } else {
          rec.attributes[name] = value;
        }
      }
      if (ts_ok) detail::set_date_time_attrs(rec);
      return ts_ok;
    });
  }

  const LineParser* find(const std::string& log_type) const {
    auto it = parsers_.find(log_type);
    return it == parsers_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, LineParser> parsers_;
};

inline ParseResult parse_log(const std::string& path,
                             const std::string& log_type,
                             const Schema& /*schema*/,
                             const PatternRegistry& registry,
                             const ParseOptions& opts = {}) {
  const LineParser* parser = registry.find(log_type);
  if (!parser) throw InputError("no line pattern for log type '" + log_type +
                                "'");
  std::ifstream is(path);
  if (!is) throw InputError("cannot read log file: " + path);

  ParseResult result;
  std::string line;
  int index = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      result.rejects.push_back({path, index, log_type, "empty line"});
      ++index;
      continue;
    }
    RawLogRecord rec;
    // Basename only: (source_file, original_index) keys survive moving the
    // corpus, and downstream artifacts stay free of machine-local paths.
    rec.source_file = std::filesystem::path(path).filename().string();
    rec.original_index = index;
    rec.log_type = log_type;
    std::string error;
    if ((*parser)(line, opts, rec, error)) {
      result.records.push_back(std::move(rec));
    } else {
      result.rejects.push_back(
          {path, index, log_type, error + " | line: " + line});
    }
    ++index;
  }
  return result;
}

// --- parsed-record interchange (CSV, RFC-4180) -------------------------------

inline std::vector<std::string> record_csv_header(const Schema& schema) {
  std::vector<std::string> header = {"source_file", "original_index",
                                     "timestamp", "pid", "log_type"};
  for (const auto& a : schema) header.push_back(a.name);
  return header;
}

inline void write_records_csv(std::ostream& os,
                              const std::vector<RawLogRecord>& records,
                              const Schema& schema) {
  csv::write_row(os, record_csv_header(schema));
  for (const auto& r : records) {
    std::vector<std::string> row = {
        r.source_file, std::to_string(r.original_index),
        format_datetime(r.timestamp),
        r.pid ? std::to_string(*r.pid) : std::string(), r.log_type};
    for (const auto& a : schema) {
      auto it = r.attributes.find(a.name);
      row.push_back(it == r.attributes.end() ? std::string() : it->second);
    }
    csv::write_row(os, row);
  }
}

inline std::vector<RawLogRecord> read_records_csv(const std::string& path,
                                                  const Schema& schema) {
  auto rows = csv::read_file(path);
  if (rows.empty()) throw InputError("records CSV is empty: " + path);
  const auto expected = record_csv_header(schema);
  if (rows[0] != expected) {
    throw InputError("records CSV header does not match schema: " + path);
  }
  std::vector<RawLogRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != expected.size()) {
      throw InputError("records CSV row " + std::to_string(i) +
                       " has wrong arity: " + path);
    }
    RawLogRecord r;
    r.source_file = row[0];
    r.original_index = std::stoi(row[1]);
    auto ts = parse_datetime(row[2]);
    if (!ts) throw InputError("bad timestamp in records CSV: " + row[2]);
    r.timestamp = *ts;
    if (!row[3].empty()) r.pid = std::stol(row[3]);
    r.log_type = row[4];
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (!row[5 + j].empty()) r.attributes[schema[j].name] = row[5 + j];
    }
    records.push_back(std::move(r));
  }
  return records;
}

// Reject file: the record columns plus an `error` column.
inline void write_rejects_csv(std::ostream& os,
                              const std::vector<RejectedLine>& rejects,
                              const Schema& schema) {
  auto header = record_csv_header(schema);
  header.push_back("error");
  csv::write_row(os, header);
  for (const auto& rej : rejects) {
    std::vector<std::string> row = {rej.source_file,
                                    std::to_string(rej.original_index), "", "",
                                    rej.log_type};
    row.resize(header.size() - 1);
    row.push_back(rej.error);
    csv::write_row(os, row);
  }
}

}  // namespace fedpat
