#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedpat/csv.hpp"
#include "fedpat/log_parse.hpp"
#include "fedpat/matrix.hpp"
#include "fedpat/schema.hpp"

namespace fedpat {

// Normalized text form: lowercase; maximal runs of hex characters become
// <NUM> when all digits, <HEX> when a digit/letter mix of length >= 4;
// whitespace runs collapse to single spaces. Variable fragments (counts,
// ids, hashes) then share one token, so repeated message shapes coincide.
inline std::string normalize_text(const std::string& raw) {
  std::string lowered = to_lower(raw);
  std::string out;
  out.reserve(lowered.size());
  auto is_hex = [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  };
  std::size_t i = 0;
  while (i < lowered.size()) {
    if (!is_hex(lowered[i])) {
      out.push_back(lowered[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    bool has_digit = false, has_alpha = false;
    while (j < lowered.size() && is_hex(lowered[j])) {
      has_digit |= (lowered[j] >= '0' && lowered[j] <= '9');
      has_alpha |= (lowered[j] >= 'a' && lowered[j] <= 'f');
      ++j;
    }
    const std::size_t len = j - i;
    if (has_digit && !has_alpha) {
      out += "<NUM>";
    } else if (has_digit && has_alpha && len >= 4) {
      out += "<HEX>";
    } else {
      out.append(lowered, i, len);
    }
    i = j;
  }
  // Collapse whitespace runs and trim.
  std::string collapsed;
  collapsed.reserve(out.size());
  bool in_space = true;  // leading spaces dropped
  for (char c : out) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (!in_space) collapsed.push_back(' ');
      in_space = true;
    } else {
      collapsed.push_back(c);
      in_space = false;
    }
  }
  while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  return collapsed;
}

struct ColumnMeta {
  std::string attribute;  // source attribute name
  AttrKind kind = AttrKind::Nominal;
  std::string value;  // one-hot columns: the category this column indicates
  // Ordinal: rank order; text/ip: code -> value table.
  std::vector<std::string> dictionary;
  double min = 0.0;  // column range before scaling to [0, 1]
  double max = 0.0;
};

inline std::string column_name(const ColumnMeta& c) {
  return c.kind == AttrKind::Nominal ? c.attribute + "=" + c.value
                                     : c.attribute;
}

struct FeatureMatrix {
  Matrix data;
  std::vector<ColumnMeta> columns;
};

namespace detail {

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return std::nullopt;
  return v;
}

// Distinct values in canonical order: numeric when every value parses as a
// number, lexicographic otherwise. Canonical order (rather than order of
// first appearance) keeps codes independent of record order.
inline std::vector<std::string> canonical_values(std::set<std::string> distinct) {
  std::vector<std::string> values(distinct.begin(), distinct.end());
  bool all_numeric = !values.empty();
  for (const auto& v : values) {
    if (!parse_number(v)) {
      all_numeric = false;
      break;
    }
  }
  if (all_numeric) {
    std::stable_sort(values.begin(), values.end(),
                     [](const std::string& a, const std::string& b) {
                       double na = *parse_number(a), nb = *parse_number(b);
                       if (na != nb) return na < nb;
                       return a < b;
                     });
  }
  return values;
}

}  // namespace detail

// Encodes the schema attributes flagged for clustering (all attributes when
// none is flagged) into a numeric matrix, one row per record, then scales
// every column to [0, 1] (constant columns become all zeros).
inline FeatureMatrix encode(const std::vector<RawLogRecord>& records,
                            const Schema& schema) {
  std::vector<const AttributeSchema*> selected;
  for (const auto& a : schema) {
    if (a.phase1_selected) selected.push_back(&a);
  }
  if (selected.empty()) {
    for (const auto& a : schema) selected.push_back(&a);
  }

  auto value_of = [](const RawLogRecord& r, const std::string& name) {
    auto it = r.attributes.find(name);
    return it == r.attributes.end() ? std::string() : it->second;
  };

  FeatureMatrix fm;
  std::vector<std::vector<double>> cols;  // column-major build
  for (const AttributeSchema* attr : selected) {
    std::vector<std::string> raw(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      raw[i] = value_of(records[i], attr->name);
      if (attr->kind == AttrKind::Text) raw[i] = normalize_text(raw[i]);
    }
    std::set<std::string> distinct(raw.begin(), raw.end());

    if (attr->kind == AttrKind::Nominal) {
      std::vector<std::string> cats(distinct.begin(), distinct.end());
      for (const auto& cat : cats) {
        ColumnMeta meta;
        meta.attribute = attr->name;
        meta.kind = attr->kind;
        meta.value = cat;
        std::vector<double> col(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
          col[i] = (raw[i] == cat) ? 1.0 : 0.0;
        }
        fm.columns.push_back(std::move(meta));
        cols.push_back(std::move(col));
      }
      continue;
    }

    // Ordinal / text / ip: one column of codes into a canonical table.
    ColumnMeta meta;
    meta.attribute = attr->name;
    meta.kind = attr->kind;
    meta.dictionary = detail::canonical_values(std::move(distinct));
    std::map<std::string, double> code;
    for (std::size_t c = 0; c < meta.dictionary.size(); ++c) {
      code[meta.dictionary[c]] = static_cast<double>(c);
    }
    std::vector<double> col(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) col[i] = code[raw[i]];
    fm.columns.push_back(std::move(meta));
    cols.push_back(std::move(col));
  }

  fm.data = Matrix(records.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    double lo = 0.0, hi = 0.0;
    if (!records.empty()) {
      lo = *std::min_element(cols[j].begin(), cols[j].end());
      hi = *std::max_element(cols[j].begin(), cols[j].end());
    }
    fm.columns[j].min = lo;
    fm.columns[j].max = hi;
    for (std::size_t i = 0; i < records.size(); ++i) {
      fm.data(i, j) = (hi > lo) ? (cols[j][i] - lo) / (hi - lo) : 0.0;
    }
  }
  return fm;
}

// Stable digest of the column layout (names, kinds, tables, ranges), so a
// run manifest can certify that two feature matrices are comparable.
inline std::string columns_digest(const std::vector<ColumnMeta>& columns) {
  std::uint64_t h = 1469598103934665603ull;
  char buf[64];
  for (const auto& c : columns) {
    h = fnv1a64(c.attribute, h);
    h = fnv1a64(to_string(c.kind), h);
    h = fnv1a64(c.value, h);
    for (const auto& d : c.dictionary) h = fnv1a64(d, h);
    std::snprintf(buf, sizeof(buf), "%a|%a", c.min, c.max);
    h = fnv1a64(buf, h);
  }
  return hex64(h);
}

inline void write_features_csv(std::ostream& os, const FeatureMatrix& fm) {
  std::vector<std::string> header;
  for (const auto& c : fm.columns) header.push_back(column_name(c));
  csv::write_row(os, header);
  char buf[64];
  for (std::size_t i = 0; i < fm.data.rows(); ++i) {
    std::vector<std::string> row;
    for (std::size_t j = 0; j < fm.data.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", fm.data(i, j));
      row.emplace_back(buf);
    }
    csv::write_row(os, row);
  }
}

}  // namespace fedpat
