#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fedpat/common.hpp"

namespace fedpat {

enum class AttrKind { Nominal, Ordinal, Text, Ip };

inline const char* to_string(AttrKind k) {
  switch (k) {
    case AttrKind::Nominal: return "nominal";
    case AttrKind::Ordinal: return "ordinal";
    case AttrKind::Text: return "text";
    case AttrKind::Ip: return "ip";
  }
  return "?";
}

// The ten analyst-view fields. Date, Time and Label are filled from the
// record itself, so attribute mappings may target only the remaining seven.
inline constexpr std::array<std::string_view, 10> kPresentationFields = {
    "Date", "Time",   "Medium", "Message", "Message2",
    "SrcIP", "DestIP", "User",   "Target",  "Label"};

inline bool is_presentation_field(std::string_view name) {
  for (auto f : kPresentationFields) {
    if (f == name) return true;
  }
  return false;
}

inline bool is_reserved_presentation_field(std::string_view name) {
  return name == "Date" || name == "Time" || name == "Label";
}

struct AttributeSchema {
  std::string name;
  AttrKind kind = AttrKind::Nominal;
  bool phase1_selected = false;
  std::optional<std::string> presentation_target;
};

using Schema = std::vector<AttributeSchema>;

// One attribute per line: `prefix+name [phase1] [->PresentationField]`.
// Prefixes: "@" text, "~" ordinal, "$" IP, none nominal. Blank lines and
// lines starting with '#' are skipped.
inline std::optional<AttributeSchema> parse_schema_line(
    std::string_view raw_line) {
  const std::string line = trim(raw_line);
  if (line.empty() || line[0] == '#') return std::nullopt;

  AttributeSchema attr;
  std::string_view rest = line;
  switch (rest[0]) {
    case '@': attr.kind = AttrKind::Text; rest.remove_prefix(1); break;
    case '~': attr.kind = AttrKind::Ordinal; rest.remove_prefix(1); break;
    case '$': attr.kind = AttrKind::Ip; rest.remove_prefix(1); break;
    default: attr.kind = AttrKind::Nominal; break;
  }

  std::vector<std::string> tokens;
  for (auto& t : split(rest, ' ')) {
    if (!trim(t).empty()) tokens.push_back(trim(t));
  }
  if (tokens.empty()) throw InputError("schema line has no attribute name: " +
                                       std::string(raw_line));
  attr.name = tokens[0];

  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (tok == "phase1") {
      attr.phase1_selected = true;
    } else if (tok.rfind("->", 0) == 0) {
      const std::string target = tok.substr(2);
      if (!is_presentation_field(target)) {
        throw InputError("schema: '" + target +
                         "' is not a presentation field");
      }
      if (is_reserved_presentation_field(target)) {
        throw InputError("schema: presentation field '" + target +
                         "' is filled automatically and cannot be mapped");
      }
      attr.presentation_target = target;
    } else {
      throw InputError("schema: unknown flag '" + tok + "' in line: " +
                       std::string(raw_line));
    }
  }
  return attr;
}

inline Schema load_schema(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open schema file: " + path);
  Schema schema;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(is, line)) {
    auto attr = parse_schema_line(line);
    if (!attr) continue;
    if (!seen.insert(attr->name).second) {
      throw InputError("schema: duplicate attribute name '" + attr->name +
                       "' in " + path);
    }
    schema.push_back(std::move(*attr));
  }
  return schema;
}

inline const AttributeSchema* find_attribute(const Schema& schema,
                                             std::string_view name) {
  for (const auto& a : schema) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

}  // namespace fedpat
