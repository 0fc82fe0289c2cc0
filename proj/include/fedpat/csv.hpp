#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fedpat/common.hpp"

namespace fedpat::csv {

// RFC-4180: fields containing separator, quote, CR or LF are quoted and
// embedded quotes doubled.

inline std::string escape(std::string_view field) {
  const bool needs_quote =
      field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quote) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& os, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << escape(row[i]);
  }
  os << "\r\n";
}

// Reads one record, which may span physical lines when quoted fields contain
// newlines. Returns false at end of input.
inline bool read_row(std::istream& is, std::vector<std::string>& row) {
  row.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int c;
  while ((c = is.get()) != EOF) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (is.peek() == '"') {
          field.push_back('"');
          is.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (is.peek() == '\n') is.get();
      row.push_back(std::move(field));
      return true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      return true;
    } else {
      field.push_back(static_cast<char>(c));
    }
  }
  if (!any) return false;
  row.push_back(std::move(field));
  return true;
}

inline std::vector<std::vector<std::string>> read_file(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open CSV file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  while (read_row(is, row)) rows.push_back(row);
  return rows;
}

}  // namespace fedpat::csv
