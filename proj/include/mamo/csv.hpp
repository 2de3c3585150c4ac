#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mamo/error.hpp"

namespace mamo {

// Minimal RFC-4180-style CSV: fields containing the delimiter, quotes or
// newlines are quoted; embedded quotes are doubled.

inline std::string csv_escape(const std::string& field, char delim = ',') {
  bool needs_quote = false;
  for (char c : field) {
    if (c == delim || c == '"' || c == '\n' || c == '\r') {
      needs_quote = true;
      break;
    }
  }
  if (!needs_quote) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_join(const std::vector<std::string>& fields, char delim = ',') {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += delim;
    line += csv_escape(fields[i], delim);
  }
  return line;
}

inline std::vector<std::string> csv_split(const std::string& line, char delim = ',') {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      in_quotes = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path, char delim = ',') {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv_split(line, delim);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows, char delim = ',') {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << csv_join(header, delim) << '\n';
  for (const auto& row : rows) out << csv_join(row, delim) << '\n';
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace mamo
