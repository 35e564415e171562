#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hris/error.hpp"

namespace hris {

/// Plain comma-separated table: header row, no quoting (fields never contain commas).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  int require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw InputError("csv: missing column '" + name + "'");
    return c;
  }

  double number(std::size_t row, int col) const {
    const std::string& s = rows.at(row).at(static_cast<std::size_t>(col));
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw InputError("csv: non-numeric field '" + s + "'");
    return v;
  }
};

/// Shortest text that reads back to the same double; non-finite as nan / inf / -inf.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw InputError("'" + path + "': row with " + std::to_string(row.size()) +
                       " fields under a " + std::to_string(t.header.size()) + "-column header");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Streams rows to a file; the header is written on open.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, bool append = false)
      : columns_(header.size()) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw InputError("cannot write '" + path + "'");
    if (!append) write_fields(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw InputError("csv: row width does not match header");
    write_fields(fields);
  }

 private:
  void write_fields(const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) out_ << (i ? "," : "") << f[i];
    out_ << '\n';
    out_.flush();
  }

  std::size_t columns_;
  std::ofstream out_;
};

}  // namespace hris
