#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "etcsim/errors.hpp"

namespace etcsim::harness {

/// 17 significant digits, '.' decimal separator: parses back to the same
/// double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal CSV writer: header row, LF line endings, fields quoted only when
/// they contain a separator, quote or newline.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot write '" + path.string() + "'");
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(fields[i]);
    }
    out_ << '\n';
  }

 private:
  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  std::ofstream out_;
};

/// Ordered "key = value" report.
class KeyValueReport {
 public:
  void add(const std::string& key, double v) { lines_.emplace_back(key, fmt17(v)); }
  void add(const std::string& key, const std::string& v) { lines_.emplace_back(key, v); }
  void add(const std::string& key, std::size_t v) { lines_.emplace_back(key, std::to_string(v)); }

  const std::vector<std::pair<std::string, std::string>>& lines() const { return lines_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& [k, v] : lines_) out << k << " = " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

}  // namespace etcsim::harness
