#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbetd {

/// CSV with a fixed header and %.17g number formatting, so reruns of a
/// deterministic pipeline produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
    for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  static std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
  }
  static std::string fmt(long x) { return std::to_string(x); }
  static std::string fmt(int x) { return std::to_string(x); }
  static std::string fmt(std::uint64_t x) { return std::to_string(x); }
  static const std::string& fmt(const std::string& s) { return s; }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? (first = false, "") : ",") << fmt(cells)), ...);
    out_ << "\n";
  }

  void raw_row(const std::string& line) { out_ << line << "\n"; }

 private:
  std::ofstream out_;
};

}  // namespace gbetd
