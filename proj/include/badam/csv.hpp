#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "badam/errors.hpp"

namespace badam {

/// Shortest decimal representation that round-trips; locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

/// Comma-separated, LF-terminated output with a fixed header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : out_(path, std::ios::binary), width_(header.size()) {
    if (!out_) throw FormatError("cannot write " + path.string());
    write_row(header);
  }

  void write_row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw ShapeError("CsvWriter: row width differs from header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t width_;
};

}  // namespace badam
