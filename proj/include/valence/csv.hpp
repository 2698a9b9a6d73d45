#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace valence::csv {

/// Streaming reader for the comma-separated files this project exchanges.
/// No quoting or escaping: identifiers are plain tokens and numbers use the
/// decimal point. Errors carry file, line and column context.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  /// Reads the next row into fields; returns false at end of file.
  bool next(std::vector<std::string>& fields);

  /// Reads the header row and verifies it equals `expected` exactly.
  void expect_header(const std::vector<std::string>& expected);

  std::size_t line() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

  [[noreturn]] void fail(std::size_t column, const std::string& message) const;

  double parse_double(const std::string& field, std::size_t column) const;
  long parse_int(const std::string& field, std::size_t column) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

/// Row-by-row writer. Doubles are rendered with the shortest representation
/// that round-trips exactly, so written corpora reload bit-identically.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void row(const std::vector<std::string>& fields);

  static std::string field(double v);
  static std::string field(const std::string& s) { return s; }
  static std::string field(long v) { return std::to_string(v); }
  static std::string field(std::size_t v) { return std::to_string(v); }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

std::string format_double(double v);

}  // namespace valence::csv
