#include "valence/csv.hpp"

#include <charconv>
#include <system_error>

#include "valence/errors.hpp"

namespace valence::csv {

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) {
    throw DataError("cannot open '" + path.string() + "'");
  }
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return true;
}

void Reader::expect_header(const std::vector<std::string>& expected) {
  std::vector<std::string> fields;
  if (!next(fields)) fail(1, "missing header row");
  if (fields != expected) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) want += ',';
      want += expected[i];
    }
    fail(1, "unexpected header, want '" + want + "'");
  }
}

void Reader::fail(std::size_t column, const std::string& message) const {
  throw DataError(path_.string() + ":" + std::to_string(line_) + ":" +
                  std::to_string(column) + ": " + message);
}

double Reader::parse_double(const std::string& field,
                            std::size_t column) const {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    fail(column, "expected a number, got '" + field + "'");
  }
  return v;
}

long Reader::parse_int(const std::string& field, std::size_t column) const {
  long v = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    fail(column, "expected an integer, got '" + field + "'");
  }
  return v;
}

Writer::Writer(const std::filesystem::path& path) : out_(path), path_(path) {
  if (!out_) {
    throw DataError("cannot write '" + path.string() + "'");
  }
}

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << fields[i];
  }
  out_ << '\n';
  if (!out_) {
    throw DataError("write failed for '" + path_.string() + "'");
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string Writer::field(double v) { return format_double(v); }

}  // namespace valence::csv
