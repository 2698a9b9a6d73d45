#include "valence/config.hpp"

#include <charconv>
#include <fstream>

#include "valence/errors.hpp"

namespace valence::cli {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected key = value");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": empty key");
    }
    out.kv_[key] = value;
  }
  return out;
}

void KeyValues::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

void KeyValues::merge(const KeyValues& overrides) {
  for (const auto& [k, v] : overrides.kv_) kv_[k] = v;
}

bool KeyValues::contains(const std::string& key) const {
  return kv_.count(key) != 0;
}

std::string KeyValues::get(const std::string& key,
                           const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  double v = 0.0;
  const char* begin = it->second.data();
  const char* end = begin + it->second.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("config key '" + key + "': expected a number, got '" +
                     it->second + "'");
  }
  return v;
}

std::size_t KeyValues::get_size(const std::string& key,
                                std::size_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::size_t v = 0;
  const char* begin = it->second.data();
  const char* end = begin + it->second.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("config key '" + key +
                     "': expected a nonnegative integer, got '" + it->second +
                     "'");
  }
  return v;
}

std::string fingerprint(const std::string& model,
                        const std::string& modalities, std::uint64_t seed,
                        const KeyValues& hyper) {
  std::string canon = "model=" + model + "\nmodalities=" + modalities +
                      "\nseed=" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : hyper.entries()) {
    canon += k + "=" + v + "\n";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace valence::cli
