#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace valence::cli {

/// Flat key=value settings with '#' comments. Flags override file values,
/// file values override defaults.
class KeyValues {
 public:
  static KeyValues from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Copies every entry of `overrides` over this one.
  void merge(const KeyValues& overrides);
  bool contains(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

/// Stable hex digest over the semantic run settings (model, modalities,
/// seed, hyperparameters). Output paths never participate.
std::string fingerprint(const std::string& model, const std::string& modalities,
                        std::uint64_t seed, const KeyValues& hyper);

}  // namespace valence::cli
