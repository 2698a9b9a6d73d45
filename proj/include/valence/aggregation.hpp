#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace valence::agg {

/// One observer's time-continuous valence samples for one video, on the
/// 0.5 s grid, together with the attention-check outcome.
struct RatingTrack {
  std::string observer_id;
  std::string video_id;
  std::vector<double> samples;  // in [-1, 1]
  int checks_correct = 0;       // 0..2
  bool made_changes = false;
};

/// Correlation-weighted consensus track for one video.
struct GoldStandard {
  std::string video_id;
  std::vector<double> ewe;
  std::vector<double> sd;  // across-observer sample standard deviation
  std::map<std::string, double> weights;
};

enum class ValenceClass : std::uint8_t { kPositive = 0, kMixed = 1, kNegative = 2 };
std::string to_string(ValenceClass c);

struct Exclusion {
  std::string observer_id;
  std::string video_id;
  std::string reason;  // "attention" or "flat rating"
};

struct FilterResult {
  std::vector<RatingTrack> kept;
  std::vector<Exclusion> excluded;
};

/// Keeps a track only when both attention checks passed and the observer
/// moved the rating at least once.
FilterResult filter_observers(std::vector<RatingTrack> tracks);

/// Weights each track by its correlation with the unweighted mean track;
/// negative or undefined weights clamp to zero. A single track is returned
/// as-is with weight one; if every weight clamps, the unweighted mean is the
/// fallback.
GoldStandard ewe(std::span<const RatingTrack> tracks);

struct HumanBenchmark {
  /// video_id -> mean over observers of CCC(observer, EWE minus observer).
  std::map<std::string, double> per_video;
  /// Videos with fewer than three kept tracks, skipped from the benchmark.
  std::vector<std::string> skipped;
};

HumanBenchmark leave_one_out_benchmark(
    const std::map<std::string, std::vector<RatingTrack>>& tracks_by_video);

/// Mean EWE above 0.2 is Positive, below -0.2 Negative, otherwise Mixed.
ValenceClass classify_video(std::span<const double> ewe_track);

/// ratings.csv I/O (schema: video_id,observer_id,t_s,rating,checks_correct,
/// made_changes) and the gold/exclusion outputs of the aggregation pipeline.
std::map<std::string, std::vector<RatingTrack>> load_ratings(
    const std::filesystem::path& path);
void write_gold_csv(const std::filesystem::path& path,
                    std::span<const GoldStandard> gold);
void write_exclusions_csv(const std::filesystem::path& path,
                          std::span<const Exclusion> exclusions);

}  // namespace valence::agg
