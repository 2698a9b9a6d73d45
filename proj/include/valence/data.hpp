#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace valence::data {

/// Width of the common time grid all modalities are resampled onto.
constexpr double kWindowSeconds = 0.5;

enum class Modality : std::uint8_t { kAudio = 0, kText = 1, kVisual = 2 };
constexpr std::array<Modality, 3> kAllModalities{
    Modality::kAudio, Modality::kText, Modality::kVisual};

std::string to_string(Modality m);
char letter(Modality m);  // 'A', 'T', 'V'
std::optional<Modality> modality_from_letter(char c);
std::size_t default_dim(Modality m);  // 88, 300, 20

/// Parses a combination string like "AT" or "ATV" into canonically ordered
/// modalities. Throws UsageError on unknown letters or duplicates.
std::vector<Modality> parse_modalities(const std::string& s);
std::string modalities_to_string(std::span<const Modality> mods);

enum class Partition : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };
std::string to_string(Partition p);
std::optional<Partition> partition_from_string(const std::string& s);

/// One modality's frames at its native rate. Frame i starts at
/// i * frame_period_s; rows are dense and uniformly spaced.
struct ModalitySeries {
  Modality modality = Modality::kAudio;
  double frame_period_s = 0.0;
  std::size_t dim = 0;
  std::vector<double> frames;  // frame_count x dim, row-major

  std::size_t frame_count() const { return dim ? frames.size() / dim : 0; }
  std::span<const double> frame(std::size_t i) const {
    return {frames.data() + i * dim, dim};
  }
};

void validate(const ModalitySeries& s);

/// A modality resampled onto the 0.5 s grid, with per-window observed flags.
struct ResampledBlock {
  Modality modality = Modality::kAudio;
  std::size_t windows = 0;
  std::size_t dim = 0;
  std::vector<double> features;       // windows x dim
  std::vector<std::uint8_t> observed;  // windows
};

/// Concatenated per-window features for a fixed, canonically ordered set of
/// modalities, plus an observation mask per (window, modality).
struct FusedSequence {
  std::vector<Modality> modalities;
  std::vector<std::size_t> dims;
  std::size_t windows = 0;
  std::vector<double> features;     // windows x feature_dim
  std::vector<std::uint8_t> mask;   // windows x modalities

  std::size_t feature_dim() const;
  std::size_t block_offset(std::size_t m) const;
  bool observed(std::size_t t, std::size_t m) const {
    return mask[t * modalities.size() + m] != 0;
  }
  std::span<const double> window(std::size_t t) const {
    return {features.data() + t * feature_dim(), feature_dim()};
  }
  std::span<const double> block(std::size_t t, std::size_t m) const {
    return {features.data() + t * feature_dim() + block_offset(m), dims[m]};
  }
};

struct VideoRecord {
  std::string video_id;
  std::string target_id;
  Partition partition = Partition::kTrain;
  double duration_s = 0.0;
  std::string gender;
  std::vector<ModalitySeries> modalities;
  std::vector<double> gold;     // EWE track on the window grid; empty if absent
  std::vector<double> gold_sd;  // across-observer dispersion, same length

  std::size_t window_count() const;
  const ModalitySeries* series(Modality m) const;
};

struct Corpus {
  std::vector<VideoRecord> train, val, test;
  std::vector<Modality> available_modalities;

  std::vector<const VideoRecord*> all() const;
  const std::vector<VideoRecord>& partition(Partition p) const;
  std::size_t video_count() const {
    return train.size() + val.size() + test.size();
  }
};

/// Read-only handles for model training. Deliberately omits the Test
/// partition so no training code path can reach held-out gold.
struct TrainView {
  std::span<const VideoRecord> train;
  std::span<const VideoRecord> val;
};

TrainView training_view(const Corpus& corpus);

/// Number of 0.5 s windows covering a duration.
std::size_t windows_for_duration(double duration_s);

/// Resamples one modality onto the common grid. Frames shorter than the
/// window are averaged by start-timestamp bucket; frames at or above the
/// window length are held across every window they cover. Windows no frame
/// covers are zero-filled and flagged unobserved. With target_windows == 0
/// the window count is derived from the series extent.
ResampledBlock resample_to_windows(const ModalitySeries& series,
                                   double window_s = kWindowSeconds,
                                   std::size_t target_windows = 0);

/// Horizontal concatenation in canonical modality order. Blocks shorter than
/// the longest are padded with unobserved zero windows.
FusedSequence fuse(std::vector<ResampledBlock> blocks);

/// Resample + fuse the selected modalities of one record. Modalities the
/// record lacks become all-unobserved zero blocks of the given dimension.
FusedSequence fused_features(const VideoRecord& record,
                             std::span<const Modality> selected,
                             const std::map<Modality, std::size_t>& dims);

/// Parses manifest.csv alone: records with no features or gold attached,
/// ordered by video_id inside each partition.
Corpus load_manifest(const std::filesystem::path& manifest_path);

/// Loads manifest.csv and the sibling feature/gold files next to it.
/// Records are ordered by video_id inside each partition.
Corpus load_corpus(const std::filesystem::path& manifest_path);

struct PartitionStats {
  std::size_t videos = 0;
  std::size_t targets = 0;
  double total_duration_s = 0.0;
  double mean_duration_s = 0.0;
  std::size_t female = 0;
  std::size_t male = 0;
  // Positive / Mixed / Negative video counts; present only with gold tracks.
  std::array<std::size_t, 3> classes{0, 0, 0};
  bool has_classes = false;
};

struct PartitionReport {
  std::array<PartitionStats, 3> per_partition;
  std::size_t total_videos = 0;
  /// target_id -> partitions it appears in; only targets spanning more than
  /// one partition are listed. Empty means the split is target-disjoint.
  std::map<std::string, std::vector<Partition>> violations;
  bool disjoint() const { return violations.empty(); }
  std::array<double, 3> video_fractions() const;
};

PartitionReport check_partitions(const Corpus& corpus);
std::string render(const PartitionReport& report);

}  // namespace valence::data
