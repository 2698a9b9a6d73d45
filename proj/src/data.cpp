#include "valence/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "valence/aggregation.hpp"
#include "valence/csv.hpp"
#include "valence/errors.hpp"

namespace valence::data {

namespace {

// Nudge for boundary timestamps that landed an ulp below a window edge.
constexpr double kGridEps = 1e-9;

long window_of(double t, double window_s) {
  return static_cast<long>(std::floor((t + kGridEps) / window_s));
}

long ceil_windows(double t, double window_s) {
  return static_cast<long>(std::ceil(t / window_s - kGridEps));
}

}  // namespace

std::string to_string(Modality m) {
  switch (m) {
    case Modality::kAudio: return "audio";
    case Modality::kText: return "text";
    case Modality::kVisual: return "visual";
  }
  return "?";
}

char letter(Modality m) {
  switch (m) {
    case Modality::kAudio: return 'A';
    case Modality::kText: return 'T';
    case Modality::kVisual: return 'V';
  }
  return '?';
}

std::optional<Modality> modality_from_letter(char c) {
  switch (c) {
    case 'A': return Modality::kAudio;
    case 'T': return Modality::kText;
    case 'V': return Modality::kVisual;
    default: return std::nullopt;
  }
}

std::size_t default_dim(Modality m) {
  switch (m) {
    case Modality::kAudio: return 88;
    case Modality::kText: return 300;
    case Modality::kVisual: return 20;
  }
  return 0;
}

std::vector<Modality> parse_modalities(const std::string& s) {
  if (s.empty()) throw UsageError("modality combination must be non-empty");
  std::set<Modality> seen;
  for (char c : s) {
    auto m = modality_from_letter(c);
    if (!m) {
      throw UsageError("unknown modality letter '" + std::string(1, c) +
                       "' in '" + s + "' (use A, T, V)");
    }
    if (!seen.insert(*m).second) {
      throw UsageError("duplicate modality letter in '" + s + "'");
    }
  }
  std::vector<Modality> out(seen.begin(), seen.end());
  return out;  // std::set orders by enum value = canonical A,T,V
}

std::string modalities_to_string(std::span<const Modality> mods) {
  std::string s;
  for (Modality m : mods) s += letter(m);
  return s;
}

std::string to_string(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTest: return "test";
  }
  return "?";
}

std::optional<Partition> partition_from_string(const std::string& s) {
  if (s == "train" || s == "Train") return Partition::kTrain;
  if (s == "val" || s == "Val" || s == "validation") return Partition::kVal;
  if (s == "test" || s == "Test") return Partition::kTest;
  return std::nullopt;
}

void validate(const ModalitySeries& s) {
  if (s.frame_period_s <= 0.0) {
    throw ContractError("modality series: frame period must be positive");
  }
  if (s.dim == 0 || s.frames.empty() || s.frames.size() % s.dim != 0) {
    throw ContractError("modality series: empty or ragged frame matrix");
  }
  for (double v : s.frames) {
    if (!std::isfinite(v)) {
      throw ContractError("modality series: non-finite frame value");
    }
  }
}

std::size_t FusedSequence::feature_dim() const {
  std::size_t total = 0;
  for (std::size_t d : dims) total += d;
  return total;
}

std::size_t FusedSequence::block_offset(std::size_t m) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < m; ++i) off += dims[i];
  return off;
}

std::size_t windows_for_duration(double duration_s) {
  if (duration_s <= 0.0) {
    throw ContractError("duration must be positive");
  }
  return static_cast<std::size_t>(ceil_windows(duration_s, kWindowSeconds));
}

std::size_t VideoRecord::window_count() const {
  return windows_for_duration(duration_s);
}

const ModalitySeries* VideoRecord::series(Modality m) const {
  for (const auto& s : modalities) {
    if (s.modality == m) return &s;
  }
  return nullptr;
}

std::vector<const VideoRecord*> Corpus::all() const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : train) out.push_back(&v);
  for (const auto& v : val) out.push_back(&v);
  for (const auto& v : test) out.push_back(&v);
  return out;
}

const std::vector<VideoRecord>& Corpus::partition(Partition p) const {
  switch (p) {
    case Partition::kTrain: return train;
    case Partition::kVal: return val;
    case Partition::kTest: return test;
  }
  return train;
}

TrainView training_view(const Corpus& corpus) {
  return TrainView{corpus.train, corpus.val};
}

ResampledBlock resample_to_windows(const ModalitySeries& series,
                                   double window_s,
                                   std::size_t target_windows) {
  if (window_s <= 0.0) {
    throw ContractError("resample: window length must be positive");
  }
  validate(series);
  const double p = series.frame_period_s;
  const std::size_t frames = series.frame_count();

  std::size_t windows = target_windows;
  if (windows == 0) {
    windows = static_cast<std::size_t>(std::max<long>(
        1, ceil_windows(static_cast<double>(frames) * p, window_s)));
  }

  ResampledBlock out;
  out.modality = series.modality;
  out.windows = windows;
  out.dim = series.dim;
  out.features.assign(windows * series.dim, 0.0);
  out.observed.assign(windows, 0);
  std::vector<std::size_t> counts(windows, 0);

  if (p < window_s) {
    // Downsampling: bucket frames by start timestamp and average.
    for (std::size_t i = 0; i < frames; ++i) {
      const long w = window_of(static_cast<double>(i) * p, window_s);
      if (w < 0 || static_cast<std::size_t>(w) >= windows) continue;
      auto frame = series.frame(i);
      double* dst = out.features.data() + static_cast<std::size_t>(w) * series.dim;
      for (std::size_t d = 0; d < series.dim; ++d) dst[d] += frame[d];
      ++counts[static_cast<std::size_t>(w)];
    }
    for (std::size_t w = 0; w < windows; ++w) {
      if (counts[w] == 0) continue;
      double* dst = out.features.data() + w * series.dim;
      for (std::size_t d = 0; d < series.dim; ++d) {
        dst[d] /= static_cast<double>(counts[w]);
      }
      out.observed[w] = 1;
    }
  } else {
    // Upsampling/hold: each frame repeats into every window it covers.
    for (std::size_t i = 0; i < frames; ++i) {
      const double start = static_cast<double>(i) * p;
      const double stop = static_cast<double>(i + 1) * p;
      long first = window_of(start, window_s);
      long last = ceil_windows(stop, window_s) - 1;
      first = std::max<long>(first, 0);
      last = std::min<long>(last, static_cast<long>(windows) - 1);
      auto frame = series.frame(i);
      for (long w = first; w <= last; ++w) {
        double* dst =
            out.features.data() + static_cast<std::size_t>(w) * series.dim;
        for (std::size_t d = 0; d < series.dim; ++d) dst[d] += frame[d];
        ++counts[static_cast<std::size_t>(w)];
      }
    }
    for (std::size_t w = 0; w < windows; ++w) {
      if (counts[w] == 0) continue;
      if (counts[w] > 1) {
        double* dst = out.features.data() + w * series.dim;
        for (std::size_t d = 0; d < series.dim; ++d) {
          dst[d] /= static_cast<double>(counts[w]);
        }
      }
      out.observed[w] = 1;
    }
  }
  return out;
}

FusedSequence fuse(std::vector<ResampledBlock> blocks) {
  if (blocks.empty()) throw ContractError("fuse: no blocks");
  std::stable_sort(blocks.begin(), blocks.end(),
                   [](const ResampledBlock& a, const ResampledBlock& b) {
                     return static_cast<int>(a.modality) <
                            static_cast<int>(b.modality);
                   });
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    if (blocks[i].modality == blocks[i - 1].modality) {
      throw ContractError("fuse: duplicate block for modality " +
                          to_string(blocks[i].modality));
    }
  }
  FusedSequence out;
  std::size_t windows = 0;
  for (const auto& b : blocks) {
    out.modalities.push_back(b.modality);
    out.dims.push_back(b.dim);
    windows = std::max(windows, b.windows);
  }
  out.windows = windows;
  const std::size_t fdim = out.feature_dim();
  out.features.assign(windows * fdim, 0.0);
  out.mask.assign(windows * blocks.size(), 0);

  std::size_t offset = 0;
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    const ResampledBlock& b = blocks[m];
    for (std::size_t t = 0; t < b.windows; ++t) {
      const double* src = b.features.data() + t * b.dim;
      double* dst = out.features.data() + t * fdim + offset;
      for (std::size_t d = 0; d < b.dim; ++d) dst[d] = src[d];
      out.mask[t * blocks.size() + m] = b.observed[t];
    }
    offset += b.dim;
  }
  return out;
}

FusedSequence fused_features(const VideoRecord& record,
                             std::span<const Modality> selected,
                             const std::map<Modality, std::size_t>& dims) {
  const std::size_t windows = record.window_count();
  std::vector<ResampledBlock> blocks;
  for (Modality m : selected) {
    if (const ModalitySeries* s = record.series(m)) {
      blocks.push_back(resample_to_windows(*s, kWindowSeconds, windows));
    } else {
      auto it = dims.find(m);
      if (it == dims.end()) {
        throw DataError("video '" + record.video_id + "': modality " +
                        to_string(m) +
                        " absent and no dimensionality declared for it");
      }
      ResampledBlock empty;
      empty.modality = m;
      empty.windows = windows;
      empty.dim = it->second;
      empty.features.assign(windows * it->second, 0.0);
      empty.observed.assign(windows, 0);
      blocks.push_back(std::move(empty));
    }
  }
  return fuse(std::move(blocks));
}

namespace {

struct FeatureRow {
  double t_start = 0.0;
  std::vector<double> values;
};

void attach_features(std::vector<VideoRecord*>& by_id_order,
                     std::map<std::string, VideoRecord*>& by_id,
                     const std::filesystem::path& path, Modality modality) {
  csv::Reader reader(path);
  std::vector<std::string> header;
  if (!reader.next(header)) reader.fail(1, "missing header row");
  if (header.size() < 3 || header[0] != "video_id" ||
      header[1] != "t_start_s") {
    reader.fail(1, "expected header video_id,t_start_s,f0,...");
  }
  const std::size_t dim = header.size() - 2;
  for (std::size_t d = 0; d < dim; ++d) {
    if (header[d + 2] != "f" + std::to_string(d)) {
      reader.fail(d + 3, "expected feature column f" + std::to_string(d));
    }
  }
  std::map<std::string, std::vector<FeatureRow>> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != dim + 2) {
      reader.fail(1, "expected " + std::to_string(dim + 2) + " columns, got " +
                         std::to_string(f.size()));
    }
    if (!by_id.count(f[0])) {
      reader.fail(1, "video '" + f[0] + "' not in the manifest");
    }
    FeatureRow row;
    row.t_start = reader.parse_double(f[1], 2);
    row.values.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      row.values[d] = reader.parse_double(f[d + 2], d + 3);
      if (!std::isfinite(row.values[d])) {
        reader.fail(d + 3, "non-finite feature value");
      }
    }
    auto& list = rows[f[0]];
    if (!list.empty() && row.t_start <= list.back().t_start) {
      reader.fail(2, "t_start_s not increasing within video '" + f[0] + "'");
    }
    list.push_back(std::move(row));
  }
  (void)by_id_order;
  for (auto& [video_id, list] : rows) {
    VideoRecord* record = by_id.at(video_id);
    ModalitySeries series;
    series.modality = modality;
    series.dim = dim;
    if (list[0].t_start != 0.0) {
      throw DataError(path.string() + ": video '" + video_id +
                      "': first frame must start at 0");
    }
    if (list.size() >= 2) {
      series.frame_period_s = list[1].t_start - list[0].t_start;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const double expected =
            static_cast<double>(i) * series.frame_period_s;
        if (std::fabs(list[i].t_start - expected) > 1e-6) {
          throw DataError(path.string() + ": video '" + video_id +
                          "': frames not uniformly spaced");
        }
      }
    } else {
      // A single frame holds for the remainder of the video.
      series.frame_period_s = std::max(record->duration_s, kWindowSeconds);
    }
    series.frames.reserve(list.size() * dim);
    for (auto& row : list) {
      series.frames.insert(series.frames.end(), row.values.begin(),
                           row.values.end());
    }
    record->modalities.push_back(std::move(series));
  }
}

void attach_gold(std::map<std::string, VideoRecord*>& by_id,
                 const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header({"video_id", "t_s", "ewe", "sd"});
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 4) reader.fail(1, "expected 4 columns");
    auto it = by_id.find(f[0]);
    if (it == by_id.end()) {
      reader.fail(1, "video '" + f[0] + "' not in the manifest");
    }
    VideoRecord* record = it->second;
    const double t_s = reader.parse_double(f[1], 2);
    const double expected =
        static_cast<double>(record->gold.size()) * kWindowSeconds;
    if (std::fabs(t_s - expected) > 1e-9) {
      reader.fail(2, "t_s off the 0.5 s grid, expected " +
                         csv::format_double(expected));
    }
    record->gold.push_back(reader.parse_double(f[2], 3));
    record->gold_sd.push_back(reader.parse_double(f[3], 4));
  }
  for (auto& [id, record] : by_id) {
    if (!record->gold.empty() &&
        record->gold.size() != record->window_count()) {
      throw DataError(path.string() + ": video '" + id + "': gold length " +
                      std::to_string(record->gold.size()) + " != " +
                      std::to_string(record->window_count()) + " windows");
    }
  }
}

}  // namespace

Corpus load_manifest(const std::filesystem::path& manifest_path) {
  csv::Reader reader(manifest_path);
  reader.expect_header(
      {"video_id", "target_id", "partition", "duration_s", "gender"});

  std::vector<VideoRecord> records;
  std::set<std::string> seen_ids;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 5) reader.fail(1, "expected 5 columns");
    if (!seen_ids.insert(f[0]).second) {
      reader.fail(1, "duplicate video_id '" + f[0] + "'");
    }
    VideoRecord r;
    r.video_id = f[0];
    r.target_id = f[1];
    auto p = partition_from_string(f[2]);
    if (!p) reader.fail(3, "unknown partition '" + f[2] + "'");
    r.partition = *p;
    r.duration_s = reader.parse_double(f[3], 4);
    if (r.duration_s <= 0.0) reader.fail(4, "duration must be positive");
    r.gender = f[4];
    records.push_back(std::move(r));
  }

  std::sort(records.begin(), records.end(),
            [](const VideoRecord& a, const VideoRecord& b) {
              return a.video_id < b.video_id;
            });

  Corpus corpus;
  for (auto& r : records) {
    auto& bucket = r.partition == Partition::kTrain  ? corpus.train
                   : r.partition == Partition::kVal ? corpus.val
                                                    : corpus.test;
    bucket.push_back(std::move(r));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  Corpus corpus = load_manifest(manifest_path);
  std::map<std::string, VideoRecord*> by_id;
  std::vector<VideoRecord*> ordered;
  for (auto* bucket : {&corpus.train, &corpus.val, &corpus.test}) {
    for (auto& r : *bucket) {
      by_id[r.video_id] = &r;
      ordered.push_back(&r);
    }
  }

  const auto dir = manifest_path.parent_path();
  bool any_features = false;
  for (Modality m : kAllModalities) {
    const auto path = dir / ("features_" + to_string(m) + ".csv");
    if (std::filesystem::exists(path)) {
      attach_features(ordered, by_id, path, m);
      corpus.available_modalities.push_back(m);
      any_features = true;
    }
  }
  if (!any_features && corpus.video_count() > 0) {
    throw DataError("no feature files found next to '" +
                    manifest_path.string() + "' (expected features_audio.csv" +
                    ", features_text.csv or features_visual.csv)");
  }

  const auto gold_path = dir / "gold.csv";
  if (std::filesystem::exists(gold_path)) {
    attach_gold(by_id, gold_path);
  }

  for (auto* bucket : {&corpus.train, &corpus.val, &corpus.test}) {
    for (auto& r : *bucket) {
      std::sort(r.modalities.begin(), r.modalities.end(),
                [](const ModalitySeries& a, const ModalitySeries& b) {
                  return static_cast<int>(a.modality) <
                         static_cast<int>(b.modality);
                });
    }
  }
  return corpus;
}

PartitionReport check_partitions(const Corpus& corpus) {
  PartitionReport report;
  std::map<std::string, std::set<Partition>> target_partitions;
  for (Partition p :
       {Partition::kTrain, Partition::kVal, Partition::kTest}) {
    const auto& videos = corpus.partition(p);
    PartitionStats& stats = report.per_partition[static_cast<int>(p)];
    std::set<std::string> targets;
    for (const auto& v : videos) {
      ++stats.videos;
      targets.insert(v.target_id);
      target_partitions[v.target_id].insert(p);
      stats.total_duration_s += v.duration_s;
      if (!v.gender.empty()) {
        const char g = static_cast<char>(std::tolower(v.gender[0]));
        if (g == 'f') ++stats.female;
        if (g == 'm') ++stats.male;
      }
      if (!v.gold.empty()) {
        stats.has_classes = true;
        ++stats.classes[static_cast<int>(agg::classify_video(v.gold))];
      }
    }
    stats.targets = targets.size();
    stats.mean_duration_s =
        stats.videos ? stats.total_duration_s / static_cast<double>(stats.videos)
                     : 0.0;
    report.total_videos += stats.videos;
  }
  for (const auto& [target, parts] : target_partitions) {
    if (parts.size() > 1) {
      report.violations[target] =
          std::vector<Partition>(parts.begin(), parts.end());
    }
  }
  return report;
}

std::array<double, 3> PartitionReport::video_fractions() const {
  std::array<double, 3> out{0, 0, 0};
  if (total_videos == 0) return out;
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<double>(per_partition[i].videos) /
             static_cast<double>(total_videos);
  }
  return out;
}

std::string render(const PartitionReport& report) {
  std::ostringstream os;
  os << "partition  videos   %  targets  total_s   mean_s  female/male"
     << "  pos/mix/neg\n";
  static const char* names[3] = {"train", "val", "test"};
  const auto fractions = report.video_fractions();
  for (int i = 0; i < 3; ++i) {
    const PartitionStats& s = report.per_partition[i];
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%-9s %6zu %3.0f%% %8zu %8.1f %8.1f  %5zu/%-5zu",
                  names[i], s.videos, fractions[i] * 100.0, s.targets,
                  s.total_duration_s, s.mean_duration_s, s.female, s.male);
    os << line;
    if (s.has_classes) {
      os << "  " << s.classes[0] << '/' << s.classes[1] << '/' << s.classes[2];
    } else {
      os << "  --";
    }
    os << '\n';
  }
  if (report.disjoint()) {
    os << "target split: disjoint\n";
  } else {
    os << "target split: VIOLATION\n";
    for (const auto& [target, parts] : report.violations) {
      os << "  target '" << target << "' appears in:";
      for (Partition p : parts) os << ' ' << to_string(p);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace valence::data
