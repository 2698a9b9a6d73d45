#include "valence/aggregation.hpp"

#include <algorithm>
#include <cmath>

#include "valence/csv.hpp"
#include "valence/errors.hpp"
#include "valence/metrics.hpp"

namespace valence::agg {

std::string to_string(ValenceClass c) {
  switch (c) {
    case ValenceClass::kPositive: return "positive";
    case ValenceClass::kMixed: return "mixed";
    case ValenceClass::kNegative: return "negative";
  }
  return "?";
}

FilterResult filter_observers(std::vector<RatingTrack> tracks) {
  FilterResult out;
  for (auto& t : tracks) {
    if (t.checks_correct < 2) {
      out.excluded.push_back({t.observer_id, t.video_id, "attention"});
    } else if (!t.made_changes) {
      out.excluded.push_back({t.observer_id, t.video_id, "flat rating"});
    } else {
      out.kept.push_back(std::move(t));
    }
  }
  return out;
}

GoldStandard ewe(std::span<const RatingTrack> tracks) {
  if (tracks.empty()) {
    throw ContractError("ewe: needs at least one track");
  }
  const std::size_t len = tracks[0].samples.size();
  for (const auto& t : tracks) {
    if (t.samples.size() != len) {
      throw ShapeError("ewe: track length mismatch for observer '" +
                       t.observer_id + "'");
    }
  }
  GoldStandard out;
  out.video_id = tracks[0].video_id;
  out.ewe.assign(len, 0.0);
  out.sd.assign(len, 0.0);

  if (tracks.size() == 1) {
    out.ewe = tracks[0].samples;
    out.weights[tracks[0].observer_id] = 1.0;
    return out;
  }

  // Accumulate deviations from the first track rather than raw samples:
  // algebraically identical, and identical raters stay a bit-exact fixed
  // point (the deviation sums are exactly zero).
  const std::vector<double>& anchor = tracks[0].samples;
  std::vector<double> mean_track(len, 0.0);
  for (const auto& t : tracks) {
    for (std::size_t i = 0; i < len; ++i) {
      mean_track[i] += t.samples[i] - anchor[i];
    }
  }
  for (std::size_t i = 0; i < len; ++i) {
    mean_track[i] = anchor[i] + mean_track[i] / static_cast<double>(tracks.size());
  }

  double weight_sum = 0.0;
  std::vector<double> weights(tracks.size(), 0.0);
  for (std::size_t j = 0; j < tracks.size(); ++j) {
    bool degenerate = false;
    double w = metrics::pearson(tracks[j].samples, mean_track, &degenerate);
    if (degenerate || w < 0.0) w = 0.0;
    weights[j] = w;
    weight_sum += w;
    out.weights[tracks[j].observer_id] = w;
  }

  for (std::size_t i = 0; i < len; ++i) {
    if (weight_sum > 0.0) {
      double acc = 0.0;
      for (std::size_t j = 0; j < tracks.size(); ++j) {
        acc += weights[j] * (tracks[j].samples[i] - anchor[i]);
      }
      out.ewe[i] = anchor[i] + acc / weight_sum;
    } else {
      out.ewe[i] = mean_track[i];
    }
    double ss = 0.0;
    for (const auto& t : tracks) {
      const double d = t.samples[i] - mean_track[i];
      ss += d * d;
    }
    out.sd[i] = std::sqrt(ss / static_cast<double>(tracks.size() - 1));
  }
  return out;
}

HumanBenchmark leave_one_out_benchmark(
    const std::map<std::string, std::vector<RatingTrack>>& tracks_by_video) {
  HumanBenchmark out;
  for (const auto& [video_id, tracks] : tracks_by_video) {
    if (tracks.size() < 3) {
      out.skipped.push_back(video_id);
      continue;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      // Rebuild the consensus from scratch on the reduced set: fresh mean
      // track and fresh weights, then score the held-out observer.
      std::vector<RatingTrack> rest;
      rest.reserve(tracks.size() - 1);
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        if (i != j) rest.push_back(tracks[i]);
      }
      const GoldStandard reduced = ewe(rest);
      acc += metrics::ccc(tracks[j].samples, reduced.ewe);
    }
    out.per_video[video_id] = acc / static_cast<double>(tracks.size());
  }
  return out;
}

ValenceClass classify_video(std::span<const double> ewe_track) {
  if (ewe_track.empty()) {
    throw ContractError("classify_video: empty gold track");
  }
  double acc = 0.0;
  for (double v : ewe_track) acc += v;
  const double mean = acc / static_cast<double>(ewe_track.size());
  if (mean > 0.2) return ValenceClass::kPositive;
  if (mean < -0.2) return ValenceClass::kNegative;
  return ValenceClass::kMixed;
}

std::map<std::string, std::vector<RatingTrack>> load_ratings(
    const std::filesystem::path& path) {
  csv::Reader reader(path);
  reader.expect_header({"video_id", "observer_id", "t_s", "rating",
                        "checks_correct", "made_changes"});
  // (video, observer) -> track under construction; samples must arrive in
  // t order starting at 0 on the 0.5 s grid.
  std::map<std::string, std::map<std::string, RatingTrack>> building;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != 6) reader.fail(1, "expected 6 columns");
    const double t_s = reader.parse_double(f[2], 3);
    const double rating = reader.parse_double(f[3], 4);
    const long checks = reader.parse_int(f[4], 5);
    const long changed = reader.parse_int(f[5], 6);
    if (rating < -1.0 || rating > 1.0) {
      reader.fail(4, "rating outside [-1, 1]");
    }
    if (checks < 0 || checks > 2) reader.fail(5, "checks_correct not in 0..2");
    if (changed != 0 && changed != 1) reader.fail(6, "made_changes not 0/1");
    RatingTrack& track = building[f[0]][f[1]];
    if (track.samples.empty()) {
      track.video_id = f[0];
      track.observer_id = f[1];
      track.checks_correct = static_cast<int>(checks);
      track.made_changes = changed == 1;
    }
    const double expected_t =
        static_cast<double>(track.samples.size()) * 0.5;
    if (std::fabs(t_s - expected_t) > 1e-9) {
      reader.fail(3, "t_s off the 0.5 s grid, expected " +
                         csv::format_double(expected_t));
    }
    track.samples.push_back(rating);
  }
  std::map<std::string, std::vector<RatingTrack>> out;
  for (auto& [video, by_observer] : building) {
    auto& list = out[video];
    for (auto& [observer, track] : by_observer) {
      list.push_back(std::move(track));
    }
  }
  return out;
}

void write_gold_csv(const std::filesystem::path& path,
                    std::span<const GoldStandard> gold) {
  csv::Writer w(path);
  w.row({"video_id", "t_s", "ewe", "sd"});
  for (const auto& g : gold) {
    for (std::size_t t = 0; t < g.ewe.size(); ++t) {
      w.row({g.video_id, csv::format_double(static_cast<double>(t) * 0.5),
             csv::format_double(g.ewe[t]), csv::format_double(g.sd[t])});
    }
  }
}

void write_exclusions_csv(const std::filesystem::path& path,
                          std::span<const Exclusion> exclusions) {
  csv::Writer w(path);
  w.row({"observer_id", "video_id", "reason"});
  for (const auto& e : exclusions) {
    w.row({e.observer_id, e.video_id, e.reason});
  }
}

}  // namespace valence::agg
