#include "valence/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "valence/csv.hpp"
#include "valence/errors.hpp"
#include "valence/rng.hpp"

namespace valence::data {

namespace {

double clip1(double v) { return std::max(-1.0, std::min(1.0, v)); }

struct LinearMap {
  std::vector<double> direction;  // unit vector scaled by 1/readout_sd
  std::vector<double> offset;
  std::vector<double> common;  // common_noise_dims x dim nuisance directions
  std::size_t common_dims = 0;
};

// The optimal linear readout of v from  a*v + offset + noise  has error
// sd = noise_sd / |a|, so |a| = noise_sd / readout_sd hits the target.
LinearMap make_map(Rng& rng, std::size_t dim, double readout_sd,
                   double noise_sd, std::size_t common_dims,
                   double common_scale) {
  LinearMap map;
  map.direction.resize(dim);
  map.offset.resize(dim);
  double norm = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    map.direction[d] = rng.normal();
    norm += map.direction[d] * map.direction[d];
    map.offset[d] = rng.normal() * 0.5;
  }
  norm = std::sqrt(norm);
  const double scale = noise_sd / readout_sd / norm;
  for (auto& v : map.direction) v *= scale;
  map.common_dims = common_dims;
  map.common.resize(common_dims * dim);
  for (auto& v : map.common) v = rng.normal() * common_scale;
  return map;
}

std::vector<double> latent_track(Rng& rng, const SynthConfig& cfg) {
  const std::size_t n = cfg.windows;
  std::vector<double> g(n, rng.uniform(-0.2, 0.2));
  const auto ramps = static_cast<std::size_t>(rng.uniform_int(
      static_cast<std::int64_t>(cfg.ramps_min),
      static_cast<std::int64_t>(cfg.ramps_max)));
  for (std::size_t k = 0; k < ramps; ++k) {
    const double amp = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.35, 0.9);
    const double center = rng.uniform(0.05, 0.95) * static_cast<double>(n);
    const double spread =
        rng.uniform(cfg.ramp_width_min, cfg.ramp_width_max) / 4.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double z = (static_cast<double>(t) - center) / spread;
      g[t] += amp / (1.0 + std::exp(-z));
    }
  }
  double drift = 0.0;
  const double innovation = cfg.drift_sd * std::sqrt(1.0 - cfg.drift_rho * cfg.drift_rho);
  for (std::size_t t = 0; t < n; ++t) {
    drift = cfg.drift_rho * drift + innovation * rng.normal();
    g[t] = clip1(g[t] + drift);
  }
  return g;
}

ModalitySeries emit_series(Modality modality, double period, std::size_t dim,
                           const LinearMap& map,
                           const std::vector<double>& window_values,
                           double noise_sd, Rng& rng) {
  ModalitySeries s;
  s.modality = modality;
  s.frame_period_s = period;
  s.dim = dim;
  const std::size_t frames = window_values.size();
  s.frames.resize(frames * dim);
  std::vector<double> z(map.common_dims, 0.0);
  for (std::size_t i = 0; i < frames; ++i) {
    const double v = window_values[i];
    for (auto& zk : z) zk = rng.normal();
    double* dst = s.frames.data() + i * dim;
    for (std::size_t d = 0; d < dim; ++d) {
      double common = 0.0;
      for (std::size_t k = 0; k < map.common_dims; ++k) {
        common += map.common[k * dim + d] * z[k];
      }
      dst[d] = map.direction[d] * v + map.offset[d] + common +
               noise_sd * rng.normal();
    }
  }
  return s;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed,
                                          const SynthConfig& cfg) {
  if (cfg.windows < 10) {
    throw ContractError(
        "synthetic corpus: need at least 10 windows per video (attention and "
        "smoothing spans)");
  }
  if (cfg.videos_per_target == 0 ||
      cfg.targets_per_partition[0] + cfg.targets_per_partition[1] +
              cfg.targets_per_partition[2] ==
          0) {
    throw ContractError("synthetic corpus: counts must be positive");
  }

  SyntheticCorpus corpus;
  corpus.config = cfg;
  corpus.seed = seed;

  Rng map_rng = substream(seed, "feature-maps");
  const LinearMap text_map =
      make_map(map_rng, cfg.text_dim, cfg.text_readout_sd,
               cfg.feature_noise_sd, cfg.common_noise_dims,
               cfg.common_noise_scale);
  const LinearMap audio_map =
      make_map(map_rng, cfg.audio_dim, cfg.audio_readout_sd,
               cfg.feature_noise_sd, cfg.common_noise_dims,
               cfg.common_noise_scale);
  const LinearMap visual_map = make_map(
      map_rng, cfg.visual_dim,
      cfg.visual_readout_sd * std::sqrt(kWindowSeconds * cfg.visual_fps),
      cfg.feature_noise_sd, cfg.common_noise_dims, cfg.common_noise_scale);

  std::uint64_t video_index = 0;
  std::size_t target_counter = 0;
  for (int part = 0; part < 3; ++part) {
    for (std::size_t ti = 0; ti < cfg.targets_per_partition[part]; ++ti) {
      char target_id[32];
      std::snprintf(target_id, sizeof(target_id), "t%03zu", target_counter);
      const std::string gender = target_counter % 2 == 0 ? "f" : "m";
      ++target_counter;
      for (std::size_t vi = 0; vi < cfg.videos_per_target; ++vi) {
        Rng rng = substream(seed, "video", video_index);
        ++video_index;

        SyntheticVideo video;
        video.record.video_id =
            std::string(target_id) + "_v" + std::to_string(vi);
        video.record.target_id = target_id;
        video.record.partition = static_cast<Partition>(part);
        video.record.duration_s =
            static_cast<double>(cfg.windows) * kWindowSeconds;
        video.record.gender = gender;
        video.latent = latent_track(rng, cfg);
        const std::vector<double>& g = video.latent;
        const std::size_t T = g.size();

        // Text at its native (coarse) rate sees the window-mean latent.
        const auto text_stride = static_cast<std::size_t>(
            std::lround(cfg.text_period_s / kWindowSeconds));
        const std::size_t text_frames = (T + text_stride - 1) / text_stride;
        std::vector<double> text_values(text_frames, 0.0);
        for (std::size_t i = 0; i < text_frames; ++i) {
          const std::size_t lo = i * text_stride;
          const std::size_t hi = std::min(T, lo + text_stride);
          double acc = 0.0;
          for (std::size_t t = lo; t < hi; ++t) acc += g[t];
          text_values[i] = acc / static_cast<double>(hi - lo);
        }
        std::vector<double> visual_values;
        const auto frames_per_window =
            static_cast<std::size_t>(std::lround(cfg.visual_fps * kWindowSeconds));
        visual_values.reserve(T * frames_per_window);
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t r = 0; r < frames_per_window; ++r) {
            visual_values.push_back(g[t]);
          }
        }

        video.record.modalities.push_back(
            emit_series(Modality::kAudio, cfg.audio_period_s, cfg.audio_dim,
                        audio_map, g, cfg.feature_noise_sd, rng));
        video.record.modalities.push_back(
            emit_series(Modality::kText, cfg.text_period_s, cfg.text_dim,
                        text_map, text_values, cfg.feature_noise_sd, rng));
        video.record.modalities.push_back(emit_series(
            Modality::kVisual, 1.0 / cfg.visual_fps, cfg.visual_dim,
            visual_map, visual_values, cfg.feature_noise_sd, rng));

        const auto n_obs = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(cfg.observers_min),
                            static_cast<std::int64_t>(cfg.observers_max)));
        for (std::size_t j = 0; j < n_obs; ++j) {
          agg::RatingTrack track;
          char oid[32];
          std::snprintf(oid, sizeof(oid), "obs%03zu", j);
          track.observer_id = oid;
          track.video_id = video.record.video_id;
          const auto delay = static_cast<std::size_t>(
              rng.uniform_int(cfg.delay_min, cfg.delay_max));
          const double gain = rng.uniform(cfg.gain_min, cfg.gain_max);
          const bool fails_attention = rng.bernoulli(cfg.attention_fail_rate);
          const bool flat = !fails_attention && rng.bernoulli(cfg.flat_rate);
          track.checks_correct =
              fails_attention ? static_cast<int>(rng.uniform_int(0, 1)) : 2;
          track.made_changes = !flat;
          track.samples.resize(T);
          for (std::size_t t = 0; t < T; ++t) {
            if (flat) {
              track.samples[t] = 0.0;
              continue;
            }
            const std::size_t src = t >= delay ? t - delay : 0;
            track.samples[t] = clip1(gain * g[src] +
                                     cfg.observer_noise_sd * rng.normal());
          }
          video.observers.push_back(std::move(track));
        }
        corpus.videos.push_back(std::move(video));
      }
    }
  }
  std::sort(corpus.videos.begin(), corpus.videos.end(),
            [](const SyntheticVideo& a, const SyntheticVideo& b) {
              return a.record.video_id < b.record.video_id;
            });
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    csv::Writer w(dir / "manifest.csv");
    w.row({"video_id", "target_id", "partition", "duration_s", "gender"});
    for (const auto& v : corpus.videos) {
      w.row({v.record.video_id, v.record.target_id,
             to_string(v.record.partition),
             csv::format_double(v.record.duration_s), v.record.gender});
    }
  }

  for (Modality m : kAllModalities) {
    const ModalitySeries* probe = corpus.videos.empty()
                                      ? nullptr
                                      : corpus.videos[0].record.series(m);
    if (!probe) continue;
    csv::Writer w(dir / ("features_" + to_string(m) + ".csv"));
    std::vector<std::string> header{"video_id", "t_start_s"};
    for (std::size_t d = 0; d < probe->dim; ++d) {
      header.push_back("f" + std::to_string(d));
    }
    w.row(header);
    std::vector<std::string> row;
    for (const auto& v : corpus.videos) {
      const ModalitySeries* s = v.record.series(m);
      if (!s) continue;
      for (std::size_t i = 0; i < s->frame_count(); ++i) {
        row.clear();
        row.push_back(v.record.video_id);
        row.push_back(csv::format_double(static_cast<double>(i) *
                                         s->frame_period_s));
        for (double x : s->frame(i)) row.push_back(csv::format_double(x));
        w.row(row);
      }
    }
  }

  {
    csv::Writer w(dir / "ratings.csv");
    w.row({"video_id", "observer_id", "t_s", "rating", "checks_correct",
           "made_changes"});
    for (const auto& v : corpus.videos) {
      for (const auto& track : v.observers) {
        for (std::size_t t = 0; t < track.samples.size(); ++t) {
          w.row({track.video_id, track.observer_id,
                 csv::format_double(static_cast<double>(t) * kWindowSeconds),
                 csv::format_double(track.samples[t]),
                 std::to_string(track.checks_correct),
                 std::to_string(track.made_changes ? 1 : 0)});
        }
      }
    }
  }

  {
    csv::Writer w(dir / "gold_latent.csv");
    w.row({"video_id", "t_s", "valence"});
    for (const auto& v : corpus.videos) {
      for (std::size_t t = 0; t < v.latent.size(); ++t) {
        w.row({v.record.video_id,
               csv::format_double(static_cast<double>(t) * kWindowSeconds),
               csv::format_double(v.latent[t])});
      }
    }
  }
}

}  // namespace valence::data
