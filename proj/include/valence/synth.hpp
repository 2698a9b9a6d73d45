#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "valence/aggregation.hpp"
#include "valence/data.hpp"

namespace valence::data {

/// Knobs of the synthetic corpus generator. Defaults produce a 60/20/20
/// video split, target-disjoint, with text carrying the strongest valence
/// signal and audio/visual progressively weaker ones.
struct SynthConfig {
  std::array<std::size_t, 3> targets_per_partition{15, 5, 5};
  std::size_t videos_per_target = 4;
  std::size_t windows = 200;  // per video; at least 10

  // Latent valence: a few logistic ramps plus slow AR(1) drift, clipped.
  std::size_t ramps_min = 2;
  std::size_t ramps_max = 4;
  double ramp_width_min = 8.0;   // transition spread, in windows
  double ramp_width_max = 30.0;
  double drift_sd = 0.04;
  double drift_rho = 0.95;

  // Per-modality linear readout maps. `*_readout_sd` is the standard
  // deviation, in valence units per 0.5 s window, of the best linear
  // estimate of the latent from that block alone.
  std::size_t text_dim = 300;
  std::size_t audio_dim = 88;
  std::size_t visual_dim = 20;
  // Text defaults to the window rate (bag-of-words features per window);
  // set 5.0 to emit coarse text frames and exercise the hold-resampling
  // path end to end.
  double text_period_s = 0.5;
  double audio_period_s = 0.5;
  double visual_fps = 30.0;
  double text_readout_sd = 0.7;
  double audio_readout_sd = 1.5;
  double visual_readout_sd = 2.5;
  double feature_noise_sd = 1.0;  // per-dimension additive noise
  // Shared noise factors per modality: a few random directions whose
  // coefficients vary per frame. They correlate the dimensions the way
  // nuisance factors (speaker, lighting, style) do in real features; linear
  // readouts can cancel them, diagonal emission models cannot.
  std::size_t common_noise_dims = 4;
  double common_noise_scale = 0.8;

  // Observers: delayed, attenuated, noisy copies of the latent.
  std::size_t observers_min = 15;
  std::size_t observers_max = 25;
  int delay_min = 1;
  int delay_max = 3;
  double gain_min = 0.7;
  double gain_max = 1.0;
  double observer_noise_sd = 0.08;
  double attention_fail_rate = 0.08;  // emitted with checks_correct < 2
  double flat_rate = 0.04;            // emitted with made_changes = 0
};

struct SyntheticVideo {
  VideoRecord record;               // native-rate features, no gold attached
  std::vector<double> latent;       // ground-truth valence per window
  std::vector<agg::RatingTrack> observers;
};

struct SyntheticCorpus {
  std::vector<SyntheticVideo> videos;  // ordered by video_id
  SynthConfig config;
  std::uint64_t seed = 0;
};

/// Fully deterministic given the seed. Throws ContractError when windows
/// < 10 or any count is zero.
SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed,
                                          const SynthConfig& config = {});

/// Writes manifest.csv, features_{audio,text,visual}.csv, ratings.csv and
/// gold_latent.csv into the directory (created if needed).
void write_corpus(const SyntheticCorpus& corpus,
                  const std::filesystem::path& dir);

}  // namespace valence::data
