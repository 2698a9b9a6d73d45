#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "valence/data.hpp"
#include "valence/optimizer.hpp"
#include "valence/rng.hpp"
#include "valence/tape.hpp"

namespace valence::nn {

enum class Mode { kTrain, kEval };

struct TrainOptions {
  std::size_t max_epochs = 20;
  std::size_t patience = 5;  // epochs without a new best validation CCC
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
  ad::OptimizerConfig::Kind optimizer = ad::OptimizerConfig::Kind::kAdam;
};

struct TrainLogRow {
  long epoch = 0;
  std::string split;  // "train", "val", "train-final", "val-final"
  double loss = 0.0;
  double ccc = 0.0;
  bool has_ccc = false;
};

using TrainLog = std::vector<TrainLogRow>;

/// Two-layer perceptron bound onto a tape: tanh hidden layer, linear output.
struct MlpRef {
  ad::Var w1, b1, w2, b2;
};

MlpRef bind_mlp(ad::Tape& tape, ad::ParamStore& params,
                const std::string& prefix);
ad::Var apply_mlp(ad::Tape& tape, const MlpRef& mlp, ad::Var in);

/// Creates the four tensors of an MLP with the given sizes, seeded per
/// parameter name so initialization is independent of creation order.
void init_mlp(ad::ParamStore& params, const std::string& prefix,
              std::size_t in_dim, std::size_t hidden, std::size_t out_dim,
              std::uint64_t seed);

/// Uniform Xavier-style init in +-sqrt(6 / (fan_in + fan_out)).
ad::Tensor xavier(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct PreparedVideo {
  std::string video_id;
  data::FusedSequence features;
  const std::vector<double>* gold = nullptr;
};

/// Resamples and fuses the selected modalities of each record. When
/// require_gold is set, records must carry gold tracks of matching length.
std::vector<PreparedVideo> prepare_videos(
    std::span<const data::VideoRecord> records,
    std::span<const data::Modality> modalities,
    const std::map<data::Modality, std::size_t>& dims, bool require_gold);

/// Per-modality feature dimensionalities found in the given records; errors
/// if a selected modality never occurs.
std::map<data::Modality, std::size_t> corpus_dims(
    std::span<const data::VideoRecord> records,
    std::span<const data::Modality> modalities);

/// Per-dimension mean and standard deviation (floored at 1e-6) over the
/// observed windows of each modality block.
void fit_standardizer(std::span<const PreparedVideo> videos,
                      ad::Tensor* mean, ad::Tensor* scale);

/// (x - mean) / scale for one fused window.
std::vector<double> standardize_window(std::span<const double> window,
                                       const ad::Tensor& mean,
                                       const ad::Tensor& scale);

}  // namespace valence::nn
