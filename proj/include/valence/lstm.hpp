#pragma once

#include <map>
#include <span>

#include "valence/neural.hpp"

namespace valence::nn {

struct LstmConfig {
  std::size_t input_dim = 0;  // fused feature width
  std::size_t hidden = 64;
  std::size_t attn_window = 3;
  std::size_t mlp_hidden = 64;
  double dropout = 0.1;          // on the input features, train time only
  double teacher_forcing = 0.5;  // per-step probability of feeding gold
};

/// Encoder-decoder LSTM with a local attention window between the layers.
struct LstmModel {
  LstmConfig config;
  std::vector<data::Modality> modalities;
  std::vector<std::size_t> modality_dims;
  ad::ParamStore params;
  /// Per-dimension input standardization fitted on the training partition;
  /// identity until trained.
  ad::Tensor norm_mean;
  ad::Tensor norm_scale;
};

/// Gate weights of one cell bound onto a tape; rows pack [input, forget,
/// candidate, output] gates.
struct CellRef {
  ad::Var w, u, b;
  std::size_t hidden = 0;
};

CellRef bind_cell(ad::Tape& tape, ad::ParamStore& params,
                  const std::string& prefix, std::size_t hidden);

/// One forget-gate cell step; returns (h, c).
std::pair<ad::Var, ad::Var> lstm_cell(ad::Tape& tape, ad::Var x,
                                      ad::Var h_prev, ad::Var c_prev,
                                      const CellRef& cell);

struct AttentionRef {
  MlpRef mlp;
  std::size_t window = 0;
};

/// Scores the current input with the attention MLP, softmax-normalizes the
/// scores over the (possibly truncated) trailing window of hidden states and
/// returns their weighted sum. `window_h` holds the last hidden states,
/// oldest first.
ad::Var local_attention(ad::Tape& tape, const AttentionRef& attn, ad::Var x_t,
                        std::span<const ad::Var> window_h);

LstmModel init_lstm(const LstmConfig& config,
                    std::span<const data::Modality> modalities,
                    std::span<const std::size_t> modality_dims,
                    std::uint64_t seed);

struct LstmForward {
  std::vector<ad::Var> predictions;  // one scalar node per window
  ad::Var loss;                      // mean squared error; train mode only
};

/// Builds the full forward graph for one sequence. In train mode `gold` is
/// required and `stochastic` drives dropout masks and teacher-forcing coins;
/// in eval mode predictions are clipped and fed back as constants.
LstmForward lstm_forward(ad::Tape& tape, LstmModel& model,
                         const data::FusedSequence& sequence,
                         const std::vector<double>* gold, Mode mode,
                         Rng* stochastic);

/// Deterministic eval-mode track, clipped to [-1, 1].
std::vector<double> predict_lstm(LstmModel& model,
                                 const data::FusedSequence& sequence);

struct LstmTrainResult {
  LstmModel model;
  TrainLog log;
  long best_epoch = -1;
  double best_val_ccc = 0.0;
};

LstmTrainResult train_lstm(const data::TrainView& corpus,
                           std::span<const data::Modality> modalities,
                           LstmConfig config, const TrainOptions& options);

}  // namespace valence::nn
