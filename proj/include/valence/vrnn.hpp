#pragma once

#include <optional>
#include <span>

#include "valence/gaussian.hpp"
#include "valence/neural.hpp"

namespace valence::nn {

struct VrnnConfig {
  std::vector<std::size_t> modality_dims;  // aligned with the modality list
  std::size_t hidden = 64;                 // recurrent state width
  std::size_t latent = 32;                 // z width
  std::size_t mlp_hidden = 64;
  double alpha_final = 10.0;  // rating reconstruction weight after annealing
  double beta_final = 1.0;    // KL weight after annealing
  std::size_t anneal_epochs = 10;
  double lambda0 = 1.0;  // per-modality weight is lambda0 / dim

  double lambda(std::size_t m) const {
    return lambda0 / static_cast<double>(modality_dims[m]);
  }
};

/// Multimodal variational RNN: a latent state per window whose posterior is
/// the product of the prior, per-modality Gaussian encoders and (during
/// training) a rating encoder.
struct VrnnModel {
  VrnnConfig config;
  std::vector<data::Modality> modalities;
  ad::ParamStore params;
  /// Per-dimension input standardization over the fused feature vector,
  /// fitted on the training partition; identity until trained. Encoders,
  /// decoders and the recurrence all operate in the standardized space.
  ad::Tensor norm_mean;
  ad::Tensor norm_scale;
};

/// All distribution heads bound onto one tape.
struct VrnnGraph {
  const VrnnConfig* config = nullptr;
  MlpRef prior;
  MlpRef rec;
  MlpRef enc_rating;
  MlpRef dec_rating;
  std::vector<MlpRef> enc_mod;
  std::vector<MlpRef> dec_mod;
};

/// Linear ramp from zero over the first `ramp_epochs` epochs, then flat.
double annealed_weight(double final_value, std::size_t epoch,
                       std::size_t ramp_epochs);

VrnnModel init_vrnn(const VrnnConfig& config,
                    std::span<const data::Modality> modalities,
                    std::uint64_t seed);
VrnnGraph bind_vrnn(ad::Tape& tape, VrnnModel& model);

/// An MLP emitting the mean and (softly bounded) log-variance of a Gaussian.
ad::GaussianVar gaussian_head(ad::Tape& tape, const MlpRef& mlp, ad::Var in,
                              std::size_t dim);

ad::GaussianVar vrnn_prior(ad::Tape& tape, const VrnnGraph& graph,
                           ad::Var h_prev);
ad::GaussianVar vrnn_modality_posterior(ad::Tape& tape, const VrnnGraph& graph,
                                        std::size_t m, ad::Var x_m,
                                        ad::Var h_prev);
ad::GaussianVar vrnn_rating_posterior(ad::Tape& tape, const VrnnGraph& graph,
                                      ad::Var y, ad::Var h_prev);

/// Product of diagonal Gaussians: precisions add, means are precision
/// weighted. With no factors the prior is returned unchanged.
ad::GaussianVar poe_fuse(ad::Tape& tape, const ad::GaussianVar& prior,
                         std::span<const ad::GaussianVar> factors);
ad::DiagGaussian poe_fuse(const ad::DiagGaussian& prior,
                          std::span<const ad::DiagGaussian> factors);

struct VrnnStepResult {
  ad::Var z;
  ad::Var y_hat;        // rating decoder mean
  ad::Var h;
  ad::Var rating_nll;   // valid when y was supplied
  ad::Var feature_nll;  // lambda-weighted, observed modalities only
  ad::Var kl;
};

/// One window: fuse the prior with the available posteriors, sample (or take
/// the posterior mean when no noise is supplied), decode every head and
/// advance the recurrence. Missing inputs are replaced by their
/// reconstruction means on the recurrence path.
VrnnStepResult vrnn_step(ad::Tape& tape, const VrnnGraph& graph, ad::Var h_prev,
                         std::span<const ad::Var> x_blocks,
                         std::span<const std::uint8_t> observed, const ad::Var* y,
                         const ad::Tensor* noise);

struct VrnnForward {
  std::vector<ad::Var> predictions;
  ad::Var loss;  // train mode only
};

/// Train mode conditions on gold and draws one noise vector per step from
/// `stochastic`; eval mode drops the rating factor and feeds predictions
/// back. `alpha` and `beta` are the annealed weights for this epoch.
VrnnForward vrnn_forward(ad::Tape& tape, VrnnModel& model,
                         const data::FusedSequence& sequence,
                         const std::vector<double>* gold, Mode mode,
                         double alpha, double beta, Rng* stochastic);

std::vector<double> predict_vrnn(VrnnModel& model,
                                 const data::FusedSequence& sequence);

struct VrnnTrainResult {
  VrnnModel model;
  TrainLog log;
  long best_epoch = -1;
  double best_val_ccc = 0.0;
};

VrnnTrainResult train_vrnn(const data::TrainView& corpus,
                           std::span<const data::Modality> modalities,
                           VrnnConfig config, const TrainOptions& options);

}  // namespace valence::nn
