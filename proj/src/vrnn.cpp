#include "valence/vrnn.hpp"

#include <algorithm>
#include <cmath>

#include "valence/errors.hpp"
#include "valence/metrics.hpp"
#include "valence/rng.hpp"

namespace valence::nn {

namespace {

using ad::DiagGaussian;
using ad::GaussianVar;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// Soft bound on emitted log-variances; keeps precisions and densities finite
// without introducing a kink.
constexpr double kLogVarBound = 8.0;

double clip1(double v) { return std::max(-1.0, std::min(1.0, v)); }

}  // namespace

double annealed_weight(double final_value, std::size_t epoch,
                       std::size_t ramp_epochs) {
  if (ramp_epochs == 0) return final_value;
  const double f = std::min(
      1.0, static_cast<double>(epoch) / static_cast<double>(ramp_epochs));
  return final_value * f;
}

VrnnModel init_vrnn(const VrnnConfig& config,
                    std::span<const data::Modality> modalities,
                    std::uint64_t seed) {
  if (config.modality_dims.size() != modalities.size()) {
    throw ContractError("vrnn: modality_dims must match the modality list");
  }
  if (config.hidden == 0 || config.latent == 0 || config.mlp_hidden == 0) {
    throw ContractError("vrnn: dimensions must be positive");
  }
  VrnnModel model;
  model.config = config;
  model.modalities.assign(modalities.begin(), modalities.end());
  auto& p = model.params;
  const std::size_t h = config.hidden;
  const std::size_t l = config.latent;
  const std::size_t mh = config.mlp_hidden;
  std::size_t feature_dim = 0;
  for (std::size_t d : config.modality_dims) feature_dim += d;

  init_mlp(p, "prior", h, mh, 2 * l, derive_seed(seed, "prior"));
  init_mlp(p, "enc.rating", 1 + h, mh, 2 * l, derive_seed(seed, "enc.rating"));
  init_mlp(p, "dec.rating", l + h, mh, 2, derive_seed(seed, "dec.rating"));
  init_mlp(p, "rec", l + feature_dim + 1, mh, h, derive_seed(seed, "rec"));
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const std::string tag = data::to_string(model.modalities[m]);
    init_mlp(p, "enc." + tag, config.modality_dims[m] + h, mh, 2 * l,
             derive_seed(seed, "enc." + tag));
    init_mlp(p, "dec." + tag, l + h, mh, 2 * config.modality_dims[m],
             derive_seed(seed, "dec." + tag));
  }
  model.norm_mean = Tensor::zeros({feature_dim});
  model.norm_scale = Tensor::full({feature_dim}, 1.0);
  return model;
}

VrnnGraph bind_vrnn(Tape& tape, VrnnModel& model) {
  VrnnGraph g;
  g.config = &model.config;
  g.prior = bind_mlp(tape, model.params, "prior");
  g.rec = bind_mlp(tape, model.params, "rec");
  g.enc_rating = bind_mlp(tape, model.params, "enc.rating");
  g.dec_rating = bind_mlp(tape, model.params, "dec.rating");
  for (const data::Modality m : model.modalities) {
    const std::string tag = data::to_string(m);
    g.enc_mod.push_back(bind_mlp(tape, model.params, "enc." + tag));
    g.dec_mod.push_back(bind_mlp(tape, model.params, "dec." + tag));
  }
  return g;
}

GaussianVar gaussian_head(Tape& tape, const MlpRef& mlp, Var in,
                          std::size_t dim) {
  Var out = apply_mlp(tape, mlp, in);
  Var mean = tape.slice(out, 0, dim);
  Var raw = tape.slice(out, dim, dim);
  Var log_var = tape.scale(tape.tanh(tape.scale(raw, 1.0 / kLogVarBound)),
                           kLogVarBound);
  return GaussianVar{mean, log_var};
}

GaussianVar vrnn_prior(Tape& tape, const VrnnGraph& graph, Var h_prev) {
  return gaussian_head(tape, graph.prior, h_prev, graph.config->latent);
}

GaussianVar vrnn_modality_posterior(Tape& tape, const VrnnGraph& graph,
                                    std::size_t m, Var x_m, Var h_prev) {
  Var in = tape.concat(std::vector<Var>{x_m, h_prev});
  return gaussian_head(tape, graph.enc_mod[m], in, graph.config->latent);
}

GaussianVar vrnn_rating_posterior(Tape& tape, const VrnnGraph& graph, Var y,
                                  Var h_prev) {
  Var in = tape.concat(std::vector<Var>{y, h_prev});
  return gaussian_head(tape, graph.enc_rating, in, graph.config->latent);
}

GaussianVar poe_fuse(Tape& tape, const GaussianVar& prior,
                     std::span<const GaussianVar> factors) {
  if (factors.empty()) return prior;
  Var precision = tape.exp(tape.neg(prior.log_var));
  Var weighted = tape.mul(prior.mean, precision);
  for (const GaussianVar& f : factors) {
    Var p = tape.exp(tape.neg(f.log_var));
    precision = tape.add(precision, p);
    weighted = tape.add(weighted, tape.mul(f.mean, p));
  }
  Var mean = tape.div(weighted, precision);
  Var log_var = tape.neg(tape.log(precision));
  return GaussianVar{mean, log_var};
}

DiagGaussian poe_fuse(const DiagGaussian& prior,
                      std::span<const DiagGaussian> factors) {
  const std::size_t dim = prior.dim();
  Tensor mean = Tensor::zeros({dim});
  Tensor var = Tensor::zeros({dim});
  for (std::size_t d = 0; d < dim; ++d) {
    double precision = 1.0 / prior.variance.values[d];
    double weighted = prior.mean.values[d] * precision;
    for (const DiagGaussian& f : factors) {
      if (f.dim() != dim) {
        throw ShapeError("poe: factor dimension mismatch");
      }
      const double p = 1.0 / f.variance.values[d];
      precision += p;
      weighted += f.mean.values[d] * p;
    }
    var.values[d] = 1.0 / precision;
    mean.values[d] = weighted / precision;
  }
  return DiagGaussian(std::move(mean), std::move(var));
}

VrnnStepResult vrnn_step(Tape& tape, const VrnnGraph& graph, Var h_prev,
                         std::span<const Var> x_blocks,
                         std::span<const std::uint8_t> observed, const Var* y,
                         const Tensor* noise) {
  const VrnnConfig& cfg = *graph.config;
  if (x_blocks.size() != cfg.modality_dims.size() ||
      observed.size() != x_blocks.size()) {
    throw ShapeError("vrnn step: expected " +
                     std::to_string(cfg.modality_dims.size()) +
                     " modality blocks");
  }

  GaussianVar prior = vrnn_prior(tape, graph, h_prev);
  std::vector<GaussianVar> factors;
  for (std::size_t m = 0; m < x_blocks.size(); ++m) {
    if (observed[m]) {
      factors.push_back(
          vrnn_modality_posterior(tape, graph, m, x_blocks[m], h_prev));
    }
  }
  if (y) {
    factors.push_back(vrnn_rating_posterior(tape, graph, *y, h_prev));
  }
  GaussianVar posterior = poe_fuse(tape, prior, factors);

  VrnnStepResult result;
  result.z = noise ? ad::reparam_sample(tape, posterior, *noise)
                   : posterior.mean;
  result.kl = ad::gaussian_kl(tape, posterior, prior);

  Var dec_in = tape.concat(std::vector<Var>{result.z, h_prev});
  GaussianVar py = gaussian_head(tape, graph.dec_rating, dec_in, 1);
  result.y_hat = py.mean;
  if (y) {
    result.rating_nll = ad::gaussian_nll(tape, *y, py);
  }

  std::vector<Var> rec_parts;
  rec_parts.push_back(result.z);
  Var feature_nll;
  for (std::size_t m = 0; m < x_blocks.size(); ++m) {
    GaussianVar px =
        gaussian_head(tape, graph.dec_mod[m], dec_in, cfg.modality_dims[m]);
    if (observed[m]) {
      Var nll = tape.scale(ad::gaussian_nll(tape, x_blocks[m], px),
                           cfg.lambda(m));
      feature_nll = feature_nll.valid() ? tape.add(feature_nll, nll) : nll;
      rec_parts.push_back(x_blocks[m]);
    } else {
      rec_parts.push_back(px.mean);  // impute from the reconstruction
    }
  }
  if (!feature_nll.valid()) {
    feature_nll = tape.constant(Tensor::scalar(0.0));
  }
  result.feature_nll = feature_nll;
  rec_parts.push_back(y ? *y : result.y_hat);
  result.h = tape.tanh(
      apply_mlp(tape, graph.rec, tape.concat(rec_parts)));
  return result;
}

VrnnForward vrnn_forward(Tape& tape, VrnnModel& model,
                         const data::FusedSequence& sequence,
                         const std::vector<double>* gold, Mode mode,
                         double alpha, double beta, Rng* stochastic) {
  const VrnnConfig& cfg = model.config;
  if (sequence.modalities != model.modalities) {
    throw ShapeError("vrnn: sequence modalities " +
                     data::modalities_to_string(sequence.modalities) +
                     " do not match model " +
                     data::modalities_to_string(model.modalities));
  }
  for (std::size_t m = 0; m < cfg.modality_dims.size(); ++m) {
    if (sequence.dims[m] != cfg.modality_dims[m]) {
      throw ShapeError("vrnn: modality " +
                       data::to_string(model.modalities[m]) + " has " +
                       std::to_string(sequence.dims[m]) +
                       " features, model expects " +
                       std::to_string(cfg.modality_dims[m]));
    }
  }
  const bool training = mode == Mode::kTrain;
  if (training && !gold) {
    throw ContractError("vrnn: training mode needs a gold track");
  }
  if (training && !stochastic) {
    throw ContractError("vrnn: training mode needs a noise stream");
  }

  VrnnGraph graph = bind_vrnn(tape, model);
  Var h = tape.constant(Tensor::zeros({cfg.hidden}));

  VrnnForward result;
  std::vector<Var> step_losses;
  for (std::size_t t = 0; t < sequence.windows; ++t) {
    const std::vector<double> window = standardize_window(
        sequence.window(t), model.norm_mean, model.norm_scale);
    std::vector<Var> x_blocks;
    std::vector<std::uint8_t> observed;
    for (std::size_t m = 0; m < cfg.modality_dims.size(); ++m) {
      const std::size_t off = sequence.block_offset(m);
      x_blocks.push_back(tape.constant(Tensor::vector(std::vector<double>(
          window.begin() + static_cast<long>(off),
          window.begin() + static_cast<long>(off + sequence.dims[m])))));
      observed.push_back(sequence.observed(t, m));
    }

    Var y;
    if (training) {
      y = tape.constant(Tensor::scalar((*gold)[t]));
    }
    Tensor noise;
    if (training) {
      noise = Tensor::zeros({cfg.latent});
      for (auto& v : noise.values) v = stochastic->normal();
    }

    auto step = vrnn_step(tape, graph, h, x_blocks, observed,
                          training ? &y : nullptr,
                          training ? &noise : nullptr);
    h = step.h;
    result.predictions.push_back(step.y_hat);

    if (training) {
      Var loss = tape.add(tape.scale(step.rating_nll, alpha),
                          tape.add(step.feature_nll,
                                   tape.scale(step.kl, beta)));
      step_losses.push_back(loss);
    }
  }
  if (training) {
    result.loss = tape.mean(tape.concat(step_losses));
  }
  return result;
}

std::vector<double> predict_vrnn(VrnnModel& model,
                                 const data::FusedSequence& sequence) {
  Tape tape;
  auto run = vrnn_forward(tape, model, sequence, nullptr, Mode::kEval, 0.0,
                          0.0, nullptr);
  std::vector<double> track;
  track.reserve(run.predictions.size());
  for (Var v : run.predictions) {
    track.push_back(clip1(tape.value(v).values[0]));
  }
  return track;
}

VrnnTrainResult train_vrnn(const data::TrainView& corpus,
                           std::span<const data::Modality> modalities,
                           VrnnConfig config, const TrainOptions& options) {
  auto dims = corpus_dims(corpus.train, modalities);
  std::vector<data::Modality> mods(modalities.begin(), modalities.end());
  config.modality_dims.clear();
  for (data::Modality m : mods) config.modality_dims.push_back(dims.at(m));

  auto train_videos = prepare_videos(corpus.train, mods, dims, true);
  auto val_videos = prepare_videos(corpus.val, mods, dims, true);
  if (train_videos.empty() || val_videos.empty()) {
    throw ContractError("vrnn: training and validation must be non-empty");
  }

  VrnnTrainResult result;
  result.model = init_vrnn(config, mods, derive_seed(options.seed, "vrnn-init"));
  VrnnModel& model = result.model;
  fit_standardizer(train_videos, &model.norm_mean, &model.norm_scale);

  ad::Optimizer optimizer({options.optimizer, options.learning_rate});
  std::map<std::string, Tensor> best_params;
  double best_ccc = -2.0;
  long best_epoch = -1;

  auto evaluate = [&](std::vector<PreparedVideo>& videos) {
    double ccc_acc = 0.0;
    double loss_acc = 0.0;
    for (auto& v : videos) {
      auto track = predict_vrnn(model, v.features);
      ccc_acc += metrics::ccc(track, *v.gold);
      loss_acc += metrics::mse(track, *v.gold);
    }
    const auto n = static_cast<double>(videos.size());
    return std::pair<double, double>{ccc_acc / n, loss_acc / n};
  };

  std::vector<std::size_t> order(train_videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    const double alpha =
        annealed_weight(config.alpha_final, epoch, config.anneal_epochs);
    const double beta =
        annealed_weight(config.beta_final, epoch, config.anneal_epochs);
    Rng shuffle_rng = substream(options.seed, "vrnn-order", epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double train_loss = 0.0;
    for (std::size_t idx : order) {
      PreparedVideo& video = train_videos[idx];
      Rng stochastic = substream(options.seed, "vrnn-stoch",
                                 epoch * 1000003 + idx);
      Tape tape;
      auto run = vrnn_forward(tape, model, video.features, video.gold,
                              Mode::kTrain, alpha, beta, &stochastic);
      const double loss = tape.scalar_value(run.loss);
      if (!std::isfinite(loss)) {
        throw TrainError("vrnn: non-finite loss at epoch " +
                         std::to_string(epoch) + ", video '" +
                         video.video_id + "'");
      }
      train_loss += loss;
      tape.backward(run.loss);
      optimizer.step(model.params, tape.grads());
    }
    train_loss /= static_cast<double>(train_videos.size());

    auto [val_ccc, val_loss] = evaluate(val_videos);
    result.log.push_back({static_cast<long>(epoch), "train", train_loss, 0.0,
                          false});
    result.log.push_back({static_cast<long>(epoch), "val", val_loss, val_ccc,
                          true});

    if (val_ccc > best_ccc) {
      best_ccc = val_ccc;
      best_epoch = static_cast<long>(epoch);
      best_params = model.params.entries();
    } else if (epoch - static_cast<std::size_t>(best_epoch) >=
               options.patience) {
      break;
    }
  }

  model.params.entries() = best_params;
  result.best_epoch = best_epoch;
  result.best_val_ccc = best_ccc;

  auto [train_ccc_final, train_loss_final] = evaluate(train_videos);
  auto [val_ccc_final, val_loss_final] = evaluate(val_videos);
  result.log.push_back(
      {best_epoch, "train-final", train_loss_final, train_ccc_final, true});
  result.log.push_back(
      {best_epoch, "val-final", val_loss_final, val_ccc_final, true});
  return result;
}

}  // namespace valence::nn
