#include "valence/lstm.hpp"

#include <algorithm>
#include <cmath>

#include "valence/errors.hpp"
#include "valence/metrics.hpp"
#include "valence/rng.hpp"

namespace valence::nn {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor dropout_mask(std::size_t n, double rate, Rng& rng) {
  Tensor mask = Tensor::full({n}, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 - rate;
  for (auto& v : mask.values) {
    v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  return mask;
}

double clip1(double v) { return std::max(-1.0, std::min(1.0, v)); }

}  // namespace

CellRef bind_cell(Tape& tape, ad::ParamStore& params,
                  const std::string& prefix, std::size_t hidden) {
  return CellRef{tape.param(params, prefix + ".w"),
                 tape.param(params, prefix + ".u"),
                 tape.param(params, prefix + ".b"), hidden};
}

std::pair<Var, Var> lstm_cell(Tape& tape, Var x, Var h_prev, Var c_prev,
                              const CellRef& cell) {
  const std::size_t h = cell.hidden;
  Var gates = tape.add(tape.add(tape.matmul(cell.w, x),
                                tape.matmul(cell.u, h_prev)),
                       cell.b);
  Var i = tape.sigmoid(tape.slice(gates, 0, h));
  Var f = tape.sigmoid(tape.slice(gates, h, h));
  Var g = tape.tanh(tape.slice(gates, 2 * h, h));
  Var o = tape.sigmoid(tape.slice(gates, 3 * h, h));
  Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
  Var h_new = tape.mul(o, tape.tanh(c));
  return {h_new, c};
}

Var local_attention(Tape& tape, const AttentionRef& attn, Var x_t,
                    std::span<const Var> window_h) {
  if (window_h.empty()) {
    throw ContractError("attention: empty hidden window");
  }
  const std::size_t l = attn.window;
  const std::size_t w = std::min(l, window_h.size());
  Var scores = apply_mlp(tape, attn.mlp, x_t);  // l scores
  // score k corresponds to position t-l+1+k; keep the last w of them
  Var active = w == l ? scores : tape.slice(scores, l - w, w);
  Var weights = tape.softmax(active);
  Var stacked = tape.stack_rows(window_h.subspan(window_h.size() - w, w));
  const std::size_t hidden = tape.value(window_h[0]).numel();
  Var context = tape.matmul(tape.reshape(weights, {1, w}), stacked);
  return tape.reshape(context, {hidden});
}

LstmModel init_lstm(const LstmConfig& config,
                    std::span<const data::Modality> modalities,
                    std::span<const std::size_t> modality_dims,
                    std::uint64_t seed) {
  if (config.input_dim == 0 || config.hidden == 0 || config.attn_window == 0) {
    throw ContractError("lstm: dimensions must be positive");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ContractError("lstm: dropout must lie in [0, 1)");
  }
  LstmModel model;
  model.config = config;
  model.modalities.assign(modalities.begin(), modalities.end());
  model.modality_dims.assign(modality_dims.begin(), modality_dims.end());
  auto& p = model.params;
  const std::size_t h = config.hidden;

  auto gate_tensor = [&](const std::string& name, std::size_t in_dim) {
    Tensor t = xavier(4 * h, in_dim, derive_seed(seed, name));
    return t;
  };
  auto gate_bias = [&](std::size_t hidden) {
    Tensor b = Tensor::zeros({4 * hidden});
    // forget gate biased open so long-range state survives early training
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b.values[i] = 1.0;
    return b;
  };

  p.create("enc.w", gate_tensor("enc.w", config.input_dim));
  p.create("enc.u", gate_tensor("enc.u", h));
  p.create("enc.b", gate_bias(h));
  p.create("dec.w", gate_tensor("dec.w", h + 1));
  p.create("dec.u", gate_tensor("dec.u", h));
  p.create("dec.b", gate_bias(h));
  init_mlp(p, "attn", config.input_dim, config.mlp_hidden, config.attn_window,
           derive_seed(seed, "attn"));
  p.create("out.w", xavier(1, h, derive_seed(seed, "out.w")));
  p.create("out.b", Tensor::zeros({1}));
  model.norm_mean = Tensor::zeros({config.input_dim});
  model.norm_scale = Tensor::full({config.input_dim}, 1.0);
  return model;
}

LstmForward lstm_forward(Tape& tape, LstmModel& model,
                         const data::FusedSequence& sequence,
                         const std::vector<double>* gold, Mode mode,
                         Rng* stochastic) {
  const LstmConfig& cfg = model.config;
  if (sequence.feature_dim() != cfg.input_dim) {
    throw ShapeError("lstm: model expects " + std::to_string(cfg.input_dim) +
                     " features, sequence has " +
                     std::to_string(sequence.feature_dim()));
  }
  const bool training = mode == Mode::kTrain;
  if (training && !gold) {
    throw ContractError("lstm: training mode needs a gold track");
  }
  const bool needs_rng =
      training && (cfg.dropout > 0.0 ||
                   (cfg.teacher_forcing > 0.0 && cfg.teacher_forcing < 1.0));
  if (needs_rng && !stochastic) {
    throw ContractError("lstm: training mode needs a random stream");
  }

  CellRef enc = bind_cell(tape, model.params, "enc", cfg.hidden);
  CellRef dec = bind_cell(tape, model.params, "dec", cfg.hidden);
  AttentionRef attn{bind_mlp(tape, model.params, "attn"), cfg.attn_window};
  Var out_w = tape.param(model.params, "out.w");
  Var out_b = tape.param(model.params, "out.b");

  const std::size_t t_count = sequence.windows;
  Var h_enc = tape.constant(Tensor::zeros({cfg.hidden}));
  Var c_enc = tape.constant(Tensor::zeros({cfg.hidden}));
  Var h_dec = tape.constant(Tensor::zeros({cfg.hidden}));
  Var c_dec = tape.constant(Tensor::zeros({cfg.hidden}));

  LstmForward result;
  std::vector<Var> hidden_window;
  std::vector<Var> diffs;
  Var y_prev = tape.constant(Tensor::scalar(0.0));  // neutral valence start

  for (std::size_t t = 0; t < t_count; ++t) {
    Var x = tape.constant(Tensor::vector(standardize_window(
        sequence.window(t), model.norm_mean, model.norm_scale)));
    if (training && cfg.dropout > 0.0) {
      x = tape.mask_mul(x, dropout_mask(cfg.input_dim, cfg.dropout,
                                        *stochastic));
    }
    auto [h, c] = lstm_cell(tape, x, h_enc, c_enc, enc);
    h_enc = h;
    c_enc = c;
    hidden_window.push_back(h);
    if (hidden_window.size() > cfg.attn_window) {
      hidden_window.erase(hidden_window.begin());
    }

    Var context = local_attention(tape, attn, x, hidden_window);
    Var dec_in = tape.concat(std::vector<Var>{context, y_prev});
    auto [hd, cd] = lstm_cell(tape, dec_in, h_dec, c_dec, dec);
    h_dec = hd;
    c_dec = cd;
    Var y_hat = tape.add(tape.matmul(out_w, h_dec), out_b);
    result.predictions.push_back(y_hat);

    if (training) {
      Var diff = tape.sub(y_hat, tape.constant(Tensor::scalar((*gold)[t])));
      diffs.push_back(diff);
      const bool feed_gold =
          cfg.teacher_forcing >= 1.0 ||
          (cfg.teacher_forcing > 0.0 &&
           stochastic->uniform() < cfg.teacher_forcing);
      y_prev = feed_gold ? tape.constant(Tensor::scalar((*gold)[t])) : y_hat;
    } else {
      // clipped feedback, detached from the graph
      y_prev = tape.constant(
          Tensor::scalar(clip1(tape.value(y_hat).values[0])));
    }
  }

  if (training) {
    Var all = tape.concat(diffs);
    result.loss = tape.mean(tape.mul(all, all));
  }
  return result;
}

std::vector<double> predict_lstm(LstmModel& model,
                                 const data::FusedSequence& sequence) {
  Tape tape;
  auto run = lstm_forward(tape, model, sequence, nullptr, Mode::kEval, nullptr);
  std::vector<double> track;
  track.reserve(run.predictions.size());
  for (Var v : run.predictions) {
    track.push_back(clip1(tape.value(v).values[0]));
  }
  return track;
}

LstmTrainResult train_lstm(const data::TrainView& corpus,
                           std::span<const data::Modality> modalities,
                           LstmConfig config, const TrainOptions& options) {
  auto dims = corpus_dims(corpus.train, modalities);
  std::size_t input_dim = 0;
  for (auto& [m, d] : dims) input_dim += d;
  config.input_dim = input_dim;

  auto train_videos = prepare_videos(corpus.train, modalities, dims, true);
  auto val_videos = prepare_videos(corpus.val, modalities, dims, true);
  if (train_videos.empty() || val_videos.empty()) {
    throw ContractError("lstm: training and validation must be non-empty");
  }

  std::vector<std::size_t> mod_dims;
  std::vector<data::Modality> mods(modalities.begin(), modalities.end());
  for (data::Modality m : mods) mod_dims.push_back(dims.at(m));

  LstmTrainResult result;
  result.model =
      init_lstm(config, mods, mod_dims, derive_seed(options.seed, "lstm-init"));
  LstmModel& model = result.model;
  fit_standardizer(train_videos, &model.norm_mean, &model.norm_scale);

  ad::Optimizer optimizer({options.optimizer, options.learning_rate});
  std::map<std::string, Tensor> best_params;
  double best_ccc = -2.0;
  long best_epoch = -1;

  auto mean_val_ccc = [&](std::vector<PreparedVideo>& videos) {
    double acc = 0.0;
    double loss = 0.0;
    for (auto& v : videos) {
      auto track = predict_lstm(model, v.features);
      acc += metrics::ccc(track, *v.gold);
      loss += metrics::mse(track, *v.gold);
    }
    return std::pair<double, double>{acc / static_cast<double>(videos.size()),
                                     loss / static_cast<double>(videos.size())};
  };

  std::vector<std::size_t> order(train_videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    Rng shuffle_rng = substream(options.seed, "lstm-order", epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double train_loss = 0.0;
    for (std::size_t idx : order) {
      PreparedVideo& video = train_videos[idx];
      Rng stochastic = substream(options.seed, "lstm-stoch",
                                 epoch * 1000003 + idx);
      Tape tape;
      auto run = lstm_forward(tape, model, video.features, video.gold,
                              Mode::kTrain, &stochastic);
      const double loss = tape.scalar_value(run.loss);
      if (!std::isfinite(loss)) {
        throw TrainError("lstm: non-finite loss at epoch " +
                         std::to_string(epoch) + ", video '" +
                         video.video_id + "'");
      }
      train_loss += loss;
      tape.backward(run.loss);
      optimizer.step(model.params, tape.grads());
    }
    train_loss /= static_cast<double>(train_videos.size());

    auto [val_ccc, val_loss] = mean_val_ccc(val_videos);
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

  // final rows evaluate the selected snapshot with the eval-mode code path
  auto [train_ccc_final, train_loss_final] = mean_val_ccc(train_videos);
  auto [val_ccc_final, val_loss_final] = mean_val_ccc(val_videos);
  result.log.push_back(
      {best_epoch, "train-final", train_loss_final, train_ccc_final, true});
  result.log.push_back(
      {best_epoch, "val-final", val_loss_final, val_ccc_final, true});
  return result;
}

}  // namespace valence::nn
