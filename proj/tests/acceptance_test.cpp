// End-to-end acceptance suite. Each case prints one [PASS]/[FAIL] line; the
// expensive seed-7 training runs are shared between the cases that need them.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "oracles.hpp"
#include "valence/aggregation.hpp"
#include "valence/commands.hpp"
#include "valence/data.hpp"
#include "valence/errors.hpp"
#include "valence/gaussian.hpp"
#include "valence/hmm.hpp"
#include "valence/lstm.hpp"
#include "valence/metrics.hpp"
#include "valence/rng.hpp"
#include "valence/smoothing.hpp"
#include "valence/svr.hpp"
#include "valence/synth.hpp"
#include "valence/vrnn.hpp"

using namespace valence;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Frozen regression values from the first verified seed-7 run (criterion 7).
constexpr double kFrozenLstmTestCcc = -1.0;  // set after calibration
constexpr double kFrozenVrnnTestCcc = -1.0;  // set after calibration
constexpr double kFrozenEweLatentCcc = -1.0; // set after calibration
constexpr double kFrozenTolerance = 0.02;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int criterion, const char* what, bool pass,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL",
              criterion, what, detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", criterion, ": ", what, ": ", detail);
}

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("valence_accept_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// Shared seed-7 state for criteria 7 and 8.

struct Seed7Runs {
  double ewe_latent_ccc = 0.0;
  double svr_ccc = 0.0;
  double hmm_ccc = 0.0;
  double lstm_ccc = 0.0;
  double vrnn_ccc = 0.0;
  double lstm_seconds = 0.0;
  double vrnn_seconds = 0.0;
};

const Seed7Runs& seed7_runs() {
  static const Seed7Runs runs = [] {
    Seed7Runs out;
    data::SynthConfig cfg;  // defaults: 60/20/20 videos, T = 200
    auto corpus = data::generate_synthetic_corpus(7, cfg);

    std::vector<data::VideoRecord> train, val, test;
    double ewe_acc = 0.0;
    for (auto& video : corpus.videos) {
      auto filtered = agg::filter_observers(video.observers);
      auto gold = agg::ewe(filtered.kept);
      ewe_acc += metrics::ccc(gold.ewe, video.latent);
      video.record.gold = gold.ewe;
      video.record.gold_sd = gold.sd;
      auto& bucket = video.record.partition == data::Partition::kTrain ? train
                     : video.record.partition == data::Partition::kVal ? val
                                                                       : test;
      bucket.push_back(video.record);
    }
    out.ewe_latent_ccc = ewe_acc / static_cast<double>(corpus.videos.size());

    data::TrainView view{train, val};
    std::vector<data::Modality> mods{data::Modality::kText};
    auto dims = nn::corpus_dims(train, mods);
    auto test_videos = nn::prepare_videos(test, mods, dims, true);
    auto val_videos = nn::prepare_videos(val, mods, dims, true);
    auto train_videos = nn::prepare_videos(train, mods, dims, true);
    auto test_ccc = [&](const std::function<std::vector<double>(
                            const data::FusedSequence&)>& predict) {
      double acc = 0.0;
      for (const auto& v : test_videos) {
        acc += metrics::ccc(predict(v.features), *v.gold);
      }
      return acc / static_cast<double>(test_videos.size());
    };
    auto val_ccc = [&](const std::function<std::vector<double>(
                           const data::FusedSequence&)>& predict) {
      double acc = 0.0;
      for (const auto& v : val_videos) {
        acc += metrics::ccc(predict(v.features), *v.gold);
      }
      return acc / static_cast<double>(val_videos.size());
    };

    // SVR over the full epsilon/cost grid, selected on validation.
    {
      std::vector<double> features, labels;
      for (const auto& v : train_videos) {
        features.insert(features.end(), v.features.features.begin(),
                        v.features.features.end());
        labels.insert(labels.end(), v.gold->begin(), v.gold->end());
      }
      baseline::SvrTrainOptions opt;
      opt.max_passes = 200;
      opt.seed = 7;
      baseline::SvrModel best;
      double best_val = -2.0;
      for (double eps : {0.2, 0.15, 0.1, 0.05}) {
        for (double c : {1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0,
                         30.0, 100.0, 300.0, 1e3}) {
          auto model = baseline::train_svr(features, dims.at(mods[0]), labels,
                                           eps, c, opt);
          const double v = val_ccc([&](const data::FusedSequence& s) {
            return baseline::predict_svr(model, s);
          });
          if (v > best_val) {
            best_val = v;
            best = model;
          }
        }
      }
      out.svr_ccc = test_ccc([&](const data::FusedSequence& s) {
        return baseline::predict_svr(best, s);
      });
    }

    // HMM over the bins/components grid.
    {
      baseline::GmmFitOptions opt;
      opt.seed = 7;
      baseline::HmmModel best;
      double best_val = -2.0;
      for (std::size_t bins : {2u, 4u, 8u}) {
        std::vector<baseline::LabeledSequence> sequences;
        for (const auto& v : train_videos) {
          baseline::LabeledSequence seq;
          seq.dim = v.features.feature_dim();
          seq.features = v.features.features;
          seq.labels = baseline::discretize(*v.gold, bins);
          sequences.push_back(std::move(seq));
        }
        for (std::size_t comps : {1u, 2u, 3u}) {
          auto model = baseline::fit_hmm(sequences, bins, comps, opt);
          const double v = val_ccc([&](const data::FusedSequence& s) {
            return baseline::decode_to_valence(baseline::viterbi(model, s),
                                               model.n_bins);
          });
          if (v > best_val) {
            best_val = v;
            best = model;
          }
        }
      }
      out.hmm_ccc = test_ccc([&](const data::FusedSequence& s) {
        return baseline::decode_to_valence(baseline::viterbi(best, s),
                                           best.n_bins);
      });
    }

    // LSTM, 20 epochs.
    {
      const auto start = Clock::now();
      nn::LstmConfig config;
      nn::TrainOptions options;
      options.max_epochs = 20;
      options.seed = 7;
      auto result = nn::train_lstm(view, mods, config, options);
      out.lstm_seconds = seconds_since(start);
      out.lstm_ccc = test_ccc([&](const data::FusedSequence& s) {
        return nn::predict_lstm(result.model, s);
      });
    }

    // VRNN, same budget.
    {
      const auto start = Clock::now();
      nn::VrnnConfig config;
      nn::TrainOptions options;
      options.max_epochs = 20;
      options.seed = 7;
      auto result = nn::train_vrnn(view, mods, config, options);
      out.vrnn_seconds = seconds_since(start);
      out.vrnn_ccc = test_ccc([&](const data::FusedSequence& s) {
        return nn::predict_vrnn(result.model, s);
      });
    }
    return out;
  }();
  return runs;
}

}  // namespace

TEST_CASE("criterion 1: gradient fidelity") {
  const auto start = Clock::now();
  Rng rng(derive_seed(7, "accept-grad"));
  double worst = 0.0;

  // every primitive in one composite graph
  {
    ad::ParamStore params;
    auto rand_tensor = [&](std::vector<std::size_t> shape, double scale) {
      ad::Tensor t = ad::Tensor::zeros(std::move(shape));
      for (auto& v : t.values) v = rng.normal() * scale;
      return t;
    };
    params.create("a", rand_tensor({6}, 1.0));
    params.create("b", rand_tensor({6}, 0.6));
    params.create("w", rand_tensor({4, 6}, 0.5));
    ad::Tensor mask = ad::Tensor::vector({1, 0, 2, 1, 0.5, 1});
    auto build = [&](ad::ParamStore& p, ad::Tape& tape) {
      ad::Var a = tape.param(p, "a");
      ad::Var b = tape.param(p, "b");
      ad::Var w = tape.param(p, "w");
      ad::Var t1 = tape.tanh(a);
      ad::Var t2 = tape.sigmoid(b);
      ad::Var t3 = tape.relu(tape.sub(a, b));
      ad::Var prod = tape.mul(t1, t2);
      ad::Var quot =
          tape.div(t2, tape.affine(tape.mul(t3, t3), 1.0, 1.2));
      ad::Var cat = tape.concat(std::vector<ad::Var>{
          tape.slice(prod, 0, 3), tape.slice(quot, 3, 3)});
      ad::Var mv = tape.matmul(w, tape.mask_mul(tape.add(prod, quot), mask));
      ad::Var soft = tape.softmax(mv);
      ad::Var logs = tape.log(tape.exp(soft));
      ad::Var stack = tape.stack_rows(std::vector<ad::Var>{cat, cat});
      return tape.add(
          tape.mean(tape.reshape(stack, {12})),
          tape.add(tape.sum(logs), tape.mean(tape.mul(mv, mv))));
    };
    auto loss_fn = [&](ad::ParamStore& p) {
      ad::Tape tape;
      return tape.scalar_value(build(p, tape));
    };
    ad::Tape tape;
    tape.backward(build(params, tape));
    worst = std::max(worst,
                     oracle::max_gradient_error(params, loss_fn, tape.grads()));
  }

  // full LSTM loss, tiny dims, stochasticity pinned
  {
    nn::LstmConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden = 5;
    cfg.mlp_hidden = 6;
    cfg.dropout = 0.0;
    cfg.teacher_forcing = 1.0;
    auto model = nn::init_lstm(
        cfg, std::vector<data::Modality>{data::Modality::kText},
        std::vector<std::size_t>{6}, derive_seed(7, "accept-lstm"));
    data::FusedSequence seq;
    seq.modalities = {data::Modality::kText};
    seq.dims = {6};
    seq.windows = 7;
    seq.features.resize(42);
    for (auto& v : seq.features) v = rng.normal();
    seq.mask.assign(7, 1);
    std::vector<double> gold(7);
    for (auto& v : gold) v = rng.uniform(-0.8, 0.8);

    auto loss_fn = [&](ad::ParamStore& p) {
      nn::LstmModel probe;
      probe.config = cfg;
      probe.params.entries() = p.entries();
      ad::Tape tape;
      auto run = nn::lstm_forward(tape, probe, seq, &gold, nn::Mode::kTrain,
                                  nullptr);
      return tape.scalar_value(run.loss);
    };
    ad::Tape tape;
    auto run =
        nn::lstm_forward(tape, model, seq, &gold, nn::Mode::kTrain, nullptr);
    tape.backward(run.loss);
    worst = std::max(
        worst, oracle::max_gradient_error(model.params, loss_fn, tape.grads()));
  }

  // full VRNN loss, tiny dims, fixed reparameterization noise
  {
    nn::VrnnConfig cfg;
    cfg.modality_dims = {4, 3};
    cfg.hidden = 5;
    cfg.latent = 3;
    cfg.mlp_hidden = 6;
    auto model = nn::init_vrnn(
        cfg,
        std::vector<data::Modality>{data::Modality::kAudio,
                                    data::Modality::kText},
        derive_seed(7, "accept-vrnn"));
    data::FusedSequence seq;
    seq.modalities = {data::Modality::kAudio, data::Modality::kText};
    seq.dims = {4, 3};
    seq.windows = 6;
    seq.features.resize(42);
    for (auto& v : seq.features) v = rng.normal();
    seq.mask.assign(12, 1);
    seq.mask[5] = 0;  // one missing block exercises imputation
    std::vector<double> gold(6);
    for (auto& v : gold) v = rng.uniform(-0.8, 0.8);

    auto loss_fn = [&](ad::ParamStore& p) {
      nn::VrnnModel probe;
      probe.config = cfg;
      probe.modalities = model.modalities;
      probe.params.entries() = p.entries();
      Rng noise(12345);
      ad::Tape tape;
      auto run = nn::vrnn_forward(tape, probe, seq, &gold, nn::Mode::kTrain,
                                  2.5, 0.8, &noise);
      return tape.scalar_value(run.loss);
    };
    Rng noise(12345);
    ad::Tape tape;
    auto run = nn::vrnn_forward(tape, model, seq, &gold, nn::Mode::kTrain, 2.5,
                                0.8, &noise);
    tape.backward(run.loss);
    worst = std::max(
        worst, oracle::max_gradient_error(model.params, loss_fn, tape.grads()));
  }

  const double elapsed = seconds_since(start);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max relative error %.3e, %.1fs",
                worst, elapsed);
  report(1, "gradient fidelity vs central finite differences",
         worst <= 1e-4 && elapsed <= 60.0, detail);
}

TEST_CASE("criterion 2: viterbi equals exhaustive search") {
  const auto start = Clock::now();
  Rng rng(derive_seed(7, "accept-viterbi"));
  std::size_t mismatches = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n_bins = rep % 3 == 0 ? 2 : 4;
    const auto t_count = static_cast<std::size_t>(rng.uniform_int(2, 8));
    baseline::HmmModel model;
    model.n_bins = n_bins;
    model.n_components = 1;
    model.feature_dim = 2;
    model.initial.resize(n_bins);
    model.transition.resize(n_bins * n_bins);
    double acc = 0.0;
    for (auto& v : model.initial) {
      v = rng.uniform(0.05, 1.0);
      acc += v;
    }
    for (auto& v : model.initial) v /= acc;
    for (std::size_t b = 0; b < n_bins; ++b) {
      double row = 0.0;
      for (std::size_t b2 = 0; b2 < n_bins; ++b2) {
        model.transition[b * n_bins + b2] = rng.uniform(0.05, 1.0);
        row += model.transition[b * n_bins + b2];
      }
      for (std::size_t b2 = 0; b2 < n_bins; ++b2) {
        model.transition[b * n_bins + b2] /= row;
      }
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
      baseline::Gmm g;
      g.components = 1;
      g.dim = 2;
      g.weights = {1.0};
      g.means = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
      g.variances = {rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)};
      model.emissions.push_back(std::move(g));
    }
    std::vector<double> feats(t_count * 2);
    for (auto& v : feats) v = rng.uniform(-2.5, 2.5);

    auto decoded = baseline::viterbi(model, feats, 2);

    // exhaustive argmax with the same accumulation order and tie-break
    std::vector<double> emis(t_count * n_bins), log_init(n_bins),
        log_trans(n_bins * n_bins);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::size_t b = 0; b < n_bins; ++b) {
        emis[t * n_bins + b] = model.emissions[b].log_density(
            std::span<const double>(feats.data() + t * 2, 2));
      }
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
      log_init[b] = std::log(model.initial[b]);
    }
    for (std::size_t i = 0; i < n_bins * n_bins; ++i) {
      log_trans[i] = std::log(model.transition[i]);
    }
    std::vector<std::size_t> seq(t_count, 0), best_seq;
    double best = 0.0;
    bool first = true;
    auto reversed_less = [](const std::vector<std::size_t>& a,
                            const std::vector<std::size_t>& b) {
      for (std::size_t i = a.size(); i > 0; --i) {
        if (a[i - 1] != b[i - 1]) return a[i - 1] < b[i - 1];
      }
      return false;
    };
    while (true) {
      double score = log_init[seq[0]] + emis[seq[0]];
      for (std::size_t t = 1; t < t_count; ++t) {
        score = (score + log_trans[seq[t - 1] * n_bins + seq[t]]) +
                emis[t * n_bins + seq[t]];
      }
      if (first || score > best ||
          (score == best && reversed_less(seq, best_seq))) {
        best = score;
        best_seq = seq;
        first = false;
      }
      std::size_t pos = 0;
      while (pos < t_count && ++seq[pos] == n_bins) {
        seq[pos] = 0;
        ++pos;
      }
      if (pos == t_count) break;
    }
    if (decoded != best_seq) ++mismatches;
  }
  const double elapsed = seconds_since(start);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%zu/200 mismatches, %.1fs",
                mismatches, elapsed);
  report(2, "viterbi oracle equivalence", mismatches == 0 && elapsed <= 30.0,
         detail);
}

TEST_CASE("criterion 3: product-of-gaussians vs trapezoid integration") {
  Rng rng(derive_seed(7, "accept-poe"));
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto factors = static_cast<std::size_t>(rng.uniform_int(0, 2));
    std::vector<double> means{rng.uniform(-2.0, 2.0)};
    std::vector<double> vars{rng.uniform(0.3, 2.5)};
    std::vector<ad::DiagGaussian> gs;
    for (std::size_t i = 0; i < factors; ++i) {
      means.push_back(rng.uniform(-2.0, 2.0));
      vars.push_back(rng.uniform(0.3, 2.5));
      gs.emplace_back(ad::Tensor::vector({means.back()}),
                      ad::Tensor::vector({vars.back()}));
    }
    ad::DiagGaussian prior(ad::Tensor::vector({means[0]}),
                           ad::Tensor::vector({vars[0]}));
    auto fused = nn::poe_fuse(prior, gs);
    auto ref = oracle::product_density_moments(means, vars, 4001);
    worst = std::max(worst, std::fabs(fused.mean.values[0] - ref.mean));
    worst = std::max(worst, std::fabs(fused.variance.values[0] - ref.variance));
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "max moment error %.3e", worst);
  report(3, "poe analytic moments match quadrature", worst <= 1e-6, detail);
}

TEST_CASE("criterion 4: metric oracles") {
  Rng rng(derive_seed(7, "accept-metrics"));
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(5, 60));
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    worst = std::max(worst, std::fabs(metrics::ccc(x, y) - oracle::ccc(x, y)));
    worst = std::max(worst,
                     std::fabs(metrics::pearson(x, y) - oracle::pearson(x, y)));
    worst = std::max(worst, std::fabs(metrics::mse(x, y) - oracle::mse(x, y)));
  }
  std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  const double anchor = std::fabs(metrics::ccc(a, b) - 4.0 / 7.0);
  const double self = std::fabs(metrics::ccc(a, a) - 1.0);
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "max oracle gap %.3e, anchors %.3e / %.3e", worst, anchor,
                self);
  report(4, "ccc/pearson/mse match direct formulas",
         worst <= 1e-12 && anchor <= 1e-12 && self <= 1e-12, detail);
}

TEST_CASE("criterion 5: ewe properties") {
  Rng rng(derive_seed(7, "accept-ewe"));
  bool fixed_point = true, translation = true, independence = true;

  auto make_track = [&](const std::string& id, std::size_t len) {
    agg::RatingTrack t;
    t.observer_id = id;
    t.video_id = "v";
    t.checks_correct = 2;
    t.made_changes = true;
    t.samples.resize(len);
    for (auto& v : t.samples) v = rng.uniform(-1.0, 1.0);
    return t;
  };

  for (int rep = 0; rep < 50; ++rep) {
    // identical-rater fixed point, exact
    agg::RatingTrack shared = make_track("a", 20);
    std::vector<agg::RatingTrack> same{shared, shared, shared};
    same[1].observer_id = "b";
    same[2].observer_id = "c";
    auto gold = agg::ewe(same);
    if (gold.ewe != shared.samples) fixed_point = false;

    // translation consistency to 1e-12
    std::vector<agg::RatingTrack> tracks;
    for (int j = 0; j < 6; ++j) {
      tracks.push_back(make_track("o" + std::to_string(j), 15));
    }
    auto base = agg::ewe(tracks);
    const double c = rng.uniform(-0.4, 0.4);
    auto shifted = tracks;
    for (auto& t : shifted) {
      for (auto& v : t.samples) v += c;
    }
    auto moved = agg::ewe(shifted);
    for (std::size_t i = 0; i < base.ewe.size(); ++i) {
      if (std::fabs(moved.ewe[i] - (base.ewe[i] + c)) > 1e-12) {
        translation = false;
      }
    }

    // leave-one-out independence, bit-identical
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, 5));
    auto reduced = [&](const std::vector<agg::RatingTrack>& ts) {
      std::vector<agg::RatingTrack> rest;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i != j) rest.push_back(ts[i]);
      }
      return agg::ewe(rest).ewe;
    };
    auto before = reduced(tracks);
    auto perturbed = tracks;
    for (auto& v : perturbed[j].samples) v = rng.uniform(-1.0, 1.0);
    if (reduced(perturbed) != before) independence = false;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "fixed point %d, translation %d, independence %d",
                fixed_point, translation, independence);
  report(5, "ewe fixed point, translation, leave-one-out independence",
         fixed_point && translation && independence, detail);
}

TEST_CASE("criterion 6: hmm recovery on disjoint emissions") {
  // noise-free corpus: each bin emits its own constant feature vector
  Rng rng(derive_seed(7, "accept-hmm"));
  const std::size_t n_bins = 4;
  auto make_sequence = [&](std::size_t t_count) {
    baseline::LabeledSequence seq;
    seq.dim = 3;
    std::size_t state = static_cast<std::size_t>(rng.uniform_int(0, 3));
    for (std::size_t t = 0; t < t_count; ++t) {
      if (rng.uniform() < 0.2) {
        state = static_cast<std::size_t>(rng.uniform_int(0, 3));
      }
      seq.labels.push_back(state);
      seq.features.push_back(static_cast<double>(state) * 2.0 - 3.0);
      seq.features.push_back(state == 1 ? 1.0 : -1.0);
      seq.features.push_back(state == 2 ? 2.0 : 0.5);
    }
    return seq;
  };
  std::vector<baseline::LabeledSequence> train_seqs;
  for (int i = 0; i < 12; ++i) train_seqs.push_back(make_sequence(80));
  baseline::GmmFitOptions options;
  options.seed = 7;
  auto model = baseline::fit_hmm(train_seqs, n_bins, 1, options);

  std::size_t correct = 0, total = 0;
  for (int i = 0; i < 6; ++i) {
    auto held_out = make_sequence(80);
    auto decoded = baseline::viterbi(model, held_out.features, 3);
    for (std::size_t t = 0; t < decoded.size(); ++t) {
      correct += decoded[t] == held_out.labels[t];
      ++total;
    }
  }
  const double accuracy =
      static_cast<double>(correct) / static_cast<double>(total);
  char detail[64];
  std::snprintf(detail, sizeof(detail), "frame accuracy %.4f", accuracy);
  report(6, "viterbi frame accuracy on held-out noise-free videos",
         accuracy >= 0.99, detail);
}

TEST_CASE("criterion 7: seed-7 end-to-end regression") {
  const Seed7Runs& runs = seed7_runs();
  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "ewe-latent %.3f, lstm %.3f (%.0fs), vrnn %.3f (%.0fs)",
                runs.ewe_latent_ccc, runs.lstm_ccc, runs.lstm_seconds,
                runs.vrnn_ccc, runs.vrnn_seconds);
  const bool lstm_ok = runs.lstm_ccc >= 0.5 && runs.lstm_seconds <= 600.0;
  const bool vrnn_ok = runs.vrnn_ccc >= runs.lstm_ccc - 0.1 &&
                       runs.vrnn_seconds <= 600.0;
  const bool frozen_ok =
      std::fabs(runs.lstm_ccc - kFrozenLstmTestCcc) <= kFrozenTolerance &&
      std::fabs(runs.vrnn_ccc - kFrozenVrnnTestCcc) <= kFrozenTolerance &&
      std::fabs(runs.ewe_latent_ccc - kFrozenEweLatentCcc) <= kFrozenTolerance;
  report(7, "lstm >= 0.5 in 20 epochs, vrnn within 0.1, frozen regression",
         lstm_ok && vrnn_ok && frozen_ok, detail);
}

TEST_CASE("criterion 8: neural models beat the baselines by 0.1") {
  const Seed7Runs& runs = seed7_runs();
  const double base = std::max(runs.svr_ccc, runs.hmm_ccc);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "svr %.3f, hmm %.3f, lstm %.3f, vrnn %.3f", runs.svr_ccc,
                runs.hmm_ccc, runs.lstm_ccc, runs.vrnn_ccc);
  report(8, "lstm and vrnn exceed svr and hmm by >= 0.1",
         runs.lstm_ccc >= base + 0.1 && runs.vrnn_ccc >= base + 0.1, detail);
}

TEST_CASE("criterion 9: pipeline determinism") {
  auto run_pipeline = [](const std::string& tag) {
    auto dir = temp_dir(tag);
    cli::SynthArgs synth;
    synth.out = dir;
    synth.seed = 7;
    synth.overrides.set("synth.targets.train", "6");
    synth.overrides.set("synth.targets.val", "2");
    synth.overrides.set("synth.targets.test", "2");
    synth.overrides.set("synth.videos_per_target", "2");
    synth.overrides.set("synth.windows", "60");
    cli::cmd_synth(synth);

    cli::AggregateArgs agg_args;
    agg_args.ratings = dir / "ratings.csv";
    agg_args.manifest = dir / "manifest.csv";
    agg_args.out = dir;
    cli::cmd_aggregate(agg_args);

    std::vector<fs::path> report_inputs;
    for (const char* model : {"svr", "hmm"}) {
      cli::TrainArgs train;
      train.corpus = dir;
      train.model = model;
      train.modalities = "T";
      train.seed = 7;
      train.out = dir / model;
      train.overrides.set("svr.max_passes", "80");
      train.overrides.set("hmm.em_iterations", "50");
      cli::cmd_train(train);

      cli::EvalArgs eval;
      eval.model_file = dir / model / "model.bin";
      eval.corpus = dir;
      eval.partition = "test";
      eval.out = dir / model / "eval";
      cli::cmd_eval(eval);
      report_inputs.push_back(dir / model / "eval" / "eval.json");
    }
    report_inputs.push_back(dir / "human_test.json");
    cli::ReportArgs rep;
    rep.inputs = report_inputs;
    rep.out = dir / "report";
    cli::cmd_report(rep);

    std::vector<char> all;
    for (const auto& name :
         {fs::path("report") / "report.txt", fs::path("report") / "report.csv",
          fs::path("svr") / "eval" / "eval.json",
          fs::path("hmm") / "eval" / "eval.json",
          fs::path("svr") / "model.bin", fs::path("hmm") / "model.bin",
          fs::path("gold.csv")}) {
      auto bytes = slurp(dir / name);
      all.insert(all.end(), bytes.begin(), bytes.end());
    }
    fs::remove_all(dir);
    return all;
  };
  const auto first = run_pipeline("det_a");
  const auto second = run_pipeline("det_b");
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%zu bytes compared", first.size());
  report(9, "synth-aggregate-train-eval-report twice is byte-identical",
         !first.empty() && first == second, detail);
}

TEST_CASE("criterion 10: partition integrity") {
  // published shape: 114/40/39 videos from 29/10/10 targets
  data::Corpus published;
  auto add = [&](std::vector<data::VideoRecord>& bucket, std::size_t videos,
                 std::size_t targets, const std::string& prefix) {
    for (std::size_t i = 0; i < videos; ++i) {
      data::VideoRecord r;
      r.video_id = prefix + "v" + std::to_string(i);
      r.target_id = prefix + "t" + std::to_string(i % targets);
      r.duration_s = 135.0;
      bucket.push_back(std::move(r));
    }
  };
  add(published.train, 114, 29, "tr");
  add(published.val, 40, 10, "va");
  add(published.test, 39, 10, "te");
  auto published_report = data::check_partitions(published);
  auto fr = published_report.video_fractions();
  const bool fractions_ok = std::lround(fr[0] * 100) == 59 &&
                            std::lround(fr[1] * 100) == 21 &&
                            std::lround(fr[2] * 100) == 20 &&
                            published_report.disjoint() &&
                            published_report.per_partition[0].targets == 29 &&
                            published_report.per_partition[1].targets == 10 &&
                            published_report.per_partition[2].targets == 10;

  Rng rng(derive_seed(7, "accept-partitions"));
  std::size_t detected = 0;
  const std::size_t trials = 1000;
  for (std::size_t rep = 0; rep < trials; ++rep) {
    data::Corpus corpus;
    const auto targets = static_cast<std::size_t>(rng.uniform_int(2, 20));
    for (std::size_t t = 0; t < targets; ++t) {
      const auto part = static_cast<data::Partition>(rng.uniform_int(0, 2));
      const auto videos = static_cast<std::size_t>(rng.uniform_int(1, 5));
      for (std::size_t v = 0; v < videos; ++v) {
        data::VideoRecord r;
        r.target_id = "t" + std::to_string(t);
        r.video_id = r.target_id + "_v" + std::to_string(v);
        r.partition = part;
        r.duration_s = rng.uniform(10.0, 300.0);
        auto& bucket = part == data::Partition::kTrain  ? corpus.train
                       : part == data::Partition::kVal ? corpus.val
                                                       : corpus.test;
        bucket.push_back(std::move(r));
      }
    }
    // inject one cross-partition target (into a partition it does not live in)
    const auto victim = "t" + std::to_string(rng.uniform_int(
                                  0, static_cast<std::int64_t>(targets) - 1));
    bool lives_in_train = false;
    for (const auto& r : corpus.train) {
      if (r.target_id == victim) lives_in_train = true;
    }
    data::VideoRecord leak;
    leak.target_id = victim;
    leak.video_id = "leak";
    leak.duration_s = 42.0;
    if (lives_in_train) {
      leak.partition = data::Partition::kTest;
      corpus.test.push_back(std::move(leak));
    } else {
      leak.partition = data::Partition::kTrain;
      corpus.train.push_back(std::move(leak));
    }
    auto report_r = data::check_partitions(corpus);
    if (!report_r.disjoint() && report_r.violations.count(victim)) {
      ++detected;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "fractions ok %d, %zu/%zu violations caught", fractions_ok,
                detected, trials);
  report(10, "published fractions reproduced, injected leaks always flagged",
         fractions_ok && detected == trials, detail);
}
