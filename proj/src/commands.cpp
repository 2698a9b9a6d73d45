#include "valence/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "valence/aggregation.hpp"
#include "valence/csv.hpp"
#include "valence/data.hpp"
#include "valence/errors.hpp"
#include "valence/hmm.hpp"
#include "valence/lstm.hpp"
#include "valence/metrics.hpp"
#include "valence/model_io.hpp"
#include "valence/rng.hpp"
#include "valence/smoothing.hpp"
#include "valence/svr.hpp"
#include "valence/synth.hpp"
#include "valence/vrnn.hpp"

namespace valence::cli {

namespace fs = std::filesystem;

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& corpus) {
  if (fs::is_directory(corpus)) return corpus / "manifest.csv";
  return corpus;
}

KeyValues resolve_settings(const std::filesystem::path& config_file,
                           const KeyValues& overrides) {
  KeyValues settings;
  if (!config_file.empty()) {
    settings = KeyValues::from_file(config_file);
  }
  settings.merge(overrides);
  return settings;
}

void write_training_log(const std::filesystem::path& path,
                        const nn::TrainLog& log) {
  csv::Writer w(path);
  w.row({"epoch", "split", "loss", "ccc"});
  for (const auto& row : log) {
    w.row({std::to_string(row.epoch), row.split,
           csv::format_double(row.loss),
           row.has_ccc ? csv::format_double(row.ccc) : ""});
  }
}

struct WindowMatrix {
  std::vector<double> features;
  std::vector<double> labels;
  std::size_t dim = 0;
};

WindowMatrix stack_windows(const std::vector<nn::PreparedVideo>& videos) {
  WindowMatrix out;
  if (videos.empty()) return out;
  out.dim = videos[0].features.feature_dim();
  for (const auto& v : videos) {
    out.features.insert(out.features.end(), v.features.features.begin(),
                        v.features.features.end());
    out.labels.insert(out.labels.end(), v.gold->begin(), v.gold->end());
  }
  return out;
}

double mean_ccc(const std::vector<nn::PreparedVideo>& videos,
                const std::function<std::vector<double>(
                    const data::FusedSequence&)>& predict,
                double* mse_out = nullptr) {
  double ccc_acc = 0.0;
  double mse_acc = 0.0;
  for (const auto& v : videos) {
    auto track = predict(v.features);
    ccc_acc += metrics::ccc(track, *v.gold);
    mse_acc += metrics::mse(track, *v.gold);
  }
  const auto n = static_cast<double>(videos.size());
  if (mse_out) *mse_out = mse_acc / n;
  return ccc_acc / n;
}

struct TrainedBundle {
  io::ModelFile file;
  nn::TrainLog log;
  KeyValues resolved;  // the hyperparameters that actually applied
};

TrainedBundle train_svr_cmd(const data::TrainView& view,
                            std::span<const data::Modality> mods,
                            std::uint64_t seed, const KeyValues& settings) {
  auto dims = nn::corpus_dims(view.train, mods);
  auto train_videos = nn::prepare_videos(view.train, mods, dims, true);
  auto val_videos = nn::prepare_videos(view.val, mods, dims, true);
  WindowMatrix matrix = stack_windows(train_videos);

  baseline::SvrTrainOptions options;
  options.max_passes = settings.get_size("svr.max_passes", 400);
  options.seed = seed;

  // epsilon descending so ties keep the wider (simpler) tube
  const std::vector<double> epsilons{0.2, 0.15, 0.1, 0.05};
  const std::vector<double> costs{1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0,
                                  3.0,  10.0, 30.0, 100.0, 300.0, 1e3};
  TrainedBundle bundle;
  baseline::SvrModel best;
  double best_ccc = -2.0;
  long grid_index = 0;
  for (double eps : epsilons) {
    for (double c : costs) {
      auto model = baseline::train_svr(matrix.features, matrix.dim,
                                       matrix.labels, eps, c, options);
      double val_mse = 0.0;
      const double val_ccc = mean_ccc(
          val_videos,
          [&](const data::FusedSequence& s) {
            return baseline::predict_svr(model, s);
          },
          &val_mse);
      bundle.log.push_back({grid_index, "grid", val_mse, val_ccc, true});
      if (val_ccc > best_ccc) {
        best_ccc = val_ccc;
        best = model;
      }
      ++grid_index;
    }
  }
  auto predict = [&](const data::FusedSequence& s) {
    return baseline::predict_svr(best, s);
  };
  double train_mse = 0.0, val_mse = 0.0;
  const double train_ccc = mean_ccc(train_videos, predict, &train_mse);
  const double val_ccc = mean_ccc(val_videos, predict, &val_mse);
  bundle.log.push_back({-1, "train-final", train_mse, train_ccc, true});
  bundle.log.push_back({-1, "val-final", val_mse, val_ccc, true});

  bundle.file = io::pack(best, mods, dims);
  bundle.resolved.set("svr.max_passes",
                      std::to_string(options.max_passes));
  bundle.resolved.set("svr.selected_epsilon", csv::format_double(best.epsilon));
  bundle.resolved.set("svr.selected_c", csv::format_double(best.c));
  return bundle;
}

TrainedBundle train_hmm_cmd(const data::TrainView& view,
                            std::span<const data::Modality> mods,
                            std::uint64_t seed, const KeyValues& settings) {
  auto dims = nn::corpus_dims(view.train, mods);
  auto train_videos = nn::prepare_videos(view.train, mods, dims, true);
  auto val_videos = nn::prepare_videos(view.val, mods, dims, true);

  baseline::GmmFitOptions options;
  options.max_iterations = settings.get_size("hmm.em_iterations", 200);
  options.tol = settings.get_double("hmm.em_tol", 1e-6);
  options.variance_floor = settings.get_double("hmm.variance_floor", 1e-6);
  options.seed = seed;

  TrainedBundle bundle;
  baseline::HmmModel best;
  double best_ccc = -2.0;
  long grid_index = 0;
  for (std::size_t n_bins : {2u, 4u, 8u}) {
    std::vector<baseline::LabeledSequence> sequences;
    for (const auto& v : train_videos) {
      baseline::LabeledSequence seq;
      seq.dim = v.features.feature_dim();
      seq.features = v.features.features;
      seq.labels = baseline::discretize(*v.gold, n_bins);
      sequences.push_back(std::move(seq));
    }
    for (std::size_t components : {1u, 2u, 3u}) {
      auto model = baseline::fit_hmm(sequences, n_bins, components, options);
      double val_mse = 0.0;
      const double val_ccc = mean_ccc(
          val_videos,
          [&](const data::FusedSequence& s) {
            auto bins = baseline::viterbi(model, s);
            return baseline::decode_to_valence(bins, model.n_bins);
          },
          &val_mse);
      bundle.log.push_back({grid_index, "grid", val_mse, val_ccc, true});
      if (val_ccc > best_ccc) {
        best_ccc = val_ccc;
        best = model;
      }
      ++grid_index;
    }
  }
  auto predict = [&](const data::FusedSequence& s) {
    auto bins = baseline::viterbi(best, s);
    return baseline::decode_to_valence(bins, best.n_bins);
  };
  double train_mse = 0.0, val_mse = 0.0;
  const double train_ccc = mean_ccc(train_videos, predict, &train_mse);
  const double val_ccc = mean_ccc(val_videos, predict, &val_mse);
  bundle.log.push_back({-1, "train-final", train_mse, train_ccc, true});
  bundle.log.push_back({-1, "val-final", val_mse, val_ccc, true});

  bundle.file = io::pack(best, mods, dims);
  bundle.resolved.set("hmm.em_iterations",
                      std::to_string(options.max_iterations));
  bundle.resolved.set("hmm.selected_bins", std::to_string(best.n_bins));
  bundle.resolved.set("hmm.selected_components",
                      std::to_string(best.n_components));
  return bundle;
}

nn::TrainOptions neural_options(const std::string& prefix,
                                std::uint64_t seed,
                                const KeyValues& settings) {
  nn::TrainOptions options;
  options.max_epochs = settings.get_size(prefix + ".epochs", 20);
  options.patience = settings.get_size(prefix + ".patience", 5);
  options.learning_rate = settings.get_double(prefix + ".lr", 1e-3);
  options.seed = seed;
  return options;
}

void note_neural_options(KeyValues& resolved, const std::string& prefix,
                         const nn::TrainOptions& options) {
  resolved.set(prefix + ".epochs", std::to_string(options.max_epochs));
  resolved.set(prefix + ".patience", std::to_string(options.patience));
  resolved.set(prefix + ".lr", csv::format_double(options.learning_rate));
}

TrainedBundle train_lstm_cmd(const data::TrainView& view,
                             std::span<const data::Modality> mods,
                             std::uint64_t seed, const KeyValues& settings) {
  nn::LstmConfig config;
  config.hidden = settings.get_size("lstm.hidden", 64);
  config.attn_window = settings.get_size("lstm.attn_window", 3);
  config.mlp_hidden = settings.get_size("lstm.mlp_hidden", 64);
  config.dropout = settings.get_double("lstm.dropout", 0.1);
  config.teacher_forcing = settings.get_double("lstm.teacher_forcing", 0.5);
  auto options = neural_options("lstm", seed, settings);

  auto result = nn::train_lstm(view, mods, config, options);
  TrainedBundle bundle;
  bundle.file = io::pack(result.model);
  bundle.log = std::move(result.log);
  bundle.resolved.set("lstm.hidden", std::to_string(config.hidden));
  bundle.resolved.set("lstm.attn_window", std::to_string(config.attn_window));
  bundle.resolved.set("lstm.mlp_hidden", std::to_string(config.mlp_hidden));
  bundle.resolved.set("lstm.dropout", csv::format_double(config.dropout));
  bundle.resolved.set("lstm.teacher_forcing",
                      csv::format_double(config.teacher_forcing));
  note_neural_options(bundle.resolved, "lstm", options);
  return bundle;
}

TrainedBundle train_vrnn_cmd(const data::TrainView& view,
                             std::span<const data::Modality> mods,
                             std::uint64_t seed, const KeyValues& settings) {
  nn::VrnnConfig config;
  config.hidden = settings.get_size("vrnn.hidden", 64);
  config.latent = settings.get_size("vrnn.latent", 32);
  config.mlp_hidden = settings.get_size("vrnn.mlp_hidden", 64);
  config.alpha_final = settings.get_double("vrnn.alpha", 10.0);
  config.beta_final = settings.get_double("vrnn.beta", 1.0);
  config.anneal_epochs = settings.get_size("vrnn.anneal_epochs", 10);
  config.lambda0 = settings.get_double("vrnn.lambda0", 1.0);
  auto options = neural_options("vrnn", seed, settings);

  auto result = nn::train_vrnn(view, mods, config, options);
  TrainedBundle bundle;
  bundle.file = io::pack(result.model);
  bundle.log = std::move(result.log);
  bundle.resolved.set("vrnn.hidden", std::to_string(config.hidden));
  bundle.resolved.set("vrnn.latent", std::to_string(config.latent));
  bundle.resolved.set("vrnn.mlp_hidden", std::to_string(config.mlp_hidden));
  bundle.resolved.set("vrnn.alpha", csv::format_double(config.alpha_final));
  bundle.resolved.set("vrnn.beta", csv::format_double(config.beta_final));
  bundle.resolved.set("vrnn.anneal_epochs",
                      std::to_string(config.anneal_epochs));
  bundle.resolved.set("vrnn.lambda0", csv::format_double(config.lambda0));
  note_neural_options(bundle.resolved, "vrnn", options);
  return bundle;
}

}  // namespace

void cmd_synth(const SynthArgs& args) {
  KeyValues settings = resolve_settings(args.config, args.overrides);
  data::SynthConfig config;
  config.targets_per_partition[0] =
      settings.get_size("synth.targets.train", config.targets_per_partition[0]);
  config.targets_per_partition[1] =
      settings.get_size("synth.targets.val", config.targets_per_partition[1]);
  config.targets_per_partition[2] =
      settings.get_size("synth.targets.test", config.targets_per_partition[2]);
  config.videos_per_target =
      settings.get_size("synth.videos_per_target", config.videos_per_target);
  config.windows = settings.get_size("synth.windows", config.windows);
  config.text_readout_sd =
      settings.get_double("synth.text_readout_sd", config.text_readout_sd);
  config.audio_readout_sd =
      settings.get_double("synth.audio_readout_sd", config.audio_readout_sd);
  config.visual_readout_sd =
      settings.get_double("synth.visual_readout_sd", config.visual_readout_sd);
  config.observer_noise_sd =
      settings.get_double("synth.observer_noise_sd", config.observer_noise_sd);
  config.text_period_s =
      settings.get_double("synth.text_period_s", config.text_period_s);
  config.common_noise_dims =
      settings.get_size("synth.common_noise_dims", config.common_noise_dims);
  config.common_noise_scale = settings.get_double("synth.common_noise_scale",
                                                  config.common_noise_scale);

  auto corpus = data::generate_synthetic_corpus(args.seed, config);
  data::write_corpus(corpus, args.out);
  std::printf("wrote %zu videos to %s\n", corpus.videos.size(),
              args.out.string().c_str());
}

void cmd_aggregate(const AggregateArgs& args) {
  data::Corpus manifest = data::load_manifest(args.manifest);
  std::map<std::string, data::Partition> partition_of;
  for (const auto* r : manifest.all()) {
    partition_of[r->video_id] = r->partition;
  }

  auto by_video = agg::load_ratings(args.ratings);
  for (const auto& [video_id, tracks] : by_video) {
    if (!partition_of.count(video_id)) {
      throw DataError("ratings reference video '" + video_id +
                      "' absent from the manifest");
    }
  }

  fs::create_directories(args.out);
  std::vector<agg::Exclusion> exclusions;
  std::vector<agg::GoldStandard> gold;
  std::map<std::string, std::vector<agg::RatingTrack>> kept_by_video;
  std::vector<std::string> insufficient;
  for (auto& [video_id, tracks] : by_video) {
    auto filtered = agg::filter_observers(tracks);
    exclusions.insert(exclusions.end(), filtered.excluded.begin(),
                      filtered.excluded.end());
    if (filtered.kept.empty()) {
      insufficient.push_back(video_id);
      continue;
    }
    gold.push_back(agg::ewe(filtered.kept));
    kept_by_video[video_id] = std::move(filtered.kept);
  }
  agg::write_gold_csv(args.out / "gold.csv", gold);
  agg::write_exclusions_csv(args.out / "exclusions.csv", exclusions);

  auto benchmark = agg::leave_one_out_benchmark(kept_by_video);
  insufficient.insert(insufficient.end(), benchmark.skipped.begin(),
                      benchmark.skipped.end());
  std::sort(insufficient.begin(), insufficient.end());

  for (data::Partition p :
       {data::Partition::kTrain, data::Partition::kVal,
        data::Partition::kTest}) {
    EvalReport report;
    report.model = "human";
    report.modalities = "ATV";
    report.partition = data::to_string(p);
    for (const auto& [video_id, score] : benchmark.per_video) {
      if (partition_of.at(video_id) == p) report.per_video[video_id] = score;
    }
    if (report.per_video.empty()) continue;
    auto summary = metrics::summarize(report.per_video);
    report.mean = summary.mean;
    report.sd = summary.sd;
    report.fingerprint =
        fingerprint("human", "ATV", 0, KeyValues{});
    write_eval_json(args.out / ("human_" + report.partition + ".json"),
                    report);
    std::printf("human %s: %s over %zu videos\n", report.partition.c_str(),
                metrics::format_mean_sd(report.mean, report.sd).c_str(),
                report.per_video.size());
  }
  if (!insufficient.empty()) {
    std::printf("insufficient observers:");
    for (const auto& v : insufficient) std::printf(" %s", v.c_str());
    std::printf("\n");
  }
}

void cmd_partition_check(const PartitionCheckArgs& args) {
  const auto path = manifest_path(args.manifest);
  data::Corpus corpus;
  // use full loading when feature files are present so class ratios appear
  bool has_features = false;
  for (data::Modality m : data::kAllModalities) {
    if (fs::exists(path.parent_path() /
                   ("features_" + data::to_string(m) + ".csv"))) {
      has_features = true;
    }
  }
  corpus = has_features ? data::load_corpus(path) : data::load_manifest(path);
  auto report = data::check_partitions(corpus);
  std::fputs(data::render(report).c_str(), stdout);
}

void cmd_train(const TrainArgs& args) {
  const io::ModelKind kind = io::model_kind_from_string(args.model);
  KeyValues settings = resolve_settings(args.config, args.overrides);
  auto mods = data::parse_modalities(args.modalities);
  data::Corpus corpus = data::load_corpus(manifest_path(args.corpus));
  if (corpus.train.empty() || corpus.val.empty()) {
    throw DataError("training needs non-empty train and val partitions");
  }
  // Only the train/val handles ever reach the model code.
  data::TrainView view = data::training_view(corpus);

  TrainedBundle bundle;
  switch (kind) {
    case io::ModelKind::kSvr:
      bundle = train_svr_cmd(view, mods, args.seed, settings);
      break;
    case io::ModelKind::kHmm:
      bundle = train_hmm_cmd(view, mods, args.seed, settings);
      break;
    case io::ModelKind::kLstm:
      bundle = train_lstm_cmd(view, mods, args.seed, settings);
      break;
    case io::ModelKind::kVrnn:
      bundle = train_vrnn_cmd(view, mods, args.seed, settings);
      break;
  }

  fs::create_directories(args.out);
  write_model_file(args.out / "model.bin", bundle.file);
  write_training_log(args.out / "training_log.csv", bundle.log);

  std::ofstream meta(args.out / "run.txt");
  meta << "model=" << args.model << "\nmodalities=" << args.modalities
       << "\nseed=" << args.seed << "\nfingerprint="
       << fingerprint(args.model, args.modalities, args.seed, bundle.resolved)
       << "\n";
  for (const auto& [k, v] : bundle.resolved.entries()) {
    meta << k << "=" << v << "\n";
  }
  std::printf("wrote %s\n", (args.out / "model.bin").string().c_str());
}

EvalReport cmd_eval(const EvalArgs& args) {
  auto parsed_partition = data::partition_from_string(args.partition);
  if (!parsed_partition) {
    throw UsageError("unknown partition '" + args.partition +
                     "' (use train, val or test)");
  }
  io::ModelFile mf = io::read_model_file(args.model_file);
  data::Corpus corpus = data::load_corpus(manifest_path(args.corpus));
  for (data::Modality m : mf.modalities) {
    if (std::find(corpus.available_modalities.begin(),
                  corpus.available_modalities.end(),
                  m) == corpus.available_modalities.end()) {
      throw DataError("model needs modality " + data::to_string(m) +
                      " but the corpus has no features_" + data::to_string(m) +
                      ".csv");
    }
  }
  const auto& videos = corpus.partition(*parsed_partition);
  if (videos.empty()) {
    throw DataError("partition '" + args.partition + "' is empty");
  }
  auto prepared =
      nn::prepare_videos(videos, mf.modalities, mf.modality_dims(), true);

  std::function<std::vector<double>(const data::FusedSequence&)> predict;
  baseline::SvrModel svr;
  baseline::HmmModel hmm;
  nn::LstmModel lstm;
  nn::VrnnModel vrnn;
  switch (mf.kind) {
    case io::ModelKind::kSvr:
      svr = io::unpack_svr(mf);
      predict = [&](const data::FusedSequence& s) {
        return baseline::predict_svr(svr, s);
      };
      break;
    case io::ModelKind::kHmm:
      hmm = io::unpack_hmm(mf);
      predict = [&](const data::FusedSequence& s) {
        return baseline::decode_to_valence(baseline::viterbi(hmm, s),
                                           hmm.n_bins);
      };
      break;
    case io::ModelKind::kLstm:
      lstm = io::unpack_lstm(mf);
      predict = [&](const data::FusedSequence& s) {
        return nn::predict_lstm(lstm, s);
      };
      break;
    case io::ModelKind::kVrnn:
      vrnn = io::unpack_vrnn(mf);
      predict = [&](const data::FusedSequence& s) {
        return nn::predict_vrnn(vrnn, s);
      };
      break;
  }

  EvalReport report;
  report.model = io::to_string(mf.kind);
  report.modalities = data::modalities_to_string(mf.modalities);
  report.partition = args.partition;
  for (const auto& v : prepared) {
    report.per_video[v.video_id] = metrics::ccc(predict(v.features), *v.gold);
  }
  auto summary = metrics::summarize(report.per_video);
  report.mean = summary.mean;
  report.sd = summary.sd;

  // fingerprint ties the numbers to the exact model bytes and partition
  std::ifstream in(args.model_file, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  KeyValues id;
  id.set("model_crc",
         std::to_string(io::crc32(bytes.data(), bytes.size())));
  report.fingerprint =
      fingerprint(report.model, report.modalities, 0, id);

  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_eval_json(args.out / "eval.json", report);
    write_eval_csv(args.out / "eval.csv", report);
  }
  std::printf("%s %s %s: %s\n", report.model.c_str(),
              report.modalities.c_str(), report.partition.c_str(),
              metrics::format_mean_sd(report.mean, report.sd).c_str());
  return report;
}

void cmd_report(const ReportArgs& args) {
  if (args.inputs.empty()) {
    throw UsageError("report: need at least one eval json");
  }
  std::vector<EvalReport> reports;
  for (const auto& path : args.inputs) {
    reports.push_back(read_eval_json(path));
  }
  const std::string text = render_report_grid(reports);
  std::fputs(text.c_str(), stdout);
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    std::ofstream txt(args.out / "report.txt");
    txt << text;
    write_report_csv(args.out / "report.csv", reports);
  }
}

}  // namespace valence::cli
