#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "valence/commands.hpp"
#include "valence/errors.hpp"

namespace {

using valence::cli::KeyValues;

// Settings passed as repeated --set key=value flags.
void collect_sets(const std::vector<std::string>& pairs, KeyValues& out) {
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw valence::UsageError("--set expects key=value, got '" + pair + "'");
    }
    out.set(pair.substr(0, eq), pair.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"valence: multimodal time-series valence modeling"};
  app.require_subcommand(1);

  valence::cli::SynthArgs synth;
  std::vector<std::string> synth_sets;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--config", synth.config, "key=value settings file");
  synth_cmd->add_option("--set", synth_sets, "override, e.g. synth.windows=100");

  valence::cli::AggregateArgs aggregate;
  auto* agg_cmd = app.add_subcommand(
      "aggregate", "filter observers, build gold tracks and the human benchmark");
  agg_cmd->add_option("--ratings", aggregate.ratings, "ratings.csv")->required();
  agg_cmd->add_option("--manifest", aggregate.manifest, "manifest.csv")
      ->required();
  agg_cmd->add_option("--out", aggregate.out, "output directory")->required();

  valence::cli::PartitionCheckArgs check;
  auto* check_cmd =
      app.add_subcommand("partition-check", "report partition balance");
  check_cmd->add_option("--manifest", check.manifest,
                        "manifest.csv or corpus directory")
      ->required();

  valence::cli::TrainArgs train;
  std::vector<std::string> train_sets;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--corpus", train.corpus, "corpus directory")
      ->required();
  train_cmd->add_option("--model", train.model, "svr|hmm|lstm|vrnn")
      ->required();
  train_cmd->add_option("--modalities", train.modalities,
                        "A|T|V|AT|TV|AV|ATV");
  train_cmd->add_option("--seed", train.seed, "training seed");
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--config", train.config, "key=value settings file");
  train_cmd->add_option("--set", train_sets, "override, e.g. lstm.epochs=10");

  valence::cli::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score a model on a partition");
  eval_cmd->add_option("--model-file", eval.model_file, "model.bin")
      ->required();
  eval_cmd->add_option("--corpus", eval.corpus, "corpus directory")
      ->required();
  eval_cmd->add_option("--partition", eval.partition, "train|val|test");
  eval_cmd->add_option("--out", eval.out, "output directory");

  valence::cli::ReportArgs report;
  auto* report_cmd =
      app.add_subcommand("report", "combine eval reports into the grid");
  report_cmd->add_option("inputs", report.inputs, "eval/human json files")
      ->required();
  report_cmd->add_option("--out", report.out, "output directory");

  try {
    app.parse(argc, argv);
    if (synth_cmd->parsed()) {
      collect_sets(synth_sets, synth.overrides);
      valence::cli::cmd_synth(synth);
    } else if (agg_cmd->parsed()) {
      valence::cli::cmd_aggregate(aggregate);
    } else if (check_cmd->parsed()) {
      valence::cli::cmd_partition_check(check);
    } else if (train_cmd->parsed()) {
      collect_sets(train_sets, train.overrides);
      valence::cli::cmd_train(train);
    } else if (eval_cmd->parsed()) {
      valence::cli::cmd_eval(eval);
    } else if (report_cmd->parsed()) {
      valence::cli::cmd_report(report);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const valence::UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const valence::TrainError& e) {
    std::fprintf(stderr, "training error: %s\n", e.what());
    return 3;
  } catch (const valence::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
