#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "valence/config.hpp"
#include "valence/report.hpp"

namespace valence::cli {

struct SynthArgs {
  std::filesystem::path out;
  std::uint64_t seed = 7;
  std::filesystem::path config;  // optional key=value file
  KeyValues overrides;           // explicit flag overrides
};

struct AggregateArgs {
  std::filesystem::path ratings;
  std::filesystem::path manifest;
  std::filesystem::path out;  // directory for gold.csv etc.
};

struct PartitionCheckArgs {
  std::filesystem::path manifest;
};

struct TrainArgs {
  std::filesystem::path corpus;  // corpus directory or manifest.csv
  std::string model = "lstm";
  std::string modalities = "T";
  std::uint64_t seed = 7;
  std::filesystem::path out;  // directory for model.bin + training_log.csv
  std::filesystem::path config;
  KeyValues overrides;
};

struct EvalArgs {
  std::filesystem::path model_file;
  std::filesystem::path corpus;
  std::string partition = "test";
  std::filesystem::path out;  // directory for eval.json / eval.csv
};

struct ReportArgs {
  std::vector<std::filesystem::path> inputs;  // eval/human report json files
  std::filesystem::path out;  // directory for report.txt / report.csv
};

/// Emits manifest.csv, features_*.csv, ratings.csv, gold_latent.csv.
void cmd_synth(const SynthArgs& args);

/// Filters observers, writes gold.csv + exclusions.csv, computes the
/// leave-one-out human benchmark and writes one report json per partition.
void cmd_aggregate(const AggregateArgs& args);

/// Prints the balance report; violations are reported, not thrown.
void cmd_partition_check(const PartitionCheckArgs& args);

/// Trains on Train, selects on Validation, writes model.bin and
/// training_log.csv. Never touches the Test partition.
void cmd_train(const TrainArgs& args);

/// Scores a trained model against the gold tracks of one partition.
EvalReport cmd_eval(const EvalArgs& args);

/// Combines eval reports into the model-by-modality grid.
void cmd_report(const ReportArgs& args);

}  // namespace valence::cli
