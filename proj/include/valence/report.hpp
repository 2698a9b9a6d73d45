#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace valence::cli {

/// Per-video CCC scores of one (model, modality combination, partition) run.
struct EvalReport {
  std::string model;       // svr, hmm, lstm, vrnn or human
  std::string modalities;  // canonical letters, e.g. "AT"
  std::string partition;   // train, val, test
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::map<std::string, double> per_video;
  double mean = 0.0;
  double sd = 0.0;
};

void write_eval_json(const std::filesystem::path& path,
                     const EvalReport& report);
EvalReport read_eval_json(const std::filesystem::path& path);
void write_eval_csv(const std::filesystem::path& path,
                    const EvalReport& report);

/// Model-by-modality grid, one block per partition, cells "mean (sd)" with
/// the best cell of each row marked and absent cells rendered "--".
std::string render_report_grid(std::span<const EvalReport> reports);
void write_report_csv(const std::filesystem::path& path,
                      std::span<const EvalReport> reports);

}  // namespace valence::cli
