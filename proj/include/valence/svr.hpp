#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "valence/data.hpp"

namespace valence::baseline {

/// Linear epsilon-insensitive support vector regressor over fused windows.
struct SvrModel {
  std::vector<double> weights;
  double bias = 0.0;
  double epsilon = 0.1;
  double c = 1.0;
};

struct SvrTrainOptions {
  std::size_t max_passes = 400;         // total coordinate-descent passes
  std::size_t passes_per_round = 16;    // between exact bias refits
  double tol = 1e-10;                   // step size considered converged
  std::uint64_t seed = 0;               // sweep-order shuffling
};

/// Minimizes 0.5*|w|^2 + C * sum_i max(0, |w.x_i + b - y_i| - eps).
/// Weights move by dual coordinate descent; the unregularized bias is refit
/// exactly between rounds.
SvrModel train_svr(std::span<const double> features, std::size_t feature_dim,
                   std::span<const double> labels, double epsilon, double c,
                   const SvrTrainOptions& options = {});

/// The primal objective at the model (unregularized-bias convention).
double svr_objective(const SvrModel& model, std::span<const double> features,
                     std::size_t feature_dim, std::span<const double> labels);

/// Raw per-window predictions w.x + b.
std::vector<double> predict_svr_raw(const SvrModel& model,
                                    std::span<const double> features,
                                    std::size_t feature_dim);

/// Per-window prediction, then a 5-window moving average, then clipping to
/// [-1, 1].
std::vector<double> predict_svr(const SvrModel& model,
                                const data::FusedSequence& sequence);

}  // namespace valence::baseline
