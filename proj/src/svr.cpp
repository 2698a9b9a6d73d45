#include "valence/svr.hpp"

#include <algorithm>
#include <cmath>

#include "valence/errors.hpp"
#include "valence/rng.hpp"
#include "valence/smoothing.hpp"

namespace valence::baseline {

namespace {

// Exact minimizer over b of sum_i max(0, |r_i - b| - eps): the derivative is
// a step function rising through the 2n sorted breakpoints r_i +- eps, so the
// optimum is the interval between the n-th and (n+1)-th of them.
double optimal_bias(const std::vector<double>& residuals, double eps) {
  std::vector<double> breaks;
  breaks.reserve(residuals.size() * 2);
  for (double r : residuals) {
    breaks.push_back(r - eps);
    breaks.push_back(r + eps);
  }
  std::sort(breaks.begin(), breaks.end());
  const std::size_t n = residuals.size();
  return 0.5 * (breaks[n - 1] + breaks[n]);
}

}  // namespace

SvrModel train_svr(std::span<const double> features, std::size_t feature_dim,
                   std::span<const double> labels, double epsilon, double c,
                   const SvrTrainOptions& options) {
  if (feature_dim == 0) throw ContractError("svr: zero feature dimension");
  const std::size_t n = labels.size();
  if (n == 0) throw ContractError("svr: no training windows");
  if (features.size() != n * feature_dim) {
    throw ShapeError("svr: feature matrix size " +
                     std::to_string(features.size()) + " != " +
                     std::to_string(n) + " x " + std::to_string(feature_dim));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw ContractError("svr: non-finite feature");
  }
  if (epsilon < 0.0 || c <= 0.0) {
    throw ContractError("svr: need epsilon >= 0 and C > 0");
  }

  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = features.data() + i * feature_dim;
    double acc = 0.0;
    for (std::size_t d = 0; d < feature_dim; ++d) acc += x[d] * x[d];
    // guards all-zero rows; their optimal beta is 0 anyway
    q[i] = std::max(acc, 1e-300);
  }

  std::vector<double> w(feature_dim, 0.0);
  std::vector<double> beta(n, 0.0);
  std::vector<double> residuals(n, 0.0);
  double bias = 0.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(options.seed, "svr-sweep"));

  // Alternate dual coordinate descent on the weights (bias held fixed) with
  // an exact bias step. The dual step never increases the w-subproblem and
  // the bias step is a global 1-d minimization, so the objective ratchets
  // down until both stall.
  const std::size_t outer_rounds =
      (options.max_passes + options.passes_per_round - 1) /
      options.passes_per_round;
  for (std::size_t round = 0; round < outer_rounds; ++round) {
    double max_step = 0.0;
    for (std::size_t pass = 0; pass < options.passes_per_round; ++pass) {
      for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
      }
      max_step = 0.0;
      for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t i = order[idx];
        const double* x = features.data() + i * feature_dim;
        double pred = bias;
        for (std::size_t d = 0; d < feature_dim; ++d) pred += w[d] * x[d];
        const double g = pred - labels[i];

        double b = 0.0;
        const double up = beta[i] - (g + epsilon) / q[i];
        const double down = beta[i] - (g - epsilon) / q[i];
        if (up > 0.0) {
          b = up;
        } else if (down < 0.0) {
          b = down;
        }
        b = std::max(-c, std::min(c, b));
        const double delta = b - beta[i];
        if (delta != 0.0) {
          beta[i] = b;
          for (std::size_t d = 0; d < feature_dim; ++d) w[d] += delta * x[d];
          max_step = std::max(max_step, std::fabs(delta));
        }
      }
      if (max_step < options.tol) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = features.data() + i * feature_dim;
      double wx = 0.0;
      for (std::size_t d = 0; d < feature_dim; ++d) wx += w[d] * x[d];
      residuals[i] = labels[i] - wx;
    }
    const double new_bias = optimal_bias(residuals, epsilon);
    const double bias_step = std::fabs(new_bias - bias);
    bias = new_bias;
    if (bias_step < options.tol && max_step < options.tol) break;
  }

  SvrModel model;
  model.weights = std::move(w);
  model.bias = bias;
  model.epsilon = epsilon;
  model.c = c;
  return model;
}

double svr_objective(const SvrModel& model, std::span<const double> features,
                     std::size_t feature_dim, std::span<const double> labels) {
  double reg = 0.0;
  for (double v : model.weights) reg += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* x = features.data() + i * feature_dim;
    double pred = model.bias;
    for (std::size_t d = 0; d < feature_dim; ++d) pred += model.weights[d] * x[d];
    hinge += std::max(0.0, std::fabs(pred - labels[i]) - model.epsilon);
  }
  return 0.5 * reg + model.c * hinge;
}

std::vector<double> predict_svr_raw(const SvrModel& model,
                                    std::span<const double> features,
                                    std::size_t feature_dim) {
  if (model.weights.size() != feature_dim) {
    throw ShapeError("svr: model expects " +
                     std::to_string(model.weights.size()) +
                     " features, sequence has " + std::to_string(feature_dim));
  }
  const std::size_t n = features.size() / feature_dim;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = features.data() + i * feature_dim;
    double acc = model.bias;
    for (std::size_t d = 0; d < feature_dim; ++d) acc += model.weights[d] * x[d];
    out[i] = acc;
  }
  return out;
}

std::vector<double> predict_svr(const SvrModel& model,
                                const data::FusedSequence& sequence) {
  auto raw = predict_svr_raw(model, sequence.features, sequence.feature_dim());
  return clip_track(moving_average(raw, 5));
}

}  // namespace valence::baseline
