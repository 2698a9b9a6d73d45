#pragma once

#include <cstdint>
#include <map>

#include "valence/tape.hpp"

namespace valence::ad {

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };
  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain SGD or adaptive-moment updates over a ParamStore. Moment buffers are
/// keyed by parameter name and created on first use.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update in place. Throws TrainError naming the parameter if
  /// its gradient is non-finite.
  void step(ParamStore& params, const GradMap& grads);

  void reset();
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace valence::ad
