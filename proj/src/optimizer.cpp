#include "valence/optimizer.hpp"

#include <cmath>

#include "valence/errors.hpp"

namespace valence::ad {

void Optimizer::step(ParamStore& params, const GradMap& grads) {
  ++t_;
  for (auto& [name, value] : params.entries()) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (!g.same_shape(value)) {
      throw ShapeError("optimizer: gradient shape " + g.shape_str() +
                       " does not match parameter '" + name + "' " +
                       value.shape_str());
    }
    if (!g.all_finite()) {
      throw TrainError("optimizer: non-finite gradient for parameter '" +
                       name + "'");
    }
    if (cfg_.kind == OptimizerConfig::Kind::kSgd) {
      for (std::size_t i = 0; i < value.numel(); ++i) {
        value.values[i] -= cfg_.learning_rate * g.values[i];
      }
      continue;
    }
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      mit = m_.emplace(name, Tensor::zeros(value.shape)).first;
      v_.emplace(name, Tensor::zeros(value.shape));
    }
    Tensor& m = mit->second;
    Tensor& v = v_.at(name);
    const double b1 = cfg_.beta1;
    const double b2 = cfg_.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double gi = g.values[i];
      m.values[i] = b1 * m.values[i] + (1.0 - b1) * gi;
      v.values[i] = b2 * v.values[i] + (1.0 - b2) * gi * gi;
      const double mhat = m.values[i] / corr1;
      const double vhat = v.values[i] / corr2;
      value.values[i] -=
          cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

void Optimizer::reset() {
  t_ = 0;
  m_.clear();
  v_.clear();
}

}  // namespace valence::ad
