#pragma once

#include "valence/tape.hpp"
#include "valence/tensor.hpp"

namespace valence::ad {

/// Independent Gaussian over D dimensions with strictly positive variance.
struct DiagGaussian {
  Tensor mean;
  Tensor variance;

  DiagGaussian(Tensor mean_in, Tensor variance_in);
  static DiagGaussian standard(std::size_t dim);
  static DiagGaussian from_log_variance(Tensor mean_in, const Tensor& log_var);
  std::size_t dim() const { return mean.numel(); }
};

/// mean + sqrt(variance) * noise, with caller-supplied standard-normal draws.
Tensor reparam_sample(const DiagGaussian& q, const Tensor& noise);

/// Closed-form KL(q || p) for diagonal Gaussians, summed over dimensions.
double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

/// Negative log density of x under p, summed over dimensions.
double gaussian_nll(const Tensor& x, const DiagGaussian& p);

/// Tape-level diagonal Gaussian, parameterized by mean and log-variance so
/// that the variance stays positive under unconstrained optimization.
struct GaussianVar {
  Var mean;
  Var log_var;
};

Var reparam_sample(Tape& tape, const GaussianVar& q, const Tensor& noise);
Var gaussian_kl(Tape& tape, const GaussianVar& q, const GaussianVar& p);
Var gaussian_nll(Tape& tape, Var x, const GaussianVar& p);

DiagGaussian to_value(const Tape& tape, const GaussianVar& g);

}  // namespace valence::ad
