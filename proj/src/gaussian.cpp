#include "valence/gaussian.hpp"

#include <cmath>

#include "valence/errors.hpp"

namespace valence::ad {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dims(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": dimension mismatch " +
                     std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

DiagGaussian::DiagGaussian(Tensor mean_in, Tensor variance_in)
    : mean(std::move(mean_in)), variance(std::move(variance_in)) {
  check_dims("diag gaussian", mean.numel(), variance.numel());
  for (double v : variance.values) {
    if (!(v > 0.0)) {
      throw ContractError("diag gaussian: variance must be strictly positive");
    }
  }
}

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return DiagGaussian(Tensor::zeros({dim}), Tensor::full({dim}, 1.0));
}

DiagGaussian DiagGaussian::from_log_variance(Tensor mean_in,
                                             const Tensor& log_var) {
  Tensor var = Tensor::zeros(log_var.shape);
  for (std::size_t i = 0; i < log_var.numel(); ++i) {
    var.values[i] = std::exp(log_var.values[i]);
  }
  return DiagGaussian(std::move(mean_in), std::move(var));
}

Tensor reparam_sample(const DiagGaussian& q, const Tensor& noise) {
  check_dims("reparam sample", q.dim(), noise.numel());
  Tensor out = Tensor::zeros(q.mean.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.values[i] =
        q.mean.values[i] + std::sqrt(q.variance.values[i]) * noise.values[i];
  }
  return out;
}

double gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  check_dims("gaussian kl", q.dim(), p.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double vq = q.variance.values[i];
    const double vp = p.variance.values[i];
    const double dm = q.mean.values[i] - p.mean.values[i];
    acc += 0.5 * (std::log(vp / vq) + (vq + dm * dm) / vp - 1.0);
  }
  return acc;
}

double gaussian_nll(const Tensor& x, const DiagGaussian& p) {
  check_dims("gaussian nll", x.numel(), p.dim());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double v = p.variance.values[i];
    const double d = x.values[i] - p.mean.values[i];
    acc += 0.5 * (kLog2Pi + std::log(v)) + d * d / (2.0 * v);
  }
  return acc;
}

Var reparam_sample(Tape& tape, const GaussianVar& q, const Tensor& noise) {
  check_dims("reparam sample", tape.value(q.mean).numel(), noise.numel());
  // mean + exp(log_var / 2) * noise
  Var sd = tape.exp(tape.scale(q.log_var, 0.5));
  return tape.add(q.mean, tape.mask_mul(sd, noise));
}

Var gaussian_kl(Tape& tape, const GaussianVar& q, const GaussianVar& p) {
  check_dims("gaussian kl", tape.value(q.mean).numel(),
             tape.value(p.mean).numel());
  // 0.5 * sum(lp - lq + exp(lq - lp) + (mq - mp)^2 * exp(-lp) - 1)
  Var dl = tape.sub(p.log_var, q.log_var);
  Var ratio = tape.exp(tape.sub(q.log_var, p.log_var));
  Var dm = tape.sub(q.mean, p.mean);
  Var quad = tape.mul(tape.mul(dm, dm), tape.exp(tape.neg(p.log_var)));
  Var inner = tape.add(tape.add(dl, ratio), quad);
  return tape.sum(tape.affine(inner, 0.5, -0.5));
}

Var gaussian_nll(Tape& tape, Var x, const GaussianVar& p) {
  check_dims("gaussian nll", tape.value(x).numel(),
             tape.value(p.mean).numel());
  // 0.5*log(2*pi) + 0.5*log_var + (x - mean)^2 * exp(-log_var) / 2
  Var d = tape.sub(x, p.mean);
  Var quad = tape.mul(tape.mul(d, d), tape.exp(tape.neg(p.log_var)));
  Var inner = tape.add(tape.affine(p.log_var, 0.5, 0.5 * kLog2Pi),
                       tape.scale(quad, 0.5));
  return tape.sum(inner);
}

DiagGaussian to_value(const Tape& tape, const GaussianVar& g) {
  return DiagGaussian::from_log_variance(tape.value(g.mean),
                                         tape.value(g.log_var));
}

}  // namespace valence::ad
