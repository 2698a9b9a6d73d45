// Independent reference implementations used by the test suites. Everything
// here is written as plainly as possible (straight loops, textbook formulas)
// and must stay independent of the library code paths it checks.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "valence/tape.hpp"
#include "valence/tensor.hpp"

namespace oracle {

// C = A (m x k) times B (k x n), naive triple loop.
inline std::vector<double> matmul(const std::vector<double>& a,
                                  const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) {
        acc += a[i * k + kk] * b[kk * n + j];
      }
      c[i * n + j] = acc;
    }
  }
  return c;
}

inline double mean(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Concordance in the covariance form with 1/N moments.
inline double ccc(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  cov /= n;
  vx /= n;
  vy /= n;
  return 2.0 * cov / (vx + vy + (mx - my) * (mx - my));
}

inline double mse(std::span<const double> x, std::span<const double> y) {
  double acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return acc / static_cast<double>(x.size());
}

inline double normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}

// KL(q || p) for 1-D Gaussians by trapezoid quadrature of q log(q/p).
inline double kl_quadrature(double mq, double vq, double mp, double vp,
                            double lo = -10.0, double hi = 10.0,
                            std::size_t points = 200001) {
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double q = normal_pdf(x, mq, vq);
    const double p = normal_pdf(x, mp, vp);
    double f = 0.0;
    if (q > 0.0) f = q * std::log(q / p);
    acc += (i == 0 || i + 1 == points) ? 0.5 * f : f;
  }
  return acc * h;
}

// Mean and variance of the normalized product of 1-D Gaussian densities,
// by trapezoid integration on [-20, 20].
struct ProductMoments {
  double mean = 0;
  double variance = 0;
};

inline ProductMoments product_density_moments(
    const std::vector<double>& means, const std::vector<double>& variances,
    std::size_t points = 4001) {
  const double lo = -20.0, hi = 20.0;
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double z = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + h * static_cast<double>(i);
    double f = 1.0;
    for (std::size_t k = 0; k < means.size(); ++k) {
      f *= normal_pdf(x, means[k], variances[k]);
    }
    const double wgt = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
    z += wgt * f;
    m1 += wgt * f * x;
    m2 += wgt * f * x * x;
  }
  z *= h;
  m1 = m1 * h / z;
  m2 = m2 * h / z;
  return {m1, m2 - m1 * m1};
}

// Central finite differences of a scalar function of a ParamStore, compared
// against supplied analytic gradients. Returns the max elementwise error
//  |ad - fd| / max(|ad|, |fd|, floor).
inline double max_gradient_error(
    valence::ad::ParamStore& params,
    const std::function<double(valence::ad::ParamStore&)>& loss_fn,
    const valence::ad::GradMap& analytic, double step = 1e-5,
    double floor = 1e-2) {
  double worst = 0.0;
  for (auto& [name, value] : params.entries()) {
    const auto it = analytic.find(name);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double saved = value.values[i];
      value.values[i] = saved + step;
      const double up = loss_fn(params);
      value.values[i] = saved - step;
      const double down = loss_fn(params);
      value.values[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double ad = it == analytic.end() ? 0.0 : it->second.values[i];
      const double denom = std::max({std::fabs(ad), std::fabs(fd), floor});
      worst = std::max(worst, std::fabs(ad - fd) / denom);
    }
  }
  return worst;
}

}  // namespace oracle
