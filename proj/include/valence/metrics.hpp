#pragma once

#include <map>
#include <span>
#include <string>

namespace valence::metrics {

/// Sample Pearson correlation in [-1, 1]. If either input has zero variance
/// the value is 0 and *degenerate (when supplied) is set.
double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate = nullptr);

/// Concordance correlation coefficient, computed in covariance form
///   2*cov(X,Y) / (var(X) + var(Y) + (mean(X) - mean(Y))^2)
/// with population (1/N) moments. When both inputs are constant the value is
/// 1 if the means agree and 0 otherwise.
double ccc(std::span<const double> x, std::span<const double> y);

/// Mean squared difference.
double mse(std::span<const double> x, std::span<const double> y);

struct MetricSummary {
  std::map<std::string, double> per_video;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single video
};

MetricSummary summarize(const std::map<std::string, double>& per_video);

/// Mean and sample standard deviation of a score list.
void mean_sd(std::span<const double> scores, double* mean, double* sd);

/// Renders "mean (sd)" with two decimals and no leading zero, e.g.
/// ".40 (.32)" or "-.02 (.13)".
std::string format_mean_sd(double mean, double sd);

}  // namespace valence::metrics
