#include "valence/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "valence/errors.hpp"

namespace valence::metrics {

namespace {

void check_pair(const char* op, std::size_t nx, std::size_t ny,
                std::size_t min_len) {
  if (nx != ny) {
    throw ShapeError(std::string(op) + ": length mismatch " +
                     std::to_string(nx) + " vs " + std::to_string(ny));
  }
  if (nx < min_len) {
    throw ContractError(std::string(op) + ": needs at least " +
                        std::to_string(min_len) + " samples, got " +
                        std::to_string(nx));
  }
}

double mean_of(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate) {
  check_pair("pearson", x.size(), y.size(), 2);
  if (degenerate) *degenerate = false;
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

double ccc(std::span<const double> x, std::span<const double> y) {
  check_pair("ccc", x.size(), y.size(), 2);
  const double n = static_cast<double>(x.size());
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double cov = sxy / n;
  const double vx = sxx / n;
  const double vy = syy / n;
  const double gap = mx - my;
  const double denom = vx + vy + gap * gap;
  if (denom == 0.0) {
    // Both vectors constant: perfect agreement iff the constants match.
    return mx == my ? 1.0 : 0.0;
  }
  return 2.0 * cov / denom;
}

double mse(std::span<const double> x, std::span<const double> y) {
  check_pair("mse", x.size(), y.size(), 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

void mean_sd(std::span<const double> scores, double* mean, double* sd) {
  if (scores.empty()) throw ContractError("mean_sd: empty input");
  const double m = mean_of(scores);
  double ss = 0.0;
  for (double v : scores) {
    const double d = v - m;
    ss += d * d;
  }
  *mean = m;
  *sd = scores.size() > 1
            ? std::sqrt(ss / static_cast<double>(scores.size() - 1))
            : 0.0;
}

MetricSummary summarize(const std::map<std::string, double>& per_video) {
  if (per_video.empty()) throw ContractError("summarize: no scores");
  std::vector<double> scores;
  scores.reserve(per_video.size());
  for (const auto& [id, v] : per_video) scores.push_back(v);
  MetricSummary out;
  out.per_video = per_video;
  mean_sd(scores, &out.mean, &out.sd);
  return out;
}

std::string format_mean_sd(double mean, double sd) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    if (s.rfind("0.", 0) == 0) {
      s.erase(0, 1);
    } else if (s.rfind("-0.", 0) == 0) {
      s.erase(1, 1);
    }
    return s;
  };
  return fmt(mean) + " (" + fmt(sd) + ")";
}

}  // namespace valence::metrics
