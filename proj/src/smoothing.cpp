#include "valence/smoothing.hpp"

#include <algorithm>

#include "valence/errors.hpp"

namespace valence::baseline {

std::vector<double> moving_average(std::span<const double> x,
                                   std::size_t window) {
  if (window == 0) throw ContractError("moving average: window must be >= 1");
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  const std::size_t half = window / 2;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n, t + half + 1);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i];
    out[t] = acc / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<double> clip_track(std::vector<double> x, double lo, double hi) {
  for (auto& v : x) v = std::max(lo, std::min(hi, v));
  return x;
}

}  // namespace valence::baseline
