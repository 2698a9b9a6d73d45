#pragma once

#include <span>
#include <vector>

namespace valence::baseline {

/// Centered moving average with truncated edges: the window shrinks near the
/// boundaries instead of padding. Preserves constants and never expands the
/// range of its input.
std::vector<double> moving_average(std::span<const double> x,
                                   std::size_t window = 5);

std::vector<double> clip_track(std::vector<double> x, double lo = -1.0,
                               double hi = 1.0);

}  // namespace valence::baseline
