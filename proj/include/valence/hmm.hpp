#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "valence/data.hpp"

namespace valence::baseline {

/// Diagonal-covariance Gaussian mixture over feature windows.
struct Gmm {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> weights;    // components, on the simplex
  std::vector<double> means;      // components x dim
  std::vector<double> variances;  // components x dim, >= variance floor

  double log_density(std::span<const double> x) const;
};

struct GmmFitOptions {
  std::size_t max_iterations = 200;
  double tol = 1e-6;            // stop when the log-likelihood gain drops below
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  std::size_t kmeans_iterations = 10;
};

/// Expectation-maximization with k-means-style seeding. The total training
/// log-likelihood trace is appended to ll_trace when supplied; it is
/// non-decreasing up to floor-induced rounding.
Gmm fit_gmm(std::span<const double> data, std::size_t dim,
            std::size_t components, const GmmFitOptions& options = {},
            std::vector<double>* ll_trace = nullptr);

/// Supervised HMM over discretized valence bins with GMM emissions.
struct HmmModel {
  std::size_t n_bins = 0;
  std::size_t n_components = 0;
  std::size_t feature_dim = 0;
  std::vector<double> initial;     // n_bins
  std::vector<double> transition;  // n_bins x n_bins, row-stochastic
  std::vector<Gmm> emissions;      // per bin
  /// Bins with zero training windows, whose emission is the global fit.
  std::vector<std::size_t> fallback_bins;
};

struct LabeledSequence {
  std::vector<double> features;  // windows x dim
  std::size_t dim = 0;
  std::vector<std::size_t> labels;
};

/// Equal-width bins over [-1, 1] with half-open lower edges; +1 maps to the
/// top bin. n_bins must be 2, 4 or 8.
std::size_t discretize_value(double v, std::size_t n_bins);
std::vector<std::size_t> discretize(std::span<const double> track,
                                    std::size_t n_bins);
double bin_center(std::size_t bin, std::size_t n_bins);

/// Counts initial/transition statistics with add-one smoothing and fits one
/// emission GMM per bin.
HmmModel fit_hmm(std::span<const LabeledSequence> sequences,
                 std::size_t n_bins, std::size_t n_components,
                 const GmmFitOptions& options = {});

/// Most likely bin sequence in log domain; ties break toward the lower bin.
std::vector<std::size_t> viterbi(const HmmModel& model,
                                 std::span<const double> features,
                                 std::size_t dim);
std::vector<std::size_t> viterbi(const HmmModel& model,
                                 const data::FusedSequence& sequence);

/// Log-probability of a specific state sequence under the model.
double sequence_log_prob(const HmmModel& model,
                         std::span<const double> features, std::size_t dim,
                         std::span<const std::size_t> states);

/// Bin centers followed by the 5-window moving average.
std::vector<double> decode_to_valence(std::span<const std::size_t> bins,
                                      std::size_t n_bins);

}  // namespace valence::baseline
