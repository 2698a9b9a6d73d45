#include "valence/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "valence/errors.hpp"
#include "valence/rng.hpp"
#include "valence/smoothing.hpp"

namespace valence::baseline {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_bins(std::size_t n_bins) {
  if (n_bins != 2 && n_bins != 4 && n_bins != 8) {
    throw ContractError("hmm: n_bins must be 2, 4 or 8, got " +
                        std::to_string(n_bins));
  }
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}

}  // namespace

double Gmm::log_density(std::span<const double> x) const {
  if (x.size() != dim) {
    throw ShapeError("gmm: expected " + std::to_string(dim) +
                     " features, got " + std::to_string(x.size()));
  }
  double best = kNegInf;
  std::vector<double> scores(components);
  for (std::size_t c = 0; c < components; ++c) {
    double acc = std::log(weights[c]);
    const double* mu = means.data() + c * dim;
    const double* var = variances.data() + c * dim;
    for (std::size_t d = 0; d < dim; ++d) {
      acc += log_normal(x[d], mu[d], var[d]);
    }
    scores[c] = acc;
    best = std::max(best, acc);
  }
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - best);
  return best + std::log(sum);
}

Gmm fit_gmm(std::span<const double> data, std::size_t dim,
            std::size_t components, const GmmFitOptions& options,
            std::vector<double>* ll_trace) {
  if (dim == 0 || components == 0) {
    throw ContractError("gmm: dim and components must be positive");
  }
  const std::size_t n = data.size() / dim;
  if (n == 0 || data.size() != n * dim) {
    throw ContractError("gmm: empty or ragged data");
  }
  const std::size_t k = std::min(components, n);

  Gmm gmm;
  gmm.components = k;
  gmm.dim = dim;
  gmm.weights.assign(k, 1.0 / static_cast<double>(k));
  gmm.means.assign(k * dim, 0.0);
  gmm.variances.assign(k * dim, 1.0);

  // Seeded k-means initialization: distinct random rows as centers, a few
  // Lloyd iterations, then per-cluster moments.
  Rng rng(derive_seed(options.seed, "gmm-init", components));
  std::vector<std::size_t> picks;
  while (picks.size() < k) {
    const auto cand = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    if (std::find(picks.begin(), picks.end(), cand) == picks.end()) {
      picks.push_back(cand);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double* row = data.data() + picks[c] * dim;
    std::copy(row, row + dim, gmm.means.begin() + static_cast<long>(c * dim));
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t iter = 0; iter < options.kmeans_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      double best = std::numeric_limits<double>::max();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double* mu = gmm.means.data() + c * dim;
        double dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          dist += (x[d] - mu[d]) * (x[d] - mu[d]);
        }
        if (dist < best) {
          best = dist;
          arg = c;
        }
      }
      assign[i] = arg;
    }
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      double* s = sums.data() + assign[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double* mu = gmm.means.data() + c * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        mu[d] = sums[c * dim + d] / static_cast<double>(counts[c]);
      }
    }
  }
  {
    // initial weights and variances from the k-means clusters
    std::vector<double> ss(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      const double* mu = gmm.means.data() + assign[i] * dim;
      double* s = ss.data() + assign[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) {
        s[d] += (x[d] - mu[d]) * (x[d] - mu[d]);
      }
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      gmm.weights[c] =
          std::max(1e-8, static_cast<double>(counts[c]) / static_cast<double>(n));
      for (std::size_t d = 0; d < dim; ++d) {
        const double v =
            counts[c] ? ss[c * dim + d] / static_cast<double>(counts[c]) : 1.0;
        gmm.variances[c * dim + d] = std::max(options.variance_floor, v);
      }
    }
    double wsum = 0.0;
    for (double w : gmm.weights) wsum += w;
    for (auto& w : gmm.weights) w /= wsum;
  }

  // EM
  std::vector<double> resp(n * k, 0.0);
  double prev_ll = kNegInf;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.data() + i * dim;
      double best = kNegInf;
      for (std::size_t c = 0; c < k; ++c) {
        double acc = std::log(gmm.weights[c]);
        const double* mu = gmm.means.data() + c * dim;
        const double* var = gmm.variances.data() + c * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          acc += log_normal(x[d], mu[d], var[d]);
        }
        resp[i * k + c] = acc;
        best = std::max(best, acc);
      }
      double denom = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        denom += std::exp(resp[i * k + c] - best);
      }
      const double log_px = best + std::log(denom);
      ll += log_px;
      for (std::size_t c = 0; c < k; ++c) {
        resp[i * k + c] = std::exp(resp[i * k + c] - log_px);
      }
    }
    if (ll_trace) ll_trace->push_back(ll);
    if (iter > 0 && ll < prev_ll - 1e-7 * (1.0 + std::fabs(prev_ll))) {
      throw TrainError("gmm: log-likelihood decreased during EM");
    }
    if (iter > 0 && ll - prev_ll < options.tol) break;
    prev_ll = ll;

    for (std::size_t c = 0; c < k; ++c) {
      double rsum = 0.0;
      for (std::size_t i = 0; i < n; ++i) rsum += resp[i * k + c];
      gmm.weights[c] = std::max(1e-12, rsum / static_cast<double>(n));
      double* mu = gmm.means.data() + c * dim;
      double* var = gmm.variances.data() + c * dim;
      if (rsum <= 1e-12) {
        // dead component: keep previous parameters
        continue;
      }
      std::fill(mu, mu + dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + c];
        if (r == 0.0) continue;
        const double* x = data.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) mu[d] += r * x[d];
      }
      for (std::size_t d = 0; d < dim; ++d) mu[d] /= rsum;
      std::fill(var, var + dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + c];
        if (r == 0.0) continue;
        const double* x = data.data() + i * dim;
        for (std::size_t d = 0; d < dim; ++d) {
          var[d] += r * (x[d] - mu[d]) * (x[d] - mu[d]);
        }
      }
      for (std::size_t d = 0; d < dim; ++d) {
        var[d] = std::max(options.variance_floor, var[d] / rsum);
      }
    }
    double wsum = 0.0;
    for (double w : gmm.weights) wsum += w;
    for (auto& w : gmm.weights) w /= wsum;
  }
  return gmm;
}

std::size_t discretize_value(double v, std::size_t n_bins) {
  check_bins(n_bins);
  if (v < -1.0 || v > 1.0) {
    throw ContractError("discretize: value " + std::to_string(v) +
                        " outside [-1, 1]");
  }
  if (v == 1.0) return n_bins - 1;
  return static_cast<std::size_t>(
      std::floor((v + 1.0) / 2.0 * static_cast<double>(n_bins)));
}

std::vector<std::size_t> discretize(std::span<const double> track,
                                    std::size_t n_bins) {
  std::vector<std::size_t> out;
  out.reserve(track.size());
  for (double v : track) out.push_back(discretize_value(v, n_bins));
  return out;
}

double bin_center(std::size_t bin, std::size_t n_bins) {
  return -1.0 + (2.0 * static_cast<double>(bin) + 1.0) /
                    static_cast<double>(n_bins);
}

HmmModel fit_hmm(std::span<const LabeledSequence> sequences,
                 std::size_t n_bins, std::size_t n_components,
                 const GmmFitOptions& options) {
  check_bins(n_bins);
  if (n_components < 1 || n_components > 3) {
    throw ContractError("hmm: n_components must be 1, 2 or 3");
  }
  if (sequences.empty()) throw ContractError("hmm: no training sequences");
  const std::size_t dim = sequences[0].dim;

  HmmModel model;
  model.n_bins = n_bins;
  model.n_components = n_components;
  model.feature_dim = dim;

  std::vector<double> initial_counts(n_bins, 0.0);
  std::vector<double> transition_counts(n_bins * n_bins, 0.0);
  std::vector<std::vector<double>> per_bin(n_bins);
  std::vector<double> all_windows;

  for (const auto& seq : sequences) {
    if (seq.dim != dim) throw ShapeError("hmm: inconsistent feature dims");
    const std::size_t t_count = seq.labels.size();
    if (seq.features.size() != t_count * dim) {
      throw ShapeError("hmm: features/labels size mismatch");
    }
    if (t_count == 0) continue;
    for (std::size_t t = 0; t < t_count; ++t) {
      const std::size_t b = seq.labels[t];
      if (b >= n_bins) throw ContractError("hmm: label out of range");
      const double* x = seq.features.data() + t * dim;
      per_bin[b].insert(per_bin[b].end(), x, x + dim);
      all_windows.insert(all_windows.end(), x, x + dim);
      if (t == 0) {
        initial_counts[b] += 1.0;
      } else {
        transition_counts[seq.labels[t - 1] * n_bins + b] += 1.0;
      }
    }
  }
  if (all_windows.empty()) throw ContractError("hmm: no training windows");

  // add-one smoothing, row-normalized
  model.initial.assign(n_bins, 0.0);
  double init_total = 0.0;
  for (double v : initial_counts) init_total += v;
  for (std::size_t b = 0; b < n_bins; ++b) {
    model.initial[b] =
        (initial_counts[b] + 1.0) / (init_total + static_cast<double>(n_bins));
  }
  model.transition.assign(n_bins * n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    double row_total = 0.0;
    for (std::size_t b2 = 0; b2 < n_bins; ++b2) {
      row_total += transition_counts[b * n_bins + b2];
    }
    for (std::size_t b2 = 0; b2 < n_bins; ++b2) {
      model.transition[b * n_bins + b2] =
          (transition_counts[b * n_bins + b2] + 1.0) /
          (row_total + static_cast<double>(n_bins));
    }
  }

  Gmm global;
  bool global_ready = false;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (per_bin[b].empty()) {
      if (!global_ready) {
        GmmFitOptions gopt = options;
        global = fit_gmm(all_windows, dim, 1, gopt);
        global_ready = true;
      }
      model.emissions.push_back(global);
      model.fallback_bins.push_back(b);
      continue;
    }
    GmmFitOptions gopt = options;
    gopt.seed = derive_seed(options.seed, "hmm-bin", b);
    model.emissions.push_back(fit_gmm(per_bin[b], dim, n_components, gopt));
  }
  return model;
}

std::vector<std::size_t> viterbi(const HmmModel& model,
                                 std::span<const double> features,
                                 std::size_t dim) {
  if (dim != model.feature_dim) {
    throw ShapeError("viterbi: model expects " +
                     std::to_string(model.feature_dim) +
                     " features, sequence has " + std::to_string(dim));
  }
  const std::size_t t_count = features.size() / dim;
  if (t_count == 0) return {};
  const std::size_t n = model.n_bins;

  std::vector<double> log_init(n), log_trans(n * n);
  for (std::size_t b = 0; b < n; ++b) log_init[b] = std::log(model.initial[b]);
  for (std::size_t i = 0; i < n * n; ++i) {
    log_trans[i] = std::log(model.transition[i]);
  }

  std::vector<double> delta(n), next(n);
  std::vector<std::size_t> back((t_count) * n, 0);
  for (std::size_t b = 0; b < n; ++b) {
    delta[b] = log_init[b] +
               model.emissions[b].log_density(features.subspan(0, dim));
    if (!std::isfinite(delta[b]) && delta[b] != kNegInf) {
      throw TrainError("viterbi: non-finite score at t=0");
    }
  }
  for (std::size_t t = 1; t < t_count; ++t) {
    for (std::size_t b = 0; b < n; ++b) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t prev = 0; prev < n; ++prev) {
        const double cand = delta[prev] + log_trans[prev * n + b];
        if (cand > best) {  // ties keep the lower predecessor index
          best = cand;
          arg = prev;
        }
      }
      next[b] = best +
                model.emissions[b].log_density(features.subspan(t * dim, dim));
      back[t * n + b] = arg;
    }
    delta.swap(next);
  }

  double best = kNegInf;
  std::size_t arg = 0;
  for (std::size_t b = 0; b < n; ++b) {
    if (delta[b] > best) {
      best = delta[b];
      arg = b;
    }
  }
  if (!std::isfinite(best)) {
    throw TrainError("viterbi: non-finite best path score");
  }
  std::vector<std::size_t> path(t_count, 0);
  path[t_count - 1] = arg;
  for (std::size_t t = t_count - 1; t > 0; --t) {
    path[t - 1] = back[t * n + path[t]];
  }
  return path;
}

std::vector<std::size_t> viterbi(const HmmModel& model,
                                 const data::FusedSequence& sequence) {
  return viterbi(model, sequence.features, sequence.feature_dim());
}

double sequence_log_prob(const HmmModel& model,
                         std::span<const double> features, std::size_t dim,
                         std::span<const std::size_t> states) {
  const std::size_t t_count = states.size();
  double acc = std::log(model.initial[states[0]]) +
               model.emissions[states[0]].log_density(features.subspan(0, dim));
  for (std::size_t t = 1; t < t_count; ++t) {
    acc += std::log(model.transition[states[t - 1] * model.n_bins + states[t]]);
    acc += model.emissions[states[t]].log_density(
        features.subspan(t * dim, dim));
  }
  return acc;
}

std::vector<double> decode_to_valence(std::span<const std::size_t> bins,
                                      std::size_t n_bins) {
  std::vector<double> track;
  track.reserve(bins.size());
  for (std::size_t b : bins) track.push_back(bin_center(b, n_bins));
  return moving_average(track, 5);
}

}  // namespace valence::baseline
