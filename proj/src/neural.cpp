#include "valence/neural.hpp"

#include <cmath>

#include "valence/errors.hpp"
#include "valence/rng.hpp"

namespace valence::nn {

ad::Tensor xavier(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  const double bound =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  ad::Tensor t = ad::Tensor::zeros({rows, cols});
  for (auto& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

void init_mlp(ad::ParamStore& params, const std::string& prefix,
              std::size_t in_dim, std::size_t hidden, std::size_t out_dim,
              std::uint64_t seed) {
  params.create(prefix + ".w1",
                xavier(hidden, in_dim, derive_seed(seed, prefix + ".w1")));
  params.create(prefix + ".b1", ad::Tensor::zeros({hidden}));
  params.create(prefix + ".w2",
                xavier(out_dim, hidden, derive_seed(seed, prefix + ".w2")));
  params.create(prefix + ".b2", ad::Tensor::zeros({out_dim}));
}

MlpRef bind_mlp(ad::Tape& tape, ad::ParamStore& params,
                const std::string& prefix) {
  return MlpRef{tape.param(params, prefix + ".w1"),
                tape.param(params, prefix + ".b1"),
                tape.param(params, prefix + ".w2"),
                tape.param(params, prefix + ".b2")};
}

ad::Var apply_mlp(ad::Tape& tape, const MlpRef& mlp, ad::Var in) {
  ad::Var h = tape.tanh(tape.add(tape.matmul(mlp.w1, in), mlp.b1));
  return tape.add(tape.matmul(mlp.w2, h), mlp.b2);
}

std::map<data::Modality, std::size_t> corpus_dims(
    std::span<const data::VideoRecord> records,
    std::span<const data::Modality> modalities) {
  std::map<data::Modality, std::size_t> dims;
  for (data::Modality m : modalities) {
    for (const auto& r : records) {
      if (const auto* s = r.series(m)) {
        auto [it, inserted] = dims.emplace(m, s->dim);
        if (!inserted && it->second != s->dim) {
          throw DataError("modality " + data::to_string(m) +
                          " has inconsistent dimensionality across videos");
        }
      }
    }
    if (!dims.count(m)) {
      throw DataError("modality " + data::to_string(m) +
                      " does not occur in the corpus");
    }
  }
  return dims;
}

void fit_standardizer(std::span<const PreparedVideo> videos, ad::Tensor* mean,
                      ad::Tensor* scale) {
  if (videos.empty()) throw ContractError("standardizer: no videos");
  const data::FusedSequence& probe = videos[0].features;
  const std::size_t dim = probe.feature_dim();
  *mean = ad::Tensor::zeros({dim});
  *scale = ad::Tensor::full({dim}, 1.0);
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  std::vector<std::size_t> count(dim, 0);
  for (const auto& v : videos) {
    const data::FusedSequence& f = v.features;
    for (std::size_t t = 0; t < f.windows; ++t) {
      for (std::size_t m = 0; m < f.modalities.size(); ++m) {
        if (!f.observed(t, m)) continue;
        const std::size_t off = f.block_offset(m);
        auto block = f.block(t, m);
        for (std::size_t d = 0; d < block.size(); ++d) {
          sum[off + d] += block[d];
          sum_sq[off + d] += block[d] * block[d];
          ++count[off + d];
        }
      }
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    if (count[d] == 0) continue;
    const double n = static_cast<double>(count[d]);
    const double m = sum[d] / n;
    const double var = std::max(0.0, sum_sq[d] / n - m * m);
    mean->values[d] = m;
    scale->values[d] = std::max(1e-6, std::sqrt(var));
  }
}

std::vector<double> standardize_window(std::span<const double> window,
                                       const ad::Tensor& mean,
                                       const ad::Tensor& scale) {
  std::vector<double> out(window.size());
  if (mean.empty()) {
    out.assign(window.begin(), window.end());
    return out;
  }
  for (std::size_t d = 0; d < window.size(); ++d) {
    out[d] = (window[d] - mean.values[d]) / scale.values[d];
  }
  return out;
}

std::vector<PreparedVideo> prepare_videos(
    std::span<const data::VideoRecord> records,
    std::span<const data::Modality> modalities,
    const std::map<data::Modality, std::size_t>& dims, bool require_gold) {
  std::vector<PreparedVideo> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (require_gold && r.gold.empty()) {
      throw ContractError("video '" + r.video_id +
                          "' has no gold track; aggregate ratings first");
    }
    PreparedVideo p;
    p.video_id = r.video_id;
    p.features = data::fused_features(r, modalities, dims);
    p.gold = r.gold.empty() ? nullptr : &r.gold;
    if (p.gold && p.gold->size() != p.features.windows) {
      throw ShapeError("video '" + r.video_id + "': gold length " +
                       std::to_string(p.gold->size()) + " != " +
                       std::to_string(p.features.windows) + " windows");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace valence::nn
