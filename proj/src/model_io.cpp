#include "valence/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "valence/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping first");

namespace valence::io {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'L', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

class Buffer {
 public:
  void put_bytes(const void* data, std::size_t n) {
    const auto* b = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void put_u32(std::uint32_t v) { put_bytes(&v, sizeof(v)); }
  void put_u64(std::uint64_t v) { put_bytes(&v, sizeof(v)); }
  void put_string(const std::string& s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s.data(), s.size());
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Cursor {
 public:
  Cursor(const std::vector<char>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  void read_bytes(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw DataError(path_ + ": truncated model file");
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t read_u32() {
    std::uint32_t v = 0;
    read_bytes(&v, sizeof(v));
    return v;
  }
  std::uint64_t read_u64() {
    std::uint64_t v = 0;
    read_bytes(&v, sizeof(v));
    return v;
  }
  std::string read_string() {
    const std::uint32_t n = read_u32();
    if (n > 1u << 20) throw DataError(path_ + ": implausible string length");
    std::string s(n, '\0');
    read_bytes(s.data(), n);
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::uint32_t modality_mask(std::span<const data::Modality> mods) {
  std::uint32_t mask = 0;
  for (data::Modality m : mods) mask |= 1u << static_cast<unsigned>(m);
  return mask;
}

std::vector<data::Modality> mask_to_modalities(std::uint32_t mask) {
  std::vector<data::Modality> out;
  for (data::Modality m : data::kAllModalities) {
    if (mask & (1u << static_cast<unsigned>(m))) out.push_back(m);
  }
  return out;
}

}  // namespace

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kSvr: return "svr";
    case ModelKind::kHmm: return "hmm";
    case ModelKind::kLstm: return "lstm";
    case ModelKind::kVrnn: return "vrnn";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "svr") return ModelKind::kSvr;
  if (s == "hmm") return ModelKind::kHmm;
  if (s == "lstm") return ModelKind::kLstm;
  if (s == "vrnn") return ModelKind::kVrnn;
  throw UsageError("unknown model kind '" + s +
                   "' (use svr, hmm, lstm or vrnn)");
}

std::uint64_t ModelFile::meta_at(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) {
    throw DataError("model file: missing metadata '" + key + "'");
  }
  return it->second;
}

const ad::Tensor& ModelFile::array_at(const std::string& key) const {
  auto it = arrays.find(key);
  if (it == arrays.end()) {
    throw DataError("model file: missing array '" + key + "'");
  }
  return it->second;
}

double ModelFile::scalar_at(const std::string& key) const {
  const ad::Tensor& t = array_at(key);
  if (!t.is_scalar()) {
    throw DataError("model file: '" + key + "' is not a scalar");
  }
  return t.values[0];
}

std::map<data::Modality, std::size_t> ModelFile::modality_dims() const {
  std::map<data::Modality, std::size_t> dims;
  for (data::Modality m : modalities) {
    dims[m] = static_cast<std::size_t>(meta_at("dim." + data::to_string(m)));
  }
  return dims;
}

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t seed) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    c = table[(c ^ bytes[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

void write_model_file(const std::filesystem::path& path, const ModelFile& mf) {
  Buffer buf;
  buf.put_bytes(kMagic, sizeof(kMagic));
  buf.put_u32(kVersion);
  buf.put_u32(static_cast<std::uint32_t>(mf.kind));
  buf.put_u32(modality_mask(mf.modalities));
  buf.put_u32(static_cast<std::uint32_t>(mf.meta.size()));
  for (const auto& [key, value] : mf.meta) {
    buf.put_string(key);
    buf.put_u64(value);
  }
  buf.put_u32(static_cast<std::uint32_t>(mf.arrays.size()));
  for (const auto& [key, tensor] : mf.arrays) {
    buf.put_string(key);
    buf.put_u32(static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape) buf.put_u64(d);
    buf.put_bytes(tensor.values.data(), tensor.values.size() * sizeof(double));
  }
  const std::uint32_t checksum =
      crc32(buf.bytes().data(), buf.bytes().size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(buf.bytes().data(),
            static_cast<std::streamsize>(buf.bytes().size()));
  out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ModelFile read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4 * sizeof(std::uint32_t)) {
    throw DataError(path.string() + ": not a model file (too short)");
  }
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored),
              sizeof(stored));
  const std::uint32_t actual =
      crc32(bytes.data(), bytes.size() - sizeof(stored));
  if (stored != actual) {
    throw DataError(path.string() + ": checksum mismatch, file corrupted");
  }
  bytes.resize(bytes.size() - sizeof(stored));

  Cursor cur(bytes, path.string());
  char magic[8];
  cur.read_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + ": bad magic bytes");
  }
  const std::uint32_t version = cur.read_u32();
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported format version " +
                    std::to_string(version));
  }
  ModelFile mf;
  const std::uint32_t kind = cur.read_u32();
  if (kind < 1 || kind > 4) {
    throw DataError(path.string() + ": unknown model kind tag " +
                    std::to_string(kind));
  }
  mf.kind = static_cast<ModelKind>(kind);
  mf.modalities = mask_to_modalities(cur.read_u32());
  const std::uint32_t meta_count = cur.read_u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = cur.read_string();
    mf.meta[key] = cur.read_u64();
  }
  const std::uint32_t array_count = cur.read_u32();
  for (std::uint32_t i = 0; i < array_count; ++i) {
    std::string key = cur.read_string();
    const std::uint32_t rank = cur.read_u32();
    if (rank == 0 || rank > 4) {
      throw DataError(path.string() + ": implausible tensor rank");
    }
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(cur.read_u64());
      numel *= d;
    }
    std::vector<double> values(numel);
    cur.read_bytes(values.data(), numel * sizeof(double));
    mf.arrays.emplace(std::move(key),
                      ad::Tensor(std::move(shape), std::move(values)));
  }
  if (cur.position() != bytes.size()) {
    throw DataError(path.string() + ": trailing bytes after payload");
  }
  return mf;
}

namespace {

void put_dims(ModelFile& mf,
              const std::map<data::Modality, std::size_t>& dims) {
  for (const auto& [m, d] : dims) {
    mf.meta["dim." + data::to_string(m)] = d;
  }
}

}  // namespace

ModelFile pack(const baseline::SvrModel& model,
               std::span<const data::Modality> modalities,
               const std::map<data::Modality, std::size_t>& dims) {
  ModelFile mf;
  mf.kind = ModelKind::kSvr;
  mf.modalities.assign(modalities.begin(), modalities.end());
  put_dims(mf, dims);
  mf.meta["feature_dim"] = model.weights.size();
  mf.arrays.emplace("weights", ad::Tensor::vector(model.weights));
  mf.arrays.emplace("bias", ad::Tensor::scalar(model.bias));
  mf.arrays.emplace("epsilon", ad::Tensor::scalar(model.epsilon));
  mf.arrays.emplace("c", ad::Tensor::scalar(model.c));
  return mf;
}

baseline::SvrModel unpack_svr(const ModelFile& mf) {
  baseline::SvrModel model;
  model.weights = mf.array_at("weights").values;
  model.bias = mf.scalar_at("bias");
  model.epsilon = mf.scalar_at("epsilon");
  model.c = mf.scalar_at("c");
  return model;
}

ModelFile pack(const baseline::HmmModel& model,
               std::span<const data::Modality> modalities,
               const std::map<data::Modality, std::size_t>& dims) {
  ModelFile mf;
  mf.kind = ModelKind::kHmm;
  mf.modalities.assign(modalities.begin(), modalities.end());
  put_dims(mf, dims);
  mf.meta["n_bins"] = model.n_bins;
  mf.meta["n_components"] = model.n_components;
  mf.meta["feature_dim"] = model.feature_dim;
  std::uint64_t fallback_mask = 0;
  for (std::size_t b : model.fallback_bins) fallback_mask |= 1ull << b;
  mf.meta["fallback_mask"] = fallback_mask;
  mf.arrays.emplace("initial", ad::Tensor::vector(model.initial));
  mf.arrays.emplace("transition",
                    ad::Tensor::matrix(model.n_bins, model.n_bins,
                                       model.transition));
  for (std::size_t b = 0; b < model.n_bins; ++b) {
    const auto& g = model.emissions[b];
    const std::string prefix = "bin" + std::to_string(b);
    mf.arrays.emplace(prefix + ".weights", ad::Tensor::vector(g.weights));
    mf.arrays.emplace(prefix + ".means",
                      ad::Tensor::matrix(g.components, g.dim, g.means));
    mf.arrays.emplace(prefix + ".variances",
                      ad::Tensor::matrix(g.components, g.dim, g.variances));
  }
  return mf;
}

baseline::HmmModel unpack_hmm(const ModelFile& mf) {
  baseline::HmmModel model;
  model.n_bins = static_cast<std::size_t>(mf.meta_at("n_bins"));
  model.n_components = static_cast<std::size_t>(mf.meta_at("n_components"));
  model.feature_dim = static_cast<std::size_t>(mf.meta_at("feature_dim"));
  model.initial = mf.array_at("initial").values;
  model.transition = mf.array_at("transition").values;
  const std::uint64_t fallback_mask = mf.meta_at("fallback_mask");
  for (std::size_t b = 0; b < model.n_bins; ++b) {
    if (fallback_mask & (1ull << b)) model.fallback_bins.push_back(b);
    const std::string prefix = "bin" + std::to_string(b);
    baseline::Gmm g;
    g.weights = mf.array_at(prefix + ".weights").values;
    const ad::Tensor& means = mf.array_at(prefix + ".means");
    g.components = means.shape[0];
    g.dim = means.shape[1];
    g.means = means.values;
    g.variances = mf.array_at(prefix + ".variances").values;
    model.emissions.push_back(std::move(g));
  }
  return model;
}

ModelFile pack(const nn::LstmModel& model) {
  ModelFile mf;
  mf.kind = ModelKind::kLstm;
  mf.modalities = model.modalities;
  for (std::size_t m = 0; m < model.modalities.size(); ++m) {
    mf.meta["dim." + data::to_string(model.modalities[m])] =
        model.modality_dims[m];
  }
  mf.meta["input_dim"] = model.config.input_dim;
  mf.meta["hidden"] = model.config.hidden;
  mf.meta["attn_window"] = model.config.attn_window;
  mf.meta["mlp_hidden"] = model.config.mlp_hidden;
  mf.arrays.emplace("config.dropout",
                    ad::Tensor::scalar(model.config.dropout));
  mf.arrays.emplace("config.teacher_forcing",
                    ad::Tensor::scalar(model.config.teacher_forcing));
  mf.arrays.emplace("norm.mean", model.norm_mean);
  mf.arrays.emplace("norm.scale", model.norm_scale);
  for (const auto& [name, tensor] : model.params.entries()) {
    mf.arrays.emplace("param." + name, tensor);
  }
  return mf;
}

nn::LstmModel unpack_lstm(const ModelFile& mf) {
  nn::LstmModel model;
  model.config.input_dim = static_cast<std::size_t>(mf.meta_at("input_dim"));
  model.config.hidden = static_cast<std::size_t>(mf.meta_at("hidden"));
  model.config.attn_window =
      static_cast<std::size_t>(mf.meta_at("attn_window"));
  model.config.mlp_hidden = static_cast<std::size_t>(mf.meta_at("mlp_hidden"));
  model.config.dropout = mf.scalar_at("config.dropout");
  model.config.teacher_forcing = mf.scalar_at("config.teacher_forcing");
  model.norm_mean = mf.array_at("norm.mean");
  model.norm_scale = mf.array_at("norm.scale");
  model.modalities = mf.modalities;
  auto dims = mf.modality_dims();
  for (data::Modality m : model.modalities) {
    model.modality_dims.push_back(dims.at(m));
  }
  for (const auto& [name, tensor] : mf.arrays) {
    if (name.rfind("param.", 0) == 0) {
      model.params.create(name.substr(6), tensor);
    }
  }
  return model;
}

ModelFile pack(const nn::VrnnModel& model) {
  ModelFile mf;
  mf.kind = ModelKind::kVrnn;
  mf.modalities = model.modalities;
  for (std::size_t m = 0; m < model.modalities.size(); ++m) {
    mf.meta["dim." + data::to_string(model.modalities[m])] =
        model.config.modality_dims[m];
  }
  mf.meta["hidden"] = model.config.hidden;
  mf.meta["latent"] = model.config.latent;
  mf.meta["mlp_hidden"] = model.config.mlp_hidden;
  mf.meta["anneal_epochs"] = model.config.anneal_epochs;
  mf.arrays.emplace("config.alpha_final",
                    ad::Tensor::scalar(model.config.alpha_final));
  mf.arrays.emplace("config.beta_final",
                    ad::Tensor::scalar(model.config.beta_final));
  mf.arrays.emplace("config.lambda0",
                    ad::Tensor::scalar(model.config.lambda0));
  mf.arrays.emplace("norm.mean", model.norm_mean);
  mf.arrays.emplace("norm.scale", model.norm_scale);
  for (const auto& [name, tensor] : model.params.entries()) {
    mf.arrays.emplace("param." + name, tensor);
  }
  return mf;
}

nn::VrnnModel unpack_vrnn(const ModelFile& mf) {
  nn::VrnnModel model;
  model.config.hidden = static_cast<std::size_t>(mf.meta_at("hidden"));
  model.config.latent = static_cast<std::size_t>(mf.meta_at("latent"));
  model.config.mlp_hidden = static_cast<std::size_t>(mf.meta_at("mlp_hidden"));
  model.config.anneal_epochs =
      static_cast<std::size_t>(mf.meta_at("anneal_epochs"));
  model.config.alpha_final = mf.scalar_at("config.alpha_final");
  model.config.beta_final = mf.scalar_at("config.beta_final");
  model.config.lambda0 = mf.scalar_at("config.lambda0");
  model.norm_mean = mf.array_at("norm.mean");
  model.norm_scale = mf.array_at("norm.scale");
  model.modalities = mf.modalities;
  auto dims = mf.modality_dims();
  for (data::Modality m : model.modalities) {
    model.config.modality_dims.push_back(dims.at(m));
  }
  for (const auto& [name, tensor] : mf.arrays) {
    if (name.rfind("param.", 0) == 0) {
      model.params.create(name.substr(6), tensor);
    }
  }
  return model;
}

}  // namespace valence::io
