#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "valence/data.hpp"
#include "valence/hmm.hpp"
#include "valence/lstm.hpp"
#include "valence/svr.hpp"
#include "valence/tensor.hpp"
#include "valence/vrnn.hpp"

namespace valence::io {

enum class ModelKind : std::uint32_t {
  kSvr = 1,
  kHmm = 2,
  kLstm = 3,
  kVrnn = 4,
};

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

/// On-disk model container: magic, version, kind, modality mask, integer
/// metadata, named float64 arrays, trailing CRC-32. Everything little-endian.
struct ModelFile {
  ModelKind kind = ModelKind::kSvr;
  std::vector<data::Modality> modalities;
  std::map<std::string, std::uint64_t> meta;
  std::map<std::string, ad::Tensor> arrays;

  std::uint64_t meta_at(const std::string& key) const;
  const ad::Tensor& array_at(const std::string& key) const;
  double scalar_at(const std::string& key) const;
  std::map<data::Modality, std::size_t> modality_dims() const;
};

void write_model_file(const std::filesystem::path& path, const ModelFile& mf);
ModelFile read_model_file(const std::filesystem::path& path);

ModelFile pack(const baseline::SvrModel& model,
               std::span<const data::Modality> modalities,
               const std::map<data::Modality, std::size_t>& dims);
ModelFile pack(const baseline::HmmModel& model,
               std::span<const data::Modality> modalities,
               const std::map<data::Modality, std::size_t>& dims);
ModelFile pack(const nn::LstmModel& model);
ModelFile pack(const nn::VrnnModel& model);

baseline::SvrModel unpack_svr(const ModelFile& mf);
baseline::HmmModel unpack_hmm(const ModelFile& mf);
nn::LstmModel unpack_lstm(const ModelFile& mf);
nn::VrnnModel unpack_vrnn(const ModelFile& mf);

std::uint32_t crc32(const void* data, std::size_t size,
                    std::uint32_t seed = 0);

}  // namespace valence::io
