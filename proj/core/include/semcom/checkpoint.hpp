#pragma once

#include "semcom/codec.hpp"
#include "semcom/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace semcom {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// File layout: the 8-byte magic "SEMCOMCK", a little-endian uint32 version, a
// uint64 header length, a JSON header (codec config, iteration, RNG state,
// optimizer step count, tensor index) and the raw little-endian doubles of
// every tensor in index order.
struct Checkpoint {
  CodecConfig codec;
  std::uint64_t iteration = 0;
  std::string rng_state;
  std::uint64_t optimizer_steps = 0;
  std::map<std::string, Tensor> params;
  std::map<std::string, Mat> optimizer;  // Adam moments, may be empty
};

Checkpoint make_checkpoint(const SemanticCodec& model, std::uint64_t iteration, const Rng* rng, const Adam* opt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies every parameter into the model; names and shapes must match exactly.
void apply_checkpoint(SemanticCodec& model, const Checkpoint& ck);
std::unique_ptr<SemanticCodec> codec_from_checkpoint(const Checkpoint& ck);

// Copies the parameters whose name and shape match; others keep their fresh
// initialisation. Returns the number of copied tensors. The embedding width
// of source and target must agree.
std::size_t transfer_init(SemanticCodec& target, const Checkpoint& source);

// 64-bit FNV-1a over the file contents, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

std::string codec_config_json(const CodecConfig& cfg);
CodecConfig codec_config_from_json(const std::string& json);

}  // namespace semcom
