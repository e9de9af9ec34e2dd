#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aeromatch/adam.hpp"
#include "aeromatch/matchnet.hpp"

namespace aeromatch {

inline constexpr uint32_t kCheckpointVersion = 1;

// Binary layout, all integers and doubles little-endian:
//   magic "AEMN", u32 version, u32 tensor count,
//   per tensor: u16 name length, name bytes, u8 ndim, u32 dims..., f64 data...,
//   u32 blob count, per blob: u16 name length, name bytes, u64 size, bytes.
struct CheckpointData {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, std::vector<unsigned char>>> blobs;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// A trained (or training) model: config, weights, optimizer state, step
/// counter and the training rng stream.
struct ModelCheckpoint {
  BackboneConfig config;
  ModelWeights weights;
  std::optional<AdamState> adam;
  long step = 0;
  std::string rng_state;  // empty when not training
};

void save_model(const std::filesystem::path& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_model(const std::filesystem::path& path);

}  // namespace aeromatch
