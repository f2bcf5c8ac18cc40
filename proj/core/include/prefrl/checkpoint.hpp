#pragma once

#include <cstdint>
#include <filesystem>

#include "prefrl/params.hpp"

namespace prefrl {

// Versioned binary checkpoint. Layout, all little-endian:
//   "PRFL" magic, u32 format version, u64 seed, u64 config hash,
//   u32 record count, then per record:
//   u32 name length + bytes, u32 rank, u64 extents..., u8 trainable flag,
//   raw f64 data.
// Round-trips are byte-exact.
struct CheckpointMeta {
  std::uint32_t version = 1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta = {});

ModelParams load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace prefrl
