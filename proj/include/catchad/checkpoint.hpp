#pragma once

#include "catchad/config.hpp"
#include "catchad/model.hpp"

#include <filesystem>
#include <string>

namespace catchad {

inline constexpr char kCheckpointMagic[] = "CATCH1";

/// Layout, all integers little-endian:
///   "CATCH1"
///   u32 config_bytes, config text (key=value lines)
///   u32 tensor_count
///   per tensor: u32 name_bytes, name, u32 rank, u64 dims[rank], f32 payload (row-major)
/// Values are stored as float32, so loading rounds parameters to float
/// precision; saving a loaded checkpoint reproduces the same bytes.
struct Checkpoint {
  ModelParams params;
  RunConfig config;
};

std::string encode_checkpoint(const ModelParams& params, const RunConfig& config);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const RunConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters as they read back from a checkpoint.
ModelParams round_to_float(const ModelParams& params);

}  // namespace catchad
