#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "layoutprior/train.hpp"

namespace layoutprior {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little-endian):
///   "LPCK" | u32 version | config block | i64 step | str dropout_rng |
///   str loader_state | u32 tensor count | tensors | u32 crc32
/// where str = u32 length + bytes and each tensor is
///   str name | u32 rank | i32 dims[rank] | f32 data[prod(dims)].
/// Parameter tensors keep their names; Adam moments are stored as
/// "adam.m.<name>" and "adam.v.<name>".
void save_checkpoint(const std::filesystem::path& path, const TrainState& state,
                     const std::string& loader_state = {});

struct LoadedCheckpoint {
  TrainState state;
  std::string loader_state;
};

/// Throws ChecksumMismatch (truncated or corrupted), VersionMismatch
/// (format version, or vocab size differing from `expected_vocab`),
/// MalformedFile.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_vocab = {});

}  // namespace layoutprior
