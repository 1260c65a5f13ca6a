#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "amenable/nn/network.hpp"

namespace amenable::nn {

inline constexpr const char* kCheckpointVersion = "ckpt-v1";

/// Free-form tags stored next to the layer descriptors (role, phi, ...).
struct CheckpointMeta {
  std::map<std::string, std::string> strings;
  std::map<std::string, double> numbers;
  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

/// Writes `<stem>.json` (version, input shape, layer descriptors, parameter
/// index, meta) and `<stem>.bin`. The blob holds, per parameter in order:
/// u32 name length, name bytes, u32 rank, u64 dims[rank], then f64 values,
/// all little-endian, row-major.
void save_checkpoint(const std::filesystem::path& stem, const Network& net, const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
  Network network;
  CheckpointMeta meta;
};

/// Throws ArtifactError when either file is missing, malformed, or the
/// version is not ckpt-v1.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& stem);

}  // namespace amenable::nn
