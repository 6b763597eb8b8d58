#pragma once

#include <filesystem>

#include "network.hpp"

namespace ggrasp {

// Layout, little-endian:
//   char[8] "GGCKPT01"
//   string  canonical network config (u32 length + bytes)
//   u64     hash of that text
//   u32     parameter count, then per parameter:
//           string name, u32[4] shape, f32 values
void save_checkpoint(const std::filesystem::path& path, const GraspNetwork& net);

/// Builds the network described in the file and loads its weights.
GraspNetwork load_checkpoint(const std::filesystem::path& path);

/// Loads weights into an existing network, validating names and shapes against its config.
void load_weights(const std::filesystem::path& path, GraspNetwork& net);

NetworkConfig parse_network_canonical(const std::string& text);

}  // namespace ggrasp
