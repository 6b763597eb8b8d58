#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "label_codec.hpp"

namespace ggrasp {

/// Stable hash over every encoder setting that influences the planes.
std::uint64_t encoder_config_hash(const EncoderConfig& cfg);

// Container layout, all little-endian:
//   char[8]  "GGMAPS01"
//   u32      base height H, u32 base width W, u32 K, u32 scale count S
//   f64[S]   scales
//   u64      encoder config hash
//   per scale: quality plane, K angle planes, width plane; each (H*s)x(W*s)
//   f32 values in row-major order.
void save_pyramid(const std::filesystem::path& path, const std::vector<GraspMaps>& pyramid,
                  std::uint64_t config_hash);

struct LoadedPyramid {
  std::vector<GraspMaps> maps;
  std::uint64_t config_hash = 0;
  int base_height = 0;
  int base_width = 0;
};

LoadedPyramid load_pyramid(const std::filesystem::path& path);

}  // namespace ggrasp
