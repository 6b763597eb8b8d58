#pragma once

#include <cstdint>
#include <filesystem>

#include "dataset.hpp"

namespace ggrasp {

struct FixtureSpec {
  DatasetKind kind = DatasetKind::kCornell;
  int count = 8;
  int height = 120;
  int width = 160;
  std::uint64_t seed = 1;
  /// Images per physical object; consecutive scenes share an object id.
  int scenes_per_object = 3;
  /// Number of annotations written with NaN corners (Cornell only).
  int corrupt_annotations = 0;
};

/// Writes a small dataset of bar-shaped objects lying on a table, in the
/// on-disk layout the matching parser expects. Grasps cross the bar.
void write_fixture(const std::filesystem::path& root, const FixtureSpec& spec);

}  // namespace ggrasp
