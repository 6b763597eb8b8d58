#pragma once

#include <filesystem>
#include <vector>

#include "image.hpp"
#include "label_codec.hpp"

namespace ggrasp {

/// Values in [0, 1] rendered with the JET colormap (0 is dark blue, 1 dark red).
/// Out-of-range values are clamped.
RgbImage heatmap(const std::vector<double>& values, int height, int width);

/// Per-pixel angle class as (argmax + 0.5) / K where any class is positive, else 0.
std::vector<double> angle_plane(const GraspMaps& maps);

/// Rectangles drawn on a copy of `rgb`: jaw edges red, the other two edges green.
RgbImage overlay(const RgbImage& rgb, const std::vector<GraspRectangle>& rects);

struct VisualizationFiles {
  std::filesystem::path quality, width, angle, overlay, panel;
};

/// Writes quality, width and angle heatmaps, the rectangle overlay, and a panel
/// with the overlay followed by the quality, width and angle columns.
/// `rgb` must have the map resolution.
VisualizationFiles write_visualization(const std::filesystem::path& dir, const RgbImage& rgb, const GraspMaps& maps,
                                       const std::vector<GraspRectangle>& rects);

}  // namespace ggrasp
