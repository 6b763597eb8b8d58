#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ggrasp {

/// 8-bit interleaved RGB.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}
  std::uint8_t* at(int y, int x) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int y, int x) const { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

/// Depth in meters; NaN marks invalid pixels.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  DepthImage() = default;
  DepthImage(int h, int w, float fill) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}
  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

RgbImage read_rgb(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);

/// Single-channel 32-bit float TIFF.
DepthImage read_depth_tiff(const std::filesystem::path& path);
void write_depth_tiff(const std::filesystem::path& path, const DepthImage& img);

/// Fills invalid pixels from the nearest valid pixel (4-connected breadth-first order).
DepthImage inpaint_nearest(const DepthImage& depth);

}  // namespace ggrasp
