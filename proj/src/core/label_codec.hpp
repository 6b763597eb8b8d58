#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geometry.hpp"

namespace ggrasp {

enum class EncodingMode { kGaussian, kUniform };

struct EncoderConfig {
  int num_bins = 18;          // K
  int bin_tolerance = 3;      // th
  double sigma_angle = 1.5;   // in bins
  double min_quality = 0.5;   // quality on the strip boundary
  double center_fraction = 1.0 / 3.0;
  EncodingMode mode = EncodingMode::kGaussian;
  double width_norm = 150.0;  // pixels

  void validate() const;
};

struct DecoderConfig {
  double blur_sigma = 2.0;
  int blur_window = 11;
  /// Minimum distance in map pixels between two returned peaks.
  int min_distance = 10;
  double height_ratio = 0.5;

  void validate() const;
};

/// Per-pixel quality, K angle-class planes and normalized width at one scale.
/// Planes are row-major; angle plane k starts at k * height * width.
struct GraspMaps {
  int num_bins = 0;
  int height = 0;
  int width = 0;
  double scale = 1.0;
  std::vector<double> quality;
  std::vector<double> angle;
  std::vector<double> width_map;

  GraspMaps() = default;
  GraspMaps(int bins, int h, int w, double scale);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  double& q(int y, int x) { return quality[static_cast<std::size_t>(y) * width + x]; }
  double q(int y, int x) const { return quality[static_cast<std::size_t>(y) * width + x]; }
  double& a(int k, int y, int x) { return angle[(static_cast<std::size_t>(k) * height + y) * width + x]; }
  double a(int k, int y, int x) const { return angle[(static_cast<std::size_t>(k) * height + y) * width + x]; }
  double& w(int y, int x) { return width_map[static_cast<std::size_t>(y) * width + x]; }
  double w(int y, int x) const { return width_map[static_cast<std::size_t>(y) * width + x]; }
};

struct AngleQualityVector {
  std::vector<double> values;
  int peak_bin = 0;
};

inline constexpr std::array<double, 3> kPyramidScales{0.25, 0.5, 1.0};

double point_quality(Point p, const GraspRectangle& r, const EncoderConfig& cfg);

int angle_to_bin(double theta, const EncoderConfig& cfg);

AngleQualityVector angle_quality_vector(double theta, const EncoderConfig& cfg);

GraspMaps encode(std::span<const GraspRectangle> rects, int height, int width, const EncoderConfig& cfg);

/// Maps at 1/4, 1/2 and full scale, each encoded from geometrically scaled rectangles.
std::vector<GraspMaps> encode_pyramid(std::span<const GraspRectangle> rects, int height, int width,
                                      const EncoderConfig& cfg);

/// Separable Gaussian blur of the quality plane with clamped borders.
std::vector<double> smooth_quality(const GraspMaps& maps, const DecoderConfig& cfg);

/// Up to `n` poses at the strongest local maxima of the smoothed quality map,
/// best first, in full-scale pixel coordinates.
std::vector<GraspPose> decode(const GraspMaps& maps, int n, const EncoderConfig& enc,
                              const DecoderConfig& dec);

GraspRectangle pose_to_rectangle(const GraspPose& g, const DecoderConfig& dec = {});

}  // namespace ggrasp
