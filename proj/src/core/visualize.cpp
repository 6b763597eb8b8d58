#include "visualize.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "error.hpp"

namespace ggrasp {

RgbImage heatmap(const std::vector<double>& values, int height, int width) {
  if (height <= 0 || width <= 0 || values.size() != static_cast<std::size_t>(height) * width)
    fail(ErrorCode::kShape, "heatmap: value count does not match the image size");
  cv::Mat gray(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = std::clamp(values[static_cast<std::size_t>(y) * width + x], 0.0, 1.0);
      gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  cv::Mat bgr, rgb;
  cv::applyColorMap(gray, bgr, cv::COLORMAP_JET);
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(height, width);
  std::copy(rgb.data, rgb.data + out.data.size(), out.data.begin());
  return out;
}

std::vector<double> angle_plane(const GraspMaps& maps) {
  std::vector<double> out(maps.pixels(), 0.0);
  for (int y = 0; y < maps.height; ++y) {
    for (int x = 0; x < maps.width; ++x) {
      int best = 0;
      for (int k = 1; k < maps.num_bins; ++k)
        if (maps.a(k, y, x) > maps.a(best, y, x)) best = k;
      if (maps.a(best, y, x) > 0.0)
        out[static_cast<std::size_t>(y) * maps.width + x] = (best + 0.5) / maps.num_bins;
    }
  }
  return out;
}

RgbImage overlay(const RgbImage& rgb, const std::vector<GraspRectangle>& rects) {
  RgbImage out = rgb;
  cv::Mat m(out.height, out.width, CV_8UC3, out.data.data());
  for (const auto& r : rects) {
    const auto c = rect_corners(r);
    std::array<cv::Point, 4> p;
    for (int i = 0; i < 4; ++i) p[i] = cv::Point(static_cast<int>(std::lround(c[i].x)), static_cast<int>(std::lround(c[i].y)));
    // Edges 0-1 and 2-3 run along the grasp axis; 1-2 and 3-0 are the jaws.
    cv::line(m, p[0], p[1], cv::Scalar(0, 200, 0), 1, cv::LINE_8);
    cv::line(m, p[2], p[3], cv::Scalar(0, 200, 0), 1, cv::LINE_8);
    cv::line(m, p[1], p[2], cv::Scalar(230, 0, 0), 2, cv::LINE_8);
    cv::line(m, p[3], p[0], cv::Scalar(230, 0, 0), 2, cv::LINE_8);
  }
  return out;
}

VisualizationFiles write_visualization(const std::filesystem::path& dir, const RgbImage& rgb, const GraspMaps& maps,
                                       const std::vector<GraspRectangle>& rects) {
  if (rgb.height != maps.height || rgb.width != maps.width)
    fail(ErrorCode::kShape, "visualize: image and maps differ in size");
  std::filesystem::create_directories(dir);
  VisualizationFiles f{dir / "quality.png", dir / "width.png", dir / "angle.png", dir / "overlay.png",
                       dir / "panel.png"};
  const RgbImage q = heatmap(maps.quality, maps.height, maps.width);
  const RgbImage w = heatmap(maps.width_map, maps.height, maps.width);
  const RgbImage a = heatmap(angle_plane(maps), maps.height, maps.width);
  const RgbImage o = overlay(rgb, rects);
  write_rgb_png(f.quality, q);
  write_rgb_png(f.width, w);
  write_rgb_png(f.angle, a);
  write_rgb_png(f.overlay, o);

  const int gap = 4;
  RgbImage panel(maps.height, 4 * maps.width + 3 * gap);
  std::fill(panel.data.begin(), panel.data.end(), 255);
  const RgbImage* columns[] = {&o, &q, &w, &a};
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < maps.height; ++y)
      std::copy(columns[c]->at(y, 0), columns[c]->at(y, 0) + 3 * maps.width, panel.at(y, c * (maps.width + gap)));
  write_rgb_png(f.panel, panel);
  return f;
}

}  // namespace ggrasp
