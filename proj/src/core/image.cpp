#include "image.hpp"

#include <cmath>
#include <deque>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "error.hpp"

namespace ggrasp {

RgbImage read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) fail(ErrorCode::kIo, "cannot read image " + path.string());
  RgbImage out(bgr.rows, bgr.cols);
  cv::Mat rgb(bgr.rows, bgr.cols, CV_8UC3, out.data.data());
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return out;
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.data.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    fail(ErrorCode::kIo, "cannot write image " + path.string());
}

DepthImage read_depth_tiff(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) fail(ErrorCode::kIo, "cannot read depth " + path.string());
  cv::Mat f;
  m.convertTo(f, CV_32F);
  DepthImage out(f.rows, f.cols, 0.0f);
  for (int y = 0; y < f.rows; ++y) {
    for (int x = 0; x < f.cols; ++x) {
      const float v = f.at<float>(y, x);
      out.at(y, x) = (std::isfinite(v) && v > 0.0f) ? v : std::nanf("");
    }
  }
  return out;
}

void write_depth_tiff(const std::filesystem::path& path, const DepthImage& img) {
  cv::Mat m(img.height, img.width, CV_32F, const_cast<float*>(img.data.data()));
  if (!cv::imwrite(path.string(), m)) fail(ErrorCode::kIo, "cannot write depth " + path.string());
}

DepthImage inpaint_nearest(const DepthImage& depth) {
  DepthImage out = depth;
  std::deque<std::pair<int, int>> frontier;
  std::vector<char> known(out.data.size(), 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (std::isfinite(out.at(y, x))) {
        known[static_cast<std::size_t>(y) * out.width + x] = 1;
        frontier.emplace_back(y, x);
      }
    }
  }
  if (frontier.empty()) fail(ErrorCode::kInvalidDepth, "depth image has no valid pixels");
  constexpr int kDy[4] = {-1, 0, 0, 1};
  constexpr int kDx[4] = {0, -1, 1, 0};
  while (!frontier.empty()) {
    const auto [y, x] = frontier.front();
    frontier.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int yy = y + kDy[k], xx = x + kDx[k];
      if (yy < 0 || yy >= out.height || xx < 0 || xx >= out.width) continue;
      const std::size_t idx = static_cast<std::size_t>(yy) * out.width + xx;
      if (known[idx]) continue;
      known[idx] = 1;
      out.data[idx] = out.at(y, x);
      frontier.emplace_back(yy, xx);
    }
  }
  return out;
}

}  // namespace ggrasp
