#include "label_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "error.hpp"

namespace ggrasp {

void EncoderConfig::validate() const {
  if (num_bins < 2) fail(ErrorCode::kInvalidArgument, "encoder: K must be at least 2");
  if (bin_tolerance < 1 || bin_tolerance >= num_bins)
    fail(ErrorCode::kInvalidArgument, "encoder: th must satisfy 1 <= th < K");
  if (!(sigma_angle > 0.0)) fail(ErrorCode::kInvalidArgument, "encoder: sigma_a must be positive");
  if (!(min_quality > 0.0 && min_quality < 1.0))
    fail(ErrorCode::kInvalidArgument, "encoder: min_quality must lie in (0, 1)");
  if (!(center_fraction > 0.0 && center_fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "encoder: center_fraction must lie in (0, 1]");
  if (!(width_norm > 0.0)) fail(ErrorCode::kInvalidArgument, "encoder: width_norm must be positive");
}

void DecoderConfig::validate() const {
  if (!(blur_sigma >= 0.0)) fail(ErrorCode::kInvalidArgument, "decoder: blur sigma must be non-negative");
  if (blur_window < 1 || blur_window % 2 == 0)
    fail(ErrorCode::kInvalidArgument, "decoder: blur window must be a positive odd integer");
  if (min_distance < 1) fail(ErrorCode::kInvalidArgument, "decoder: min_distance must be >= 1");
  if (!(height_ratio > 0.0)) fail(ErrorCode::kInvalidArgument, "decoder: height_ratio must be positive");
}

GraspMaps::GraspMaps(int bins, int h, int w, double s)
    : num_bins(bins), height(h), width(w), scale(s),
      quality(static_cast<std::size_t>(h) * w, 0.0),
      angle(static_cast<std::size_t>(bins) * h * w, 0.0),
      width_map(static_cast<std::size_t>(h) * w, 0.0) {}

double point_quality(Point p, const GraspRectangle& r, const EncoderConfig& cfg) {
  const Point c = r.center();
  const Point u = r.axis();
  const Point v = r.normal();
  const double dx = p.x - c.x;
  const double dy = p.y - c.y;
  // The central axis runs through the center along the jaw direction; the
  // distance to its perpendicular foot is the offset along the grasp axis.
  const double along_grasp = dx * u.x + dy * u.y;
  const double along_axis = dx * v.x + dy * v.y;
  const double d_max = cfg.center_fraction * r.width() / 2.0;
  if (std::fabs(along_grasp) > d_max || std::fabs(along_axis) > r.height() / 2.0) return 0.0;
  if (cfg.mode == EncodingMode::kUniform) return 1.0;
  // sigma_q is fixed by q(d_max) = min_quality:
  // exp(-d^2 / (2 sigma^2)) with 2 sigma^2 = d_max^2 / ln(1 / min_quality).
  const double two_sigma_sq = d_max * d_max / std::log(1.0 / cfg.min_quality);
  return std::exp(-along_grasp * along_grasp / two_sigma_sq);
}

int angle_to_bin(double theta, const EncoderConfig& cfg) {
  if (!(theta >= 0.0 && theta <= kPi)) fail(ErrorCode::kInvalidArgument, "angle outside [0, pi]");
  // Guard against theta/pi*K landing a hair below an integer, e.g. 80 degrees.
  const int k = static_cast<int>(std::floor(theta / kPi * cfg.num_bins + 1e-9));
  return std::min(k, cfg.num_bins - 1);
}

AngleQualityVector angle_quality_vector(double theta, const EncoderConfig& cfg) {
  AngleQualityVector out;
  out.peak_bin = angle_to_bin(theta, cfg);
  out.values.assign(cfg.num_bins, 0.0);
  for (int i = std::max(0, out.peak_bin - cfg.bin_tolerance);
       i <= std::min(cfg.num_bins - 1, out.peak_bin + cfg.bin_tolerance); ++i) {
    if (cfg.mode == EncodingMode::kUniform) {
      out.values[i] = i == out.peak_bin ? 1.0 : 0.0;
    } else {
      const double d = i - out.peak_bin;
      out.values[i] = std::exp(-(d * d) / (2.0 * cfg.sigma_angle * cfg.sigma_angle));
    }
  }
  return out;
}

namespace {

// Strict weak order used to break exact quality ties, so the encoding does not
// depend on the order of the rectangle list.
auto rect_key(const GraspRectangle& r) {
  return std::tuple(r.angle(), r.width(), r.height(), r.center().x, r.center().y);
}

GraspMaps encode_at(std::span<const GraspRectangle> rects, int height, int width, double scale,
                    const EncoderConfig& cfg) {
  GraspMaps maps(cfg.num_bins, height, width, scale);
  std::vector<int> owner(maps.pixels(), -1);

  for (std::size_t ri = 0; ri < rects.size(); ++ri) {
    const GraspRectangle& r = rects[ri];
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const Point& c : r.corners()) {
      min_x = std::min(min_x, c.x);
      max_x = std::max(max_x, c.x);
      min_y = std::min(min_y, c.y);
      max_y = std::max(max_y, c.y);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(max_x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double q = point_quality({static_cast<double>(x), static_cast<double>(y)}, r, cfg);
        if (q <= 0.0) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * width + x;
        const double cur = maps.quality[idx];
        const bool take = owner[idx] < 0 || q > cur ||
                          (q == cur && rect_key(r) < rect_key(rects[owner[idx]]));
        if (take) {
          maps.quality[idx] = q;
          owner[idx] = static_cast<int>(ri);
        }
      }
    }
  }

  std::vector<AngleQualityVector> vectors;
  vectors.reserve(rects.size());
  for (const auto& r : rects) vectors.push_back(angle_quality_vector(r.angle(), cfg));

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int o = owner[static_cast<std::size_t>(y) * width + x];
      if (o < 0) continue;
      for (int k = 0; k < cfg.num_bins; ++k) maps.a(k, y, x) = vectors[o].values[k];
      maps.w(y, x) = std::clamp(rects[o].width() / cfg.width_norm, 0.0, 1.0);
    }
  }
  return maps;
}

}  // namespace

GraspMaps encode(std::span<const GraspRectangle> rects, int height, int width, const EncoderConfig& cfg) {
  cfg.validate();
  if (height <= 0 || width <= 0) fail(ErrorCode::kInvalidArgument, "map dimensions must be positive");
  return encode_at(rects, height, width, 1.0, cfg);
}

std::vector<GraspMaps> encode_pyramid(std::span<const GraspRectangle> rects, int height, int width,
                                      const EncoderConfig& cfg) {
  cfg.validate();
  if (height <= 0 || width <= 0) fail(ErrorCode::kInvalidArgument, "map dimensions must be positive");
  if (height % 4 != 0 || width % 4 != 0)
    fail(ErrorCode::kInvalidArgument, "pyramid dimensions must be divisible by 4");
  std::vector<GraspMaps> out;
  for (double s : kPyramidScales) {
    std::vector<GraspRectangle> scaled;
    scaled.reserve(rects.size());
    for (const auto& r : rects) scaled.push_back(r.scaled(s));
    out.push_back(encode_at(scaled, static_cast<int>(height * s), static_cast<int>(width * s), s, cfg));
  }
  return out;
}

std::vector<double> smooth_quality(const GraspMaps& maps, const DecoderConfig& cfg) {
  const int h = maps.height;
  const int w = maps.width;
  if (cfg.blur_sigma == 0.0 || cfg.blur_window == 1) return maps.quality;
  const int r = cfg.blur_window / 2;
  std::vector<double> kernel(cfg.blur_window);
  for (int i = -r; i <= r; ++i) kernel[i + r] = std::exp(-(i * i) / (2.0 * cfg.blur_sigma * cfg.blur_sigma));
  const double sum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= sum;

  std::vector<double> tmp(maps.pixels());
  std::vector<double> out(maps.pixels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * maps.q(y, std::clamp(x + i, 0, w - 1));
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

std::vector<GraspPose> decode(const GraspMaps& maps, int n, const EncoderConfig& enc, const DecoderConfig& dec) {
  if (n < 1) fail(ErrorCode::kInvalidArgument, "decode: n must be at least 1");
  dec.validate();
  if (maps.num_bins != enc.num_bins) fail(ErrorCode::kShape, "decode: angle plane count does not match K");
  const int h = maps.height;
  const int w = maps.width;
  const std::vector<double> smooth = smooth_quality(maps, dec);

  struct Candidate {
    double value;
    int y;
    int x;
  };
  std::vector<Candidate> peaks;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = smooth[static_cast<std::size_t>(y) * w + x];
      if (!(v > 0.0)) continue;
      bool is_peak = true;
      for (int dy = -1; dy <= 1 && is_peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if ((dy == 0 && dx == 0) || yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          if (smooth[static_cast<std::size_t>(yy) * w + xx] > v) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back({v, y, x});
    }
  }
  // Stable: equal values keep raster order.
  std::stable_sort(peaks.begin(), peaks.end(), [](const Candidate& a, const Candidate& b) { return a.value > b.value; });

  std::vector<GraspPose> out;
  std::vector<Candidate> kept;
  const double min_d2 = static_cast<double>(dec.min_distance) * dec.min_distance;
  for (const auto& c : peaks) {
    if (static_cast<int>(out.size()) >= n) break;
    bool suppressed = false;
    for (const auto& k : kept) {
      const double d2 = double(k.x - c.x) * (k.x - c.x) + double(k.y - c.y) * (k.y - c.y);
      if (d2 < min_d2) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    kept.push_back(c);

    int best_bin = 0;
    for (int k = 1; k < maps.num_bins; ++k)
      if (maps.a(k, c.y, c.x) > maps.a(best_bin, c.y, c.x)) best_bin = k;
    GraspPose g;
    g.center = {c.x / maps.scale, c.y / maps.scale};
    g.angle = (best_bin + 0.5) * kPi / maps.num_bins;
    g.width = maps.w(c.y, c.x) * enc.width_norm / maps.scale;
    g.quality = std::clamp(c.value, 0.0, 1.0);
    out.push_back(g);
  }
  return out;
}

GraspRectangle pose_to_rectangle(const GraspPose& g, const DecoderConfig& dec) {
  if (!(g.width > 0.0)) fail(ErrorCode::kDegenerate, "pose width must be positive");
  return GraspRectangle(g.center, g.angle, g.width, g.width * dec.height_ratio);
}

}  // namespace ggrasp
