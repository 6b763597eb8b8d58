#include "fixture.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "error.hpp"

namespace fs = std::filesystem;

namespace ggrasp {

namespace {

struct Bar {
  Point center;
  double direction;  // along the bar
  double length;
  double thickness;
  std::array<std::uint8_t, 3> color;
};

bool inside_bar(const Bar& b, double x, double y) {
  const double dx = x - b.center.x, dy = y - b.center.y;
  const double c = std::cos(b.direction), s = std::sin(b.direction);
  const double along = dx * c + dy * s;
  const double across = -dx * s + dy * c;
  return std::fabs(along) <= b.length / 2 && std::fabs(across) <= b.thickness / 2;
}

void render(const Bar& bar, int h, int w, Rng& rng, RgbImage& rgb, DepthImage& depth) {
  rgb = RgbImage(h, w);
  depth = DepthImage(h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool on = inside_bar(bar, x, y);
      const int noise = static_cast<int>(uniform_index(rng, 9)) - 4;
      std::uint8_t* px = rgb.at(y, x);
      for (int c = 0; c < 3; ++c) {
        const int base = on ? bar.color[c] : 200 - 10 * c;
        px[c] = static_cast<std::uint8_t>(std::clamp(base + noise, 0, 255));
      }
      depth.at(y, x) = on ? 0.66f : 0.70f;
    }
  }
  // A few invalid depth pixels, as real sensors produce.
  for (int i = 0; i < (h * w) / 200; ++i) {
    depth.data[uniform_index(rng, depth.data.size())] = std::nanf("");
  }
}

std::vector<GraspRectangle> grasps_for(const Bar& bar, Rng& rng) {
  std::vector<GraspRectangle> out;
  const double grasp_angle = bar.direction + kPi / 2;
  const int n = 3 + static_cast<int>(uniform_index(rng, 3));
  for (int i = 0; i < n; ++i) {
    const double t = (i - (n - 1) / 2.0) / std::max(1, n - 1) * bar.length * 0.5;
    const Point c{bar.center.x + t * std::cos(bar.direction), bar.center.y + t * std::sin(bar.direction)};
    const double width = bar.thickness * uniform(rng, 1.5, 1.9);
    out.emplace_back(c, grasp_angle + uniform(rng, -0.05, 0.05), width, width * uniform(rng, 0.45, 0.55));
  }
  return out;
}

Bar object_bar(std::uint64_t seed, int object, int h, int w, Rng& scene_rng) {
  Rng obj_rng = derived_rng(seed, 1000 + object);
  const double side = std::min(h, w);
  Bar b;
  b.length = side * uniform(obj_rng, 0.45, 0.6);
  b.thickness = side * uniform(obj_rng, 0.12, 0.17);
  b.color = {static_cast<std::uint8_t>(40 + uniform_index(obj_rng, 120)),
             static_cast<std::uint8_t>(40 + uniform_index(obj_rng, 120)),
             static_cast<std::uint8_t>(40 + uniform_index(obj_rng, 120))};
  // Pose varies per scene.
  b.direction = uniform(scene_rng, 0.0, kPi);
  b.center = {w / 2.0 + uniform(scene_rng, -0.08, 0.08) * side, h / 2.0 + uniform(scene_rng, -0.08, 0.08) * side};
  return b;
}

}  // namespace

void write_fixture(const fs::path& root, const FixtureSpec& spec) {
  if (spec.count <= 0 || spec.height < 32 || spec.width < 32 || spec.scenes_per_object <= 0)
    fail(ErrorCode::kInvalidArgument, "invalid fixture spec");
  fs::create_directories(root);
  std::ofstream manifest;
  if (spec.kind == DatasetKind::kCornell) manifest.open(root / "manifest.tsv");
  int corrupt_left = spec.corrupt_annotations;

  for (int i = 0; i < spec.count; ++i) {
    Rng rng = derived_rng(spec.seed, static_cast<std::uint64_t>(i));
    const int object = i / spec.scenes_per_object;
    const Bar bar = object_bar(spec.seed, object, spec.height, spec.width, rng);
    RgbImage rgb;
    DepthImage depth;
    render(bar, spec.height, spec.width, rng, rgb, depth);
    const auto grasps = grasps_for(bar, rng);

    if (spec.kind == DatasetKind::kCornell) {
      const fs::path dir = root / std::to_string(1 + i / 100);
      fs::create_directories(dir);
      std::ostringstream id_s;
      id_s << "pcd" << std::setw(4) << std::setfill('0') << (100 + i);
      const std::string id = id_s.str();
      write_rgb_png(dir / (id + "r.png"), rgb);
      std::ofstream pos(dir / (id + "cpos.txt"));
      pos << std::setprecision(6) << std::fixed;
      for (const auto& g : grasps)
        for (const auto& c : g.corners()) pos << c.x << ' ' << c.y << '\n';
      if (corrupt_left > 0) {
        --corrupt_left;
        for (int k = 0; k < 4; ++k) pos << "NaN NaN\n";
      }
      std::ofstream neg(dir / (id + "cneg.txt"));
      neg << std::setprecision(6) << std::fixed;
      const GraspRectangle along(bar.center, bar.direction, bar.length * 0.8, bar.thickness);
      for (const auto& c : along.corners()) neg << c.x << ' ' << c.y << '\n';

      std::ofstream pcd(dir / (id + ".txt"));
      pcd << "# .PCD v.7 - Point Cloud Data file format\nFIELDS x y z rgb index\nSIZE 4 4 4 4 4\n"
             "TYPE F F F F U\nCOUNT 1 1 1 1 1\n";
      std::size_t valid = 0;
      for (float d : depth.data) valid += std::isfinite(d) ? 1 : 0;
      pcd << "WIDTH " << valid << "\nHEIGHT 1\nPOINTS " << valid << "\nDATA ascii\n";
      for (std::size_t k = 0; k < depth.data.size(); ++k) {
        if (!std::isfinite(depth.data[k])) continue;
        pcd << depth.data[k] * 1000.0f << " 0 0 0 " << k << '\n';
      }
      manifest << id << '\t' << "obj" << object << '\n';
    } else {
      const std::string obj = "obj" + std::to_string(object);
      const fs::path dir = root / obj;
      fs::create_directories(dir);
      const std::string prefix = std::to_string(i % spec.scenes_per_object) + "_" + obj;
      write_rgb_png(dir / (prefix + "_RGB.png"), rgb);
      write_depth_tiff(dir / (prefix + "_perfect_depth.tiff"), depth);
      std::ofstream gf(dir / (prefix + "_grasps.txt"));
      gf << std::setprecision(6) << std::fixed;
      for (const auto& g : grasps)
        gf << g.center().x << ';' << g.center().y << ';' << g.angle() * 180.0 / kPi << ';' << g.width() << ';'
           << g.height() << '\n';
    }
  }
}

}  // namespace ggrasp
