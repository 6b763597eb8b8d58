#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "error.hpp"

namespace fs = std::filesystem;

namespace ggrasp {

namespace {

// Cornell point clouds are stored in millimeters.
constexpr double kCornellUnitToMeters = 0.001;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<GraspRectangle> parse_corner_file(const fs::path& path, int& skipped) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<Point> pts;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string xs, ys;
    if (!(ls >> xs >> ys)) continue;
    // stod does not accept "NaN" on every libc; strtod does.
    pts.push_back({std::strtod(xs.c_str(), nullptr), std::strtod(ys.c_str(), nullptr)});
  }
  if (pts.size() % 4 != 0) fail(ErrorCode::kFormat, path.string() + ": corner count is not a multiple of 4");
  std::vector<GraspRectangle> out;
  for (std::size_t i = 0; i < pts.size(); i += 4) {
    auto r = rectangle_from_corners({pts[i], pts[i + 1], pts[i + 2], pts[i + 3]});
    if (r) {
      out.push_back(*r);
    } else {
      ++skipped;
    }
  }
  return out;
}

std::map<std::string, std::string> load_object_map(const fs::path& root) {
  std::map<std::string, std::string> out;
  const fs::path manifest = root / "manifest.tsv";
  if (!fs::exists(manifest)) return out;
  for (auto& [id, obj] : read_manifest(manifest)) out[id] = obj;
  return out;
}

}  // namespace

Dataset::Dataset(DatasetKind kind, std::vector<SampleRecord> records, int skipped)
    : kind_(kind), records_(std::move(records)), skipped_(skipped) {}

std::optional<std::size_t> Dataset::index_of(const std::string& source_id) const {
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (records_[i].source_id == source_id) return i;
  return std::nullopt;
}

GraspSample Dataset::load(std::size_t i) const {
  const SampleRecord& rec = record(i);
  GraspSample s;
  s.rgb = read_rgb(rec.rgb_path);
  if (rec.depth_source == DepthSource::kTiff) {
    s.depth = read_depth_tiff(rec.depth_path);
  } else {
    s.depth = read_cornell_point_cloud(rec.depth_path, s.rgb.height, s.rgb.width);
  }
  if (s.depth.height != s.rgb.height || s.depth.width != s.rgb.width)
    fail(ErrorCode::kFormat, rec.source_id + ": depth and RGB sizes differ");
  s.rects = rec.rects;
  s.negatives = rec.negatives;
  s.object_id = rec.object_id;
  s.source_id = rec.source_id;
  return s;
}

std::optional<GraspRectangle> rectangle_from_corners(const std::array<Point, 4>& c) {
  for (const auto& p : c)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return std::nullopt;
  const double cx = (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0;
  const double cy = (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0;
  const double ex = c[1].x - c[0].x;
  const double ey = c[1].y - c[0].y;
  const double width = std::hypot(ex, ey);
  const double height = std::hypot(c[2].x - c[1].x, c[2].y - c[1].y);
  if (!(width > 0.0) || !(height > 0.0)) return std::nullopt;
  return GraspRectangle({cx, cy}, std::atan2(ey, ex), width, height);
}

DepthImage read_cornell_point_cloud(const fs::path& path, int height, int width) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open point cloud " + path.string());
  DepthImage depth(height, width, std::nanf(""));
  std::string line;
  bool in_data = false;
  while (std::getline(in, line)) {
    if (!in_data) {
      if (line.rfind("DATA", 0) == 0) in_data = true;
      continue;
    }
    std::istringstream ls(line);
    double x, y, z, rgb;
    long long index;
    if (!(ls >> x >> y >> z >> rgb >> index)) continue;
    if (index < 0 || index >= static_cast<long long>(height) * width) continue;
    const double range = std::sqrt(x * x + y * y + z * z) * kCornellUnitToMeters;
    if (std::isfinite(range) && range > 0.0)
      depth.data[static_cast<std::size_t>(index)] = static_cast<float>(range);
  }
  if (!in_data) fail(ErrorCode::kFormat, path.string() + ": missing DATA section");
  return depth;
}

Dataset parse_cornell(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "dataset root not found: " + root.string());
  const auto objects = load_object_map(root);
  std::vector<fs::path> pos_files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && ends_with(e.path().filename().string(), "cpos.txt")) pos_files.push_back(e.path());
  }
  std::sort(pos_files.begin(), pos_files.end());

  std::vector<SampleRecord> records;
  int skipped = 0;
  for (const auto& pos : pos_files) {
    const std::string name = pos.filename().string();
    const std::string id = name.substr(0, name.size() - std::string("cpos.txt").size());
    const fs::path dir = pos.parent_path();
    SampleRecord rec;
    rec.source_id = id;
    rec.rgb_path = dir / (id + "r.png");
    if (!fs::exists(rec.rgb_path)) fail(ErrorCode::kIo, id + ": missing RGB image " + rec.rgb_path.string());
    if (fs::exists(dir / (id + "d.tiff"))) {
      rec.depth_path = dir / (id + "d.tiff");
      rec.depth_source = DepthSource::kTiff;
    } else if (fs::exists(dir / (id + ".txt"))) {
      rec.depth_path = dir / (id + ".txt");
      rec.depth_source = DepthSource::kCornellPointCloud;
    } else {
      fail(ErrorCode::kIo, id + ": missing depth (expected " + id + "d.tiff or " + id + ".txt)");
    }
    rec.rects = parse_corner_file(pos, skipped);
    const fs::path neg = dir / (id + "cneg.txt");
    if (fs::exists(neg)) {
      int ignored = 0;
      rec.negatives = parse_corner_file(neg, ignored);
    }
    auto it = objects.find(id);
    rec.object_id = it != objects.end() ? it->second : id;
    if (rec.rects.empty()) {
      std::cerr << "warning: " << id << " has no usable positive rectangles; skipped\n";
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorCode::kFormat, "no usable Cornell samples under " + root.string());
  if (skipped > 0) std::cerr << "warning: skipped " << skipped << " corrupt Cornell annotations\n";
  return Dataset(DatasetKind::kCornell, std::move(records), skipped);
}

GraspRectangle parse_jacquard_line(const std::string& line) {
  std::array<double, 5> f{};
  std::istringstream ls(line);
  std::string tok;
  for (int i = 0; i < 5; ++i) {
    if (!std::getline(ls, tok, ';')) fail(ErrorCode::kFormat, "malformed Jacquard grasp line: " + line);
    char* end = nullptr;
    f[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str()) fail(ErrorCode::kFormat, "malformed Jacquard grasp line: " + line);
  }
  return GraspRectangle({f[0], f[1]}, f[2] * kPi / 180.0, f[3], f[4]);
}

Dataset parse_jacquard(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "dataset root not found: " + root.string());
  std::vector<fs::path> grasp_files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && ends_with(e.path().filename().string(), "_grasps.txt")) grasp_files.push_back(e.path());
  }
  std::sort(grasp_files.begin(), grasp_files.end());

  std::vector<SampleRecord> records;
  int skipped = 0;
  for (const auto& gf : grasp_files) {
    const std::string name = gf.filename().string();
    const std::string prefix = name.substr(0, name.size() - std::string("_grasps.txt").size());
    const fs::path dir = gf.parent_path();
    SampleRecord rec;
    rec.source_id = prefix;
    rec.object_id = dir.filename().string();
    rec.rgb_path = dir / (prefix + "_RGB.png");
    if (!fs::exists(rec.rgb_path)) fail(ErrorCode::kIo, prefix + ": missing RGB image " + rec.rgb_path.string());
    rec.depth_source = DepthSource::kTiff;
    rec.depth_path = dir / (prefix + "_perfect_depth.tiff");
    if (!fs::exists(rec.depth_path)) rec.depth_path = dir / (prefix + "_stereo_depth.tiff");
    if (!fs::exists(rec.depth_path)) fail(ErrorCode::kIo, prefix + ": missing depth image");
    std::ifstream in(gf);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        rec.rects.push_back(parse_jacquard_line(line));
      } catch (const Error&) {
        ++skipped;
      }
    }
    if (rec.rects.empty()) {
      std::cerr << "warning: " << prefix << " has no usable grasps; skipped\n";
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorCode::kFormat, "no usable Jacquard samples under " + root.string());
  if (skipped > 0) std::cerr << "warning: skipped " << skipped << " malformed Jacquard grasps\n";
  return Dataset(DatasetKind::kJacquard, std::move(records), skipped);
}

Dataset parse_dataset(DatasetKind kind, const fs::path& root) {
  return kind == DatasetKind::kCornell ? parse_cornell(root) : parse_jacquard(root);
}

Split make_split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0))
    fail(ErrorCode::kInvalidArgument, "train fraction must lie in (0, 1]");
  if (spec.folds < 1 || spec.fold < 0 || (spec.folds > 1 && spec.fold >= spec.folds))
    fail(ErrorCode::kInvalidArgument, "invalid fold selection");
  Rng rng(spec.seed);

  // Units are single images or whole objects; units are shuffled and assigned.
  std::vector<std::vector<std::size_t>> units;
  if (spec.mode == SplitMode::kImageWise) {
    for (std::size_t i = 0; i < dataset.size(); ++i) units.push_back({i});
  } else {
    std::map<std::string, std::vector<std::size_t>> by_object;
    for (std::size_t i = 0; i < dataset.size(); ++i) by_object[dataset.record(i).object_id].push_back(i);
    for (auto& [obj, idx] : by_object) units.push_back(idx);
  }
  shuffle(units, rng);

  std::vector<char> is_test(units.size(), 0);
  if (spec.folds > 1) {
    for (std::size_t u = 0; u < units.size(); ++u) is_test[u] = static_cast<int>(u % spec.folds) == spec.fold;
  } else {
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * units.size()));
    for (std::size_t u = n_train; u < units.size(); ++u) is_test[u] = 1;
  }
  Split split;
  for (std::size_t u = 0; u < units.size(); ++u)
    for (std::size_t i : units[u]) (is_test[u] ? split.test : split.train).push_back(i);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void write_manifest(const fs::path& path, const Dataset& dataset, const std::vector<std::size_t>& indices) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (std::size_t i : indices) out << dataset.record(i).source_id << '\t' << dataset.record(i).object_id << '\n';
}

std::vector<std::pair<std::string, std::string>> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(ErrorCode::kFormat, path.string() + ": expected 'sample<TAB>object': " + line);
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

namespace {

bool center_inside(const GraspRectangle& r, int w, int h) {
  const Point c = r.center();
  return c.x >= 0.0 && c.y >= 0.0 && c.x <= w - 1.0 && c.y <= h - 1.0;
}

}  // namespace

GraspSample augment(const GraspSample& sample, const AugmentParams& p) {
  GraspSample out;
  out.object_id = sample.object_id;
  out.source_id = sample.source_id;
  const int h = sample.rgb.height;
  const int w = sample.rgb.width;
  std::vector<GraspRectangle> moved;

  switch (p.op) {
    case AugmentOp::kCrop: {
      if (p.crop_width <= 0 || p.crop_height <= 0 || p.x0 < 0 || p.y0 < 0 || p.x0 + p.crop_width > w ||
          p.y0 + p.crop_height > h)
        fail(ErrorCode::kInvalidArgument, "crop window outside the image");
      out.rgb = RgbImage(p.crop_height, p.crop_width);
      out.depth = DepthImage(p.crop_height, p.crop_width, 0.0f);
      for (int y = 0; y < p.crop_height; ++y) {
        for (int x = 0; x < p.crop_width; ++x) {
          std::copy_n(sample.rgb.at(y + p.y0, x + p.x0), 3, out.rgb.at(y, x));
          out.depth.at(y, x) = sample.depth.at(y + p.y0, x + p.x0);
        }
      }
      for (const auto& r : sample.rects) moved.push_back(r.translated(-p.x0, -p.y0));
      break;
    }
    case AugmentOp::kFlipH: {
      out.rgb = RgbImage(h, w);
      out.depth = DepthImage(h, w, 0.0f);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          std::copy_n(sample.rgb.at(y, w - 1 - x), 3, out.rgb.at(y, x));
          out.depth.at(y, x) = sample.depth.at(y, w - 1 - x);
        }
      }
      for (const auto& r : sample.rects)
        moved.emplace_back(Point{w - 1 - r.center().x, r.center().y}, kPi - r.angle(), r.width(), r.height());
      break;
    }
    case AugmentOp::kTranslate: {
      out.rgb = RgbImage(h, w);
      out.depth = DepthImage(h, w, std::nanf(""));
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int sy = y - p.dy, sx = x - p.dx;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          std::copy_n(sample.rgb.at(sy, sx), 3, out.rgb.at(y, x));
          out.depth.at(y, x) = sample.depth.at(sy, sx);
        }
      }
      for (const auto& r : sample.rects) moved.push_back(r.translated(p.dx, p.dy));
      break;
    }
  }
  for (const auto& r : moved)
    if (center_inside(r, out.rgb.width, out.rgb.height)) out.rects.push_back(r);
  if (out.rects.empty()) fail(ErrorCode::kEmptyLabels, "augmentation emptied labels");
  return out;
}

AugmentParams random_augment_params(const GraspSample& sample, Rng& rng) {
  const int h = sample.rgb.height;
  const int w = sample.rgb.width;
  AugmentParams p;
  p.op = static_cast<AugmentOp>(uniform_index(rng, 3));
  if (sample.rects.empty()) fail(ErrorCode::kEmptyLabels, "sample has no rectangles");
  const GraspRectangle& anchor = sample.rects[uniform_index(rng, sample.rects.size())];
  const Point c = anchor.center();
  switch (p.op) {
    case AugmentOp::kCrop: {
      const double f = uniform(rng, 0.8, 0.95);
      p.crop_width = std::max(1, static_cast<int>(std::lround(w * f)));
      p.crop_height = std::max(1, static_cast<int>(std::lround(h * f)));
      // Keep the anchor center inside [x0, x0 + crop_width - 1].
      const int x_lo = std::clamp(static_cast<int>(std::ceil(c.x - (p.crop_width - 1))), 0, w - p.crop_width);
      const int x_hi = std::clamp(static_cast<int>(std::floor(c.x)), x_lo, w - p.crop_width);
      const int y_lo = std::clamp(static_cast<int>(std::ceil(c.y - (p.crop_height - 1))), 0, h - p.crop_height);
      const int y_hi = std::clamp(static_cast<int>(std::floor(c.y)), y_lo, h - p.crop_height);
      p.x0 = x_lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(x_hi - x_lo + 1)));
      p.y0 = y_lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(y_hi - y_lo + 1)));
      break;
    }
    case AugmentOp::kFlipH:
      break;
    case AugmentOp::kTranslate: {
      const int max_dx = std::max(1, w / 10);
      const int max_dy = std::max(1, h / 10);
      p.dx = static_cast<int>(uniform_index(rng, 2 * max_dx + 1)) - max_dx;
      p.dy = static_cast<int>(uniform_index(rng, 2 * max_dy + 1)) - max_dy;
      // Shrink toward zero until the anchor stays in frame.
      while (!center_inside(anchor.translated(p.dx, p.dy), w, h)) {
        p.dx /= 2;
        p.dy /= 2;
      }
      break;
    }
  }
  return p;
}

Point InputTransform::to_network(Point p) const {
  return {(p.x - x0 + 0.5) * scale - 0.5, (p.y - y0 + 0.5) * scale - 0.5};
}

Point InputTransform::to_image(Point p) const {
  return {(p.x + 0.5) / scale - 0.5 + x0, (p.y + 0.5) / scale - 0.5 + y0};
}

std::vector<GraspRectangle> InputTransform::rects_to_network(const std::vector<GraspRectangle>& rects) const {
  std::vector<GraspRectangle> out;
  for (const auto& r : rects) {
    const Point c = to_network(r.center());
    GraspRectangle m(c, r.angle(), r.width() * scale, r.height() * scale);
    if (center_inside(m, out_size, out_size)) out.push_back(m);
  }
  return out;
}

GraspPose InputTransform::pose_to_image(const GraspPose& g) const {
  GraspPose out = g;
  out.center = to_image(g.center);
  out.width = g.width / scale;
  return out;
}

InputTransform make_input_transform(int height, int width, int out_size, int crop_size) {
  if (out_size <= 0 || out_size % 16 != 0) fail(ErrorCode::kInvalidArgument, "input size must be a positive multiple of 16");
  InputTransform t;
  const int side = std::min(height, width);
  t.crop = crop_size > 0 ? std::min(crop_size, side) : side;
  t.x0 = (width - t.crop) / 2;
  t.y0 = (height - t.crop) / 2;
  t.out_size = out_size;
  t.scale = static_cast<double>(out_size) / t.crop;
  return t;
}

NetworkInput to_network_input(const GraspSample& sample, int out_size, int crop_size) {
  const int h = sample.rgb.height;
  const int w = sample.rgb.width;
  NetworkInput out;
  out.size = out_size;
  out.transform = make_input_transform(h, w, out_size, crop_size);
  const InputTransform& t = out.transform;

  const DepthImage filled = inpaint_nearest(sample.depth);
  const cv::Rect roi(static_cast<int>(t.x0), static_cast<int>(t.y0), t.crop, t.crop);
  cv::Mat rgb(h, w, CV_8UC3, const_cast<std::uint8_t*>(sample.rgb.data.data()));
  cv::Mat depth(h, w, CV_32F, const_cast<float*>(filled.data.data()));
  const int interp = t.crop > out_size ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::Mat rgb_s, depth_s;
  cv::resize(rgb(roi), rgb_s, cv::Size(out_size, out_size), 0, 0, interp);
  cv::resize(depth(roi), depth_s, cv::Size(out_size, out_size), 0, 0, interp);

  const std::size_t plane = static_cast<std::size_t>(out_size) * out_size;
  out.data.assign(4 * plane, 0.0);
  double mean = 0.0;
  for (int y = 0; y < out_size; ++y) {
    const auto* row = rgb_s.ptr<std::uint8_t>(y);
    const auto* drow = depth_s.ptr<float>(y);
    for (int x = 0; x < out_size; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * out_size + x;
      for (int c = 0; c < 3; ++c) out.data[c * plane + idx] = row[3 * x + c] / 255.0;
      out.data[3 * plane + idx] = drow[x];
      mean += drow[x];
    }
  }
  mean /= static_cast<double>(plane);
  for (std::size_t i = 0; i < plane; ++i) out.data[3 * plane + i] = std::clamp(out.data[3 * plane + i] - mean, -1.0, 1.0);
  return out;
}

}  // namespace ggrasp
