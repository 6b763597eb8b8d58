#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "error.hpp"

namespace ggrasp {

double normalize_angle(double radians) {
  if (!std::isfinite(radians)) fail(ErrorCode::kInvalidArgument, "angle is not finite");
  double a = std::fmod(radians, kPi);
  if (a < 0.0) a += kPi;
  // fmod of a tiny negative value plus pi rounds to pi itself.
  if (a >= kPi) a = 0.0;
  return a;
}

GraspRectangle::GraspRectangle(Point center, double angle, double width, double height)
    : center_(center), angle_(normalize_angle(angle)), width_(width), height_(height) {
  if (!std::isfinite(center.x) || !std::isfinite(center.y))
    fail(ErrorCode::kInvalidArgument, "rectangle center is not finite");
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height))
    fail(ErrorCode::kDegenerate, "degenerate rectangle");
}

Point GraspRectangle::axis() const { return {std::cos(angle_), std::sin(angle_)}; }

Point GraspRectangle::normal() const { return {-std::sin(angle_), std::cos(angle_)}; }

GraspRectangle GraspRectangle::translated(double dx, double dy) const {
  return GraspRectangle({center_.x + dx, center_.y + dy}, angle_, width_, height_);
}

GraspRectangle GraspRectangle::scaled(double factor) const {
  return GraspRectangle({center_.x * factor, center_.y * factor}, angle_, width_ * factor,
                        height_ * factor);
}

std::array<Point, 4> GraspRectangle::corners() const {
  const Point u = axis();
  const Point v = normal();
  const double hw = width_ / 2.0;
  const double hh = height_ / 2.0;
  auto at = [&](double su, double sv) {
    return Point{center_.x + su * u.x + sv * v.x, center_.y + su * u.y + sv * v.y};
  };
  return {at(-hw, -hh), at(hw, -hh), at(hw, hh), at(-hw, hh)};
}

std::array<Point, 4> rect_corners(const GraspRectangle& r) { return r.corners(); }

double polygon_area(std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    twice += polygon[j].x * polygon[i].y - polygon[i].x * polygon[j].y;
  }
  return twice / 2.0;
}

namespace {

double cross(Point a, Point b, Point p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

Point intersect(Point p1, Point p2, Point a, Point b) {
  const double d1 = cross(a, b, p1);
  const double d2 = cross(a, b, p2);
  const double t = d1 / (d1 - d2);
  return {p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y)};
}

}  // namespace

std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
  std::vector<Point> out(subject.begin(), subject.end());
  std::vector<Point> in;
  const std::size_t m = clip.size();
  for (std::size_t e2 = 0, e1 = m - 1; e2 < m && !out.empty(); e1 = e2++) {
    in.swap(out);
    out.clear();
    const Point a = clip[e1];
    const Point b = clip[e2];
    const std::size_t n = in.size();
    for (std::size_t v2 = 0, v1 = n - 1; v2 < n; v1 = v2++) {
      const bool in1 = cross(a, b, in[v1]) >= 0.0;
      const bool in2 = cross(a, b, in[v2]) >= 0.0;
      if (in1 && in2) {
        out.push_back(in[v2]);
      } else if (in1 && !in2) {
        out.push_back(intersect(in[v1], in[v2], a, b));
      } else if (!in1 && in2) {
        out.push_back(intersect(in[v1], in[v2], a, b));
        out.push_back(in[v2]);
      }
    }
  }
  return out;
}

double jaccard(const GraspRectangle& a, const GraspRectangle& b) {
  if (!(a.area() > 1e-12) || !(b.area() > 1e-12)) fail(ErrorCode::kDegenerate, "degenerate rectangle");
  auto key = [](const GraspRectangle& r) {
    return std::tuple(r.center().x, r.center().y, r.angle(), r.width(), r.height());
  };
  const GraspRectangle& first = key(a) <= key(b) ? a : b;
  const GraspRectangle& second = key(a) <= key(b) ? b : a;

  const auto ca = first.corners();
  const auto cb = second.corners();
  const auto clipped = clip_convex(ca, cb);
  const double inter = std::max(0.0, polygon_area(clipped));
  const double uni = first.area() + second.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double angle_difference(double a, double b) {
  const double d = std::fmod(std::fabs(a - b), kPi);
  return std::min(d, kPi - d);
}

void MetricConfig::validate() const {
  if (!(jaccard_threshold > 0.0 && jaccard_threshold < 1.0))
    fail(ErrorCode::kInvalidArgument, "jaccard threshold must lie in (0, 1)");
  if (!(angle_threshold > 0.0 && angle_threshold <= kPi / 2.0))
    fail(ErrorCode::kInvalidArgument, "angle threshold must lie in (0, pi/2]");
}

MetricMatch match_rectangle(const GraspRectangle& pred, std::span<const GraspRectangle> truths,
                            const MetricConfig& cfg) {
  if (truths.empty()) fail(ErrorCode::kNoGroundTruth, "no ground truth");
  MetricMatch best_any;
  MetricMatch best_hit;
  double best_any_j = -1.0;
  for (const auto& t : truths) {
    const double j = jaccard(pred, t);
    const double d = angle_difference(pred.angle(), t.angle());
    const bool hit = j > cfg.jaccard_threshold && d < cfg.angle_threshold;
    if (hit && (!best_hit.matched || j > best_hit.best_jaccard)) best_hit = {true, j, d};
    if (j > best_any_j) {
      best_any_j = j;
      best_any = {false, j, d};
    }
  }
  return best_hit.matched ? best_hit : best_any;
}

bool rectangle_metric(const GraspRectangle& pred, std::span<const GraspRectangle> truths,
                      const MetricConfig& cfg) {
  return match_rectangle(pred, truths, cfg).matched;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  const auto& r = rotation;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[3 * k + i] * r[3 * k + j];
      if (std::fabs(dot - (i == j ? 1.0 : 0.0)) > 1e-9)
        fail(ErrorCode::kInvalidArgument, "camera rotation is not orthonormal");
    }
  }
  const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
  if (std::fabs(det - 1.0) > 1e-9) fail(ErrorCode::kInvalidArgument, "camera rotation determinant is not +1");
}

WorldGrasp image_to_world(const GraspPose& g, double depth_at_center, const CameraModel& cam) {
  if (!(depth_at_center > 0.0) || !std::isfinite(depth_at_center))
    fail(ErrorCode::kInvalidDepth, "invalid depth");
  cam.validate();
  const double z = depth_at_center;
  // Back-projection into the camera frame.
  const std::array<double, 3> pc{(g.center.x - cam.cx) * z / cam.fx, (g.center.y - cam.cy) * z / cam.fy, z};
  const double c = std::cos(g.angle);
  const double s = std::sin(g.angle);
  const std::array<double, 3> dc{c / cam.fx, s / cam.fy, 0.0};

  const auto& r = cam.rotation;
  WorldGrasp out;
  std::array<double, 3> dw{};
  for (int i = 0; i < 3; ++i) {
    out.position[i] = r[3 * i] * pc[0] + r[3 * i + 1] * pc[1] + r[3 * i + 2] * pc[2] + cam.translation[i];
    dw[i] = r[3 * i] * dc[0] + r[3 * i + 1] * dc[1] + r[3 * i + 2] * dc[2];
  }
  out.yaw = std::atan2(dw[1], dw[0]);
  out.width = g.width * z * std::hypot(dc[0], dc[1]);
  return out;
}

Point project_to_image(const std::array<double, 3>& world, const CameraModel& cam) {
  const auto& r = cam.rotation;
  std::array<double, 3> d{world[0] - cam.translation[0], world[1] - cam.translation[1],
                          world[2] - cam.translation[2]};
  std::array<double, 3> pc{};
  for (int i = 0; i < 3; ++i) pc[i] = r[i] * d[0] + r[3 + i] * d[1] + r[6 + i] * d[2];
  if (!(pc[2] > 0.0)) fail(ErrorCode::kInvalidDepth, "point behind camera");
  return {cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy};
}

}  // namespace ggrasp
