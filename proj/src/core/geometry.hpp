#pragma once

#include <array>
#include <numbers>
#include <span>
#include <vector>

namespace ggrasp {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline constexpr double kPi = std::numbers::pi;

/// Folds any angle into [0, pi). Grasps are symmetric under rotation by pi.
double normalize_angle(double radians);

/// Oriented grasp rectangle in image pixels.
///
/// `width` is the extent along the grasp axis (gripper opening), `height` the
/// extent across it (jaw plates). The angle is normalized on construction and
/// both extents must be strictly positive.
class GraspRectangle {
 public:
  GraspRectangle(Point center, double angle, double width, double height);

  Point center() const { return center_; }
  double angle() const { return angle_; }
  double width() const { return width_; }
  double height() const { return height_; }
  double area() const { return width_ * height_; }

  /// Unit vector along the grasp axis.
  Point axis() const;
  /// Unit vector along the jaw direction, axis rotated by +90 degrees.
  Point normal() const;

  GraspRectangle translated(double dx, double dy) const;
  GraspRectangle scaled(double factor) const;

  /// Corners counter-clockwise (in a y-up frame), starting at
  /// center - width/2 * axis - height/2 * normal. The first edge runs along
  /// the grasp axis.
  std::array<Point, 4> corners() const;

  friend bool operator==(const GraspRectangle&, const GraspRectangle&) = default;

 private:
  Point center_;
  double angle_;
  double width_;
  double height_;
};

struct GraspPose {
  Point center;
  double angle = 0.0;
  double width = 0.0;
  double quality = 0.0;
};

struct MetricConfig {
  double jaccard_threshold = 0.25;
  double angle_threshold = kPi / 6.0;

  void validate() const;
};

struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  /// Row-major camera->world rotation.
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};

  void validate() const;
};

struct WorldGrasp {
  std::array<double, 3> position{};
  double yaw = 0.0;
  double width = 0.0;
};

std::array<Point, 4> rect_corners(const GraspRectangle& r);

/// Signed shoelace area; positive for counter-clockwise order in a y-up frame.
double polygon_area(std::span<const Point> polygon);

/// Sutherland-Hodgman clip of `subject` against the convex, counter-clockwise
/// polygon `clip`.
std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip);

/// Intersection-over-union of two rectangles, exact up to floating point.
/// Bitwise symmetric in its arguments.
double jaccard(const GraspRectangle& a, const GraspRectangle& b);

/// Smallest difference between two grasp angles under pi-periodicity; in [0, pi/2].
double angle_difference(double a, double b);

struct MetricMatch {
  bool matched = false;
  double best_jaccard = 0.0;
  double best_angle_difference = 0.0;
};

/// Scores `pred` against every truth. For a match the reported pair comes from
/// the matching truth with the highest jaccard, otherwise from the truth with
/// the highest jaccard overall.
MetricMatch match_rectangle(const GraspRectangle& pred, std::span<const GraspRectangle> truths,
                            const MetricConfig& cfg);

bool rectangle_metric(const GraspRectangle& pred, std::span<const GraspRectangle> truths,
                      const MetricConfig& cfg);

WorldGrasp image_to_world(const GraspPose& g, double depth_at_center, const CameraModel& cam);

/// Pinhole projection of a world point into pixel coordinates.
Point project_to_image(const std::array<double, 3>& world, const CameraModel& cam);

}  // namespace ggrasp
