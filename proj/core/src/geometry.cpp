#include "flexcouple/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flexcouple {

double Point2::norm() const { return std::hypot(x, y); }

double wrap_angle(double a) {
  double t = std::remainder(a, 2.0 * std::numbers::pi);
  if (t <= -std::numbers::pi) t = std::numbers::pi;  // half-open at -pi
  return t;
}

Point2 transform_point(const Pose2& pose, const Point2& p_body) {
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  return {pose.position.x + c * p_body.x - s * p_body.y,
          pose.position.y + s * p_body.x + c * p_body.y};
}

Point2 inverse_transform_point(const Pose2& pose, const Point2& p_world) {
  const double c = std::cos(pose.heading), s = std::sin(pose.heading);
  const Point2 d = p_world - pose.position;
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

ConvexPolygon::ConvexPolygon(std::vector<Point2> vertices)
    : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& a = vertices_[k];
    const Point2& b = vertices_[(k + 1) % n];
    const Point2& c = vertices_[(k + 2) % n];
    // every consecutive turn must be strictly left (CCW, strictly convex)
    if ((b - a).cross(c - b) <= 0.0)
      throw std::invalid_argument("polygon must be strictly convex and CCW");
  }
}

double ConvexPolygon::signed_area() const {
  double twice = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t k = 0; k < n; ++k)
    twice += vertices_[k].cross(vertices_[(k + 1) % n]);
  return 0.5 * twice;
}

std::vector<double> pip_residuals(const Point2& p, const ConvexPolygon& poly) {
  const auto& v = poly.vertices();
  const std::size_t n = v.size();
  std::vector<double> r(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& a = v[k];
    const Point2& b = v[(k + 1) % n];
    r[k] = (b.y - a.y) * (p.x - a.x) - (b.x - a.x) * (p.y - a.y);
  }
  return r;
}

bool point_in_polygon(const Point2& p, const ConvexPolygon& poly,
                      double margin) {
  if (margin < 0.0) throw std::invalid_argument("margin must be >= 0");
  const auto& v = poly.vertices();
  const std::size_t n = v.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& a = v[k];
    const Point2& b = v[(k + 1) % n];
    const double r = (b.y - a.y) * (p.x - a.x) - (b.x - a.x) * (p.y - a.y);
    if (r > -margin * (b - a).norm()) return false;
  }
  return true;
}

double wrap_angle_cost(double dtheta, double cap) {
  const double t = std::tan(0.5 * dtheta);
  const double c = t * t;
  return (std::isfinite(c) && c < cap) ? c : cap;
}

double wrap_angle_cost_derivative(double dtheta, double cap) {
  const double t = std::tan(0.5 * dtheta);
  const double c = t * t;
  if (!std::isfinite(c) || c >= cap) return 0.0;  // capped: flat
  return t * (1.0 + c);                           // d/dx tan^2(x/2)
}

Point2 RobotFootprint::connection_offset(Face face) const {
  switch (face) {
    case Face::back:
      return {-half_depth, 0.0};
    case Face::front:
      return {half_depth - seat_recess, 0.0};
    case Face::left_knob:
      return {0.0, half_width + seat_recess};
    case Face::right_knob:
      return {0.0, -half_width - seat_recess};
    case Face::left_hole:
      return {0.0, half_width - seat_recess};
    case Face::right_hole:
      return {0.0, -half_width + seat_recess};
  }
  throw std::invalid_argument("unknown face");
}

void RobotFootprint::validate() const {
  if (half_width <= 0.0 || half_depth <= 0.0 || anchor_length <= 0.0)
    throw std::invalid_argument("footprint lengths must be positive");
  if (seat_recess <= 0.0 || seat_recess >= std::min(half_width, half_depth))
    throw std::invalid_argument("seat_recess must fit inside the body");
  if (mouth_halfwidth <= 0.0 || mouth_halfwidth > half_width)
    throw std::invalid_argument("mouth_halfwidth must be in (0, half_width]");
  if (mouth_max_angle <= 0.0 || mouth_max_angle > std::numbers::pi / 2)
    throw std::invalid_argument("mouth_max_angle must be in (0, pi/2]");
}

ConvexPolygon footprint_polygon(const Pose2& pose, const RobotFootprint& fp) {
  return ConvexPolygon({
      transform_point(pose, {fp.half_depth, -fp.half_width}),
      transform_point(pose, {fp.half_depth, fp.half_width}),
      transform_point(pose, {-fp.half_depth, fp.half_width}),
      transform_point(pose, {-fp.half_depth, -fp.half_width}),
  });
}

ConvexPolygon opening_triangle(const Pose2& pose, const RobotFootprint& fp) {
  return ConvexPolygon({
      transform_point(pose, {0.0, 0.0}),
      transform_point(pose, fp.front_right_corner()),
      transform_point(pose, fp.front_left_corner()),
  });
}

}  // namespace flexcouple
