#pragma once

// Planar geometry for rectangular robots with flexible coupling hardware:
// poses, convex polygons, and the linear point-in-polygon residuals the
// controller uses as hard constraints.

#include <cstddef>
#include <vector>

namespace flexcouple {

struct Point2 {
  double x{0.0};
  double y{0.0};

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Point2& o) const { return x * o.x + y * o.y; }
  double cross(const Point2& o) const { return x * o.y - y * o.x; }
  double norm() const;
};

// Maps any angle to (-pi, pi].
double wrap_angle(double a);

struct Pose2 {
  Point2 position;
  double heading{0.0};  // rad, kept in (-pi, pi] by the dynamics
};

// World coordinates of a body-frame point.
Point2 transform_point(const Pose2& pose, const Point2& p_body);
// Body-frame coordinates of a world point.
Point2 inverse_transform_point(const Pose2& pose, const Point2& p_world);

// Counter-clockwise convex polygon. Construction rejects anything that is
// not strictly convex and CCW (repeated vertices, clockwise winding,
// collinear runs, fewer than 3 vertices) with std::invalid_argument, so
// every instance downstream is safe to query without re-validation.
class ConvexPolygon {
 public:
  explicit ConvexPolygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double signed_area() const;

 private:
  std::vector<Point2> vertices_;
};

// One linear residual per edge k (indices wrap):
//   r_k = (y_{k+1} - y_k)(x - x_k) - (x_{k+1} - x_k)(y - y_k)
// All r_k <= 0 exactly when p lies inside the CCW polygon; each r_k is
// affine in p, which is what lets the controller impose membership as
// linear inequality rows.
std::vector<double> pip_residuals(const Point2& p, const ConvexPolygon& poly);

// Margin-aware membership: p counts as inside only if it clears every edge
// line by at least `margin` meters (r_k <= -margin * ||edge_k||).
// margin = 0 is plain membership; margin must be >= 0.
bool point_in_polygon(const Point2& p, const ConvexPolygon& poly,
                      double margin = 0.0);

// Smooth heading-error cost min(tan^2(dtheta/2), cap): 2*pi-periodic, zero
// at alignment, finite at anti-alignment thanks to the cap.
double wrap_angle_cost(double dtheta, double cap = 1e6);
double wrap_angle_cost_derivative(double dtheta, double cap = 1e6);

// Which mounting point on the body a connection endpoint refers to.
// `back` is the sprung anchor (the only actuated coupler); `front` is the
// seat at the bottom of the front opening; the side faces carry passive
// knob/hole pairs (the knob protrudes, the hole recesses).
enum class Face { back, front, left_knob, right_knob, left_hole, right_hole };

// Rectangular body, front toward +x in the body frame. All lengths meters.
struct RobotFootprint {
  double half_width{0.025};
  double half_depth{0.025};
  double anchor_length{0.015};   // sprung anchor reach beyond the back face
  double seat_recess{0.005};     // depth of the front seat / knob protrusion
  double mouth_halfwidth{0.010}; // lateral capture window of the front opening
  double mouth_max_angle{0.35};  // relative-heading capture window, rad

  // Body-frame offset of the connection point on a face. The back point is
  // the anchor base on the back face; the front point sits seat_recess
  // inside the front face; knobs protrude seat_recess beyond their face and
  // holes recess seat_recess into theirs, so mated faces touch exactly.
  Point2 connection_offset(Face face) const;

  Point2 front_right_corner() const { return {half_depth, -half_width}; }
  Point2 front_left_corner() const { return {half_depth, half_width}; }

  // Anchor head rest position (tip, spring relaxed) in the body frame.
  Point2 anchor_head_offset() const {
    return {-half_depth - anchor_length, 0.0};
  }

  // Throws std::invalid_argument unless all lengths are positive and the
  // seat recess fits inside the body.
  void validate() const;
};

// Body rectangle in world coordinates, CCW.
ConvexPolygon footprint_polygon(const Pose2& pose, const RobotFootprint& fp);

// Head-opening triangle (center, front-right corner, front-left corner) in
// world coordinates; that vertex order is CCW.
ConvexPolygon opening_triangle(const Pose2& pose, const RobotFootprint& fp);

}  // namespace flexcouple
