#pragma once

#include <algorithm>
#include <cmath>

namespace semloc {

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle in degrees to [0, 360).
inline double wrap_deg(double theta) {
  double t = std::fmod(theta, 360.0);
  if (t < 0.0) t += 360.0;
  return t;
}

// Absolute angular difference in degrees, wrapped to [0, 180].
inline double angular_difference_deg(double a, double b) {
  double d = std::fabs(wrap_deg(a) - wrap_deg(b));
  return d > 180.0 ? 360.0 - d : d;
}

// Signed smallest rotation from b to a, in (-180, 180].
inline double signed_angle_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

// Axis-aligned pixel box, corners inclusive of the coordinate span
// [x0,x1]x[y0,y1] with x0 <= x1 and y0 <= y1.
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  long long area() const {
    return static_cast<long long>(x1 - x0) * static_cast<long long>(y1 - y0);
  }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
};

// Minimum Euclidean distance between two boxes; 0 when they overlap or touch.
inline double box_distance(const PixelBox& a, const PixelBox& b) {
  double gx = std::max({0.0, static_cast<double>(b.x0 - a.x1),
                        static_cast<double>(a.x0 - b.x1)});
  double gy = std::max({0.0, static_cast<double>(b.y0 - a.y1),
                        static_cast<double>(a.y0 - b.y1)});
  return std::hypot(gx, gy);
}

inline double cross2(double ox, double oy, double ax, double ay, double bx,
                     double by) {
  return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
}

// Segment intersection test, inclusive of touching endpoints and collinear
// overlap.
inline bool segments_intersect(double ax, double ay, double bx, double by,
                               double cx, double cy, double dx, double dy) {
  double d1 = cross2(cx, cy, dx, dy, ax, ay);
  double d2 = cross2(cx, cy, dx, dy, bx, by);
  double d3 = cross2(ax, ay, bx, by, cx, cy);
  double d4 = cross2(ax, ay, bx, by, dx, dy);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  auto on_segment = [](double px, double py, double qx, double qy, double rx,
                       double ry) {
    return std::min(px, qx) <= rx && rx <= std::max(px, qx) &&
           std::min(py, qy) <= ry && ry <= std::max(py, qy);
  };
  if (d1 == 0 && on_segment(cx, cy, dx, dy, ax, ay)) return true;
  if (d2 == 0 && on_segment(cx, cy, dx, dy, bx, by)) return true;
  if (d3 == 0 && on_segment(ax, ay, bx, by, cx, cy)) return true;
  if (d4 == 0 && on_segment(ax, ay, bx, by, dx, dy)) return true;
  return false;
}

// Parameter t >= 0 at which the ray origin + t*dir first hits the segment,
// or a negative value when it does not.
inline double ray_segment_hit(double ox, double oy, double dirx, double diry,
                              double ax, double ay, double bx, double by) {
  double sx = bx - ax;
  double sy = by - ay;
  double denom = dirx * sy - diry * sx;
  if (std::fabs(denom) < 1e-12) return -1.0;
  double t = ((ax - ox) * sy - (ay - oy) * sx) / denom;
  double u = ((ax - ox) * diry - (ay - oy) * dirx) / denom;
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return -1.0;
}

}  // namespace semloc
