#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace replan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline Vec2 operator*(Vec2 v, double s) { return s * v; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }

inline Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  if (n < 1e-12) throw std::invalid_argument("normalized: zero-length vector");
  return {v.x / n, v.y / n};
}

// Rectangle footprint; half_extents.x runs along the heading, .y across it.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  Vec2 half_extents;

  Vec2 axis_long() const { return unit_from_heading(heading); }
  Vec2 axis_lat() const { return {-std::sin(heading), std::cos(heading)}; }

  std::array<Vec2, 4> corners() const {
    const Vec2 u = axis_long();
    const Vec2 v = axis_lat();
    const Vec2 eu = half_extents.x * u;
    const Vec2 ev = half_extents.y * v;
    return {center + eu + ev, center - eu + ev, center - eu - ev, center + eu - ev};
  }
};

// Separating-axis test over the four face normals; touching boundaries count
// as overlap.
inline bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  const std::array<Vec2, 4> axes = {a.axis_long(), a.axis_lat(), b.axis_long(), b.axis_lat()};
  const Vec2 d = b.center - a.center;
  for (const Vec2& u : axes) {
    const double ra = a.half_extents.x * std::abs(dot(a.axis_long(), u)) +
                      a.half_extents.y * std::abs(dot(a.axis_lat(), u));
    const double rb = b.half_extents.x * std::abs(dot(b.axis_long(), u)) +
                      b.half_extents.y * std::abs(dot(b.axis_lat(), u));
    if (std::abs(dot(d, u)) > ra + rb) return false;
  }
  return true;
}

class ConvexPolygon {
 public:
  // Normalizes winding to CCW and rejects degenerate or non-convex rings.
  static ConvexPolygon make(std::vector<Vec2> pts) {
    if (pts.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
    double signed_area = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % pts.size()];
      signed_area += cross(a, b);
    }
    signed_area *= 0.5;
    if (std::abs(signed_area) < 1e-9) throw std::invalid_argument("degenerate polygon");
    if (signed_area < 0.0) std::reverse(pts.begin(), pts.end());
    for (size_t i = 0; i < pts.size(); ++i) {
      const Vec2 e0 = pts[(i + 1) % pts.size()] - pts[i];
      const Vec2 e1 = pts[(i + 2) % pts.size()] - pts[(i + 1) % pts.size()];
      if (cross(e0, e1) < -1e-9) throw std::invalid_argument("polygon is not convex");
    }
    ConvexPolygon p;
    p.vertices_ = std::move(pts);
    return p;
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }

  // Half-plane test, boundary inclusive.
  bool contains(Vec2 p) const {
    for (size_t i = 0; i < vertices_.size(); ++i) {
      const Vec2& a = vertices_[i];
      const Vec2& b = vertices_[(i + 1) % vertices_.size()];
      if (cross(b - a, p - a) < -1e-9) return false;
    }
    return true;
  }

  double area() const {
    double s = 0.0;
    for (size_t i = 0; i < vertices_.size(); ++i)
      s += cross(vertices_[i], vertices_[(i + 1) % vertices_.size()]);
    return 0.5 * std::abs(s);
  }

 private:
  std::vector<Vec2> vertices_;
};

inline bool point_in_any(const std::vector<ConvexPolygon>& polys, Vec2 p) {
  for (const auto& poly : polys)
    if (poly.contains(p)) return true;
  return false;
}

// ---- polyline helpers (routes, corridor centerlines) ----

inline double polyline_length(const std::vector<Vec2>& pts) {
  if (pts.size() < 2) throw std::invalid_argument("polyline needs at least 2 points");
  double len = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) len += distance(pts[i], pts[i + 1]);
  return len;
}

struct PathProjection {
  double arc = 0.0;       // arc length of the closest point
  double distance = 0.0;  // lateral offset to the polyline
};

inline PathProjection project_to_polyline(const std::vector<Vec2>& pts, Vec2 p) {
  if (pts.size() < 2) throw std::invalid_argument("polyline needs at least 2 points");
  PathProjection best{0.0, distance(pts.front(), p)};
  double acc = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i];
    const Vec2 b = pts[i + 1];
    const double seg_len = distance(a, b);
    if (seg_len > 1e-12) {
      const double t = std::clamp(dot(p - a, b - a) / (seg_len * seg_len), 0.0, 1.0);
      const Vec2 q = a + t * (b - a);
      const double d = distance(q, p);
      if (d < best.distance) best = {acc + t * seg_len, d};
    }
    acc += seg_len;
  }
  return best;
}

inline Vec2 polyline_point_at(const std::vector<Vec2>& pts, double arc) {
  if (pts.size() < 2) throw std::invalid_argument("polyline needs at least 2 points");
  if (arc <= 0.0) return pts.front();
  double acc = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg_len = distance(pts[i], pts[i + 1]);
    if (acc + seg_len >= arc && seg_len > 1e-12) {
      const double t = (arc - acc) / seg_len;
      return pts[i] + t * (pts[i + 1] - pts[i]);
    }
    acc += seg_len;
  }
  return pts.back();
}

inline Vec2 polyline_tangent_at(const std::vector<Vec2>& pts, double arc) {
  if (pts.size() < 2) throw std::invalid_argument("polyline needs at least 2 points");
  double acc = 0.0;
  Vec2 last_dir{1.0, 0.0};
  bool have_dir = false;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg_len = distance(pts[i], pts[i + 1]);
    if (seg_len > 1e-12) {
      last_dir = normalized(pts[i + 1] - pts[i]);
      have_dir = true;
      if (acc + seg_len >= arc) return last_dir;
    }
    acc += seg_len;
  }
  if (!have_dir) throw std::invalid_argument("polyline has no extent");
  return last_dir;
}

}  // namespace replan
