#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "replan/geometry.hpp"
#include "replan/reflect.hpp"
#include "replan/scene.hpp"

namespace replan {

namespace detail {

class SvgCanvas {
 public:
  SvgCanvas(double min_x, double min_y, double max_x, double max_y, double px_per_m)
      : min_x_(min_x), max_y_(max_y), scale_(px_per_m) {
    width_ = (max_x - min_x) * scale_;
    height_ = (max_y - min_y) * scale_;
  }

  double sx(double x) const { return (x - min_x_) * scale_; }
  double sy(double y) const { return (max_y_ - y) * scale_; }  // y grows upward on the road

  std::string header() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                  "viewBox=\"0 0 %.0f %.0f\">\n<rect width=\"100%%\" height=\"100%%\" "
                  "fill=\"#ffffff\"/>\n",
                  width_, height_, width_, height_);
    return buf;
  }

  std::string polygon(const std::vector<Vec2>& pts, const char* fill, const char* stroke,
                      double stroke_w, bool close = true) const {
    std::string out = close ? "<polygon points=\"" : "<polyline points=\"";
    char buf[64];
    for (const Vec2& p : pts) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(p.x), sy(p.y));
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "\" fill=\"%s\" stroke=\"%s\" stroke-width=\"%.2f\"/>\n",
                  fill, stroke, stroke_w);
    out += buf;
    return out;
  }

  std::string circle(Vec2 c, double r_px, const char* fill, const char* stroke,
                     double stroke_w) const {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\" stroke=\"%s\" "
                  "stroke-width=\"%.2f\"/>\n",
                  sx(c.x), sy(c.y), r_px, fill, stroke, stroke_w);
    return buf;
  }

 private:
  double min_x_, max_y_, scale_, width_, height_;
};

// Light-to-dark blue ramp over the iteration index (Figure-style darkening).
inline std::string iteration_color(int index, int count) {
  const double u = count <= 1 ? 1.0 : static_cast<double>(index) / (count - 1);
  const int r = static_cast<int>(190 + u * (15 - 190));
  const int g = static_cast<int>(210 + u * (60 - 210));
  const int b = static_cast<int>(250 + u * (145 - 250));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace detail

// Bird's-eye overlay: drivable area, agents, goal proposals, and every
// regeneration iteration's trajectory, darkening toward the final (bold) one.
inline std::string scene_svg(const Scene& scene, const ReflectionTrace& trace,
                             const GoalSet& goals, int selected_goal = -1,
                             double px_per_m = 8.0) {
  double min_x = -8.0, min_y = -8.0, max_x = 8.0, max_y = 8.0;
  auto grow = [&](Vec2 p) {
    min_x = std::min(min_x, p.x - 3.0);
    min_y = std::min(min_y, p.y - 3.0);
    max_x = std::max(max_x, p.x + 3.0);
    max_y = std::max(max_y, p.y + 3.0);
  };
  for (const ConvexPolygon& poly : scene.drivable_area)
    for (const Vec2& v : poly.vertices()) grow(v);
  for (const Agent& a : scene.agents) grow(a.center);
  for (const ReflectionIteration& it : trace.iterations)
    for (const Vec2& p : it.trajectory.waypoints) grow(p);

  detail::SvgCanvas cv(min_x, min_y, max_x, max_y, px_per_m);
  std::string out = cv.header();

  for (const ConvexPolygon& poly : scene.drivable_area)
    out += cv.polygon(poly.vertices(), "#e3e3e3", "#b5b5b5", 1.0);

  for (const Vec2& p : scene.route.points) out += cv.circle(p, 1.2, "#c9c9c9", "none", 0.0);

  for (const Agent& a : scene.agents) {
    const OrientedBox box{a.center, a.heading, a.half_extents};
    const auto corners = box.corners();
    const char* fill = a.kind == AgentKind::vehicle      ? "#6699cc"
                       : a.kind == AgentKind::pedestrian ? "#ee6677"
                                                         : "#888888";
    out += cv.polygon({corners.begin(), corners.end()}, fill, "#333333", 1.0);
  }

  // Ego footprint at the origin.
  const OrientedBox ego{{0.0, 0.0}, scene.ego.heading, scene.ego.footprint_half_extents};
  const auto ec = ego.corners();
  out += cv.polygon({ec.begin(), ec.end()}, "#44aa77", "#1d5c3d", 1.2);

  for (size_t gi = 0; gi < goals.goals.size(); ++gi) {
    const bool sel = static_cast<int>(gi) == selected_goal;
    out += cv.circle(goals.goals[gi].position, sel ? 5.0 : 3.5, sel ? "#228833" : "#9fd4ae",
                     "#1d5c3d", 1.0);
  }

  const int n_iter = static_cast<int>(trace.iterations.size());
  for (int i = 0; i < n_iter; ++i) {
    const auto& wps = trace.iterations[i].trajectory.waypoints;
    std::vector<Vec2> line;
    line.reserve(wps.size() + 1);
    line.push_back({0.0, 0.0});
    line.insert(line.end(), wps.begin(), wps.end());
    const bool last = i == n_iter - 1;
    out += cv.polygon(line, "none", detail::iteration_color(i, n_iter).c_str(),
                      last ? 3.0 : 1.5, /*close=*/false);
    if (last)
      for (const Vec2& p : wps) out += cv.circle(p, 2.0, "#0f3c91", "none", 0.0);
  }

  out += "</svg>\n";
  return out;
}

namespace detail {

inline std::string svg_text(double x, double y, const std::string& s, int size = 12,
                            const char* anchor = "start") {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"%d\" font-family=\"sans-serif\" "
                "text-anchor=\"%s\">%s</text>\n",
                x, y, size, anchor, s.c_str());
  return buf;
}

}  // namespace detail

// Bars indexed 0..n-1 (e.g. the repair-iteration histogram).
inline std::string bar_chart_svg(const std::vector<int>& counts, const std::string& title,
                                 const std::string& x_label) {
  const double w = 480, h = 320, ml = 50, mb = 50, mt = 40, mr = 20;
  int peak = 1;
  for (int c : counts) peak = std::max(peak, c);
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" "
      "viewBox=\"0 0 480 320\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += detail::svg_text(w / 2, 22, title, 14, "middle");
  out += detail::svg_text(w / 2, h - 10, x_label, 12, "middle");
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#333\"/>\n", ml,
                h - mb, w - mr, h - mb);
  out += buf;
  const size_t n = std::max<size_t>(counts.size(), 1);
  const double bw = (w - ml - mr) / n;
  for (size_t i = 0; i < counts.size(); ++i) {
    const double bh = (h - mb - mt) * counts[i] / peak;
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"#4477aa\"/>\n",
                  ml + i * bw + 2, h - mb - bh, bw - 4, bh);
    out += buf;
    out += detail::svg_text(ml + i * bw + bw / 2, h - mb + 16, std::to_string(i), 11, "middle");
    if (counts[i] > 0)
      out += detail::svg_text(ml + i * bw + bw / 2, h - mb - bh - 4, std::to_string(counts[i]),
                              11, "middle");
  }
  out += "</svg>\n";
  return out;
}

// Scatter of (x, y) samples with auto-scaled axes (e.g. iterations vs. time).
inline std::string scatter_svg(const std::vector<Vec2>& pts, const std::string& title,
                               const std::string& x_label, const std::string& y_label) {
  const double w = 480, h = 320, ml = 60, mb = 50, mt = 40, mr = 20;
  double max_x = 1e-9, max_y = 1e-9;
  for (const Vec2& p : pts) {
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"320\" "
      "viewBox=\"0 0 480 320\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += detail::svg_text(w / 2, 22, title, 14, "middle");
  out += detail::svg_text(w / 2, h - 10, x_label, 12, "middle");
  out += detail::svg_text(14, mt - 10, y_label, 12, "start");
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#333\"/>\n"
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#333\"/>\n",
                ml, h - mb, w - mr, h - mb, ml, h - mb, ml, mt);
  out += buf;
  std::snprintf(buf, sizeof(buf), "%.3g", max_y);
  out += detail::svg_text(ml - 6, mt + 4, buf, 10, "end");
  std::snprintf(buf, sizeof(buf), "%.3g", max_x);
  out += detail::svg_text(w - mr, h - mb + 16, buf, 10, "middle");
  for (const Vec2& p : pts) {
    const double x = ml + (w - ml - mr) * (p.x / max_x);
    const double y = h - mb - (h - mb - mt) * (p.y / max_y);
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"#44aa77\" "
                  "fill-opacity=\"0.6\"/>\n",
                  x, y);
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace replan
