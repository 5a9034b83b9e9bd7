#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/errors.hpp"
#include "replan/geometry.hpp"

namespace replan {

enum class AgentKind { vehicle, pedestrian, static_obstacle };

// One sample of a scripted ground-truth future (the alternative to the
// constant-velocity assumption).
struct ScriptedPose {
  double t = 0.0;
  Vec2 center;
  double heading = 0.0;
};

struct Agent {
  Vec2 center;
  double heading = 0.0;
  Vec2 half_extents{2.3, 0.95};
  Vec2 velocity;
  AgentKind kind = AgentKind::vehicle;
  std::vector<ScriptedPose> scripted_future;  // empty unless the scenario scripts one
};

struct EgoState {
  double speed = 0.0;
  double heading = 0.0;  // radians, 0 along +x
  Vec2 footprint_half_extents{2.4, 1.05};
};

enum class TurnLabel { straight, left, right };

struct Route {
  std::vector<Vec2> points;  // starts at the ego origin
  TurnLabel turn = TurnLabel::straight;
};

// Everything in the ego frame at t = 0: ego at the origin, heading 0.
struct Scene {
  std::string scene_id;
  std::string kind;
  uint64_t seed = 0;
  std::vector<ConvexPolygon> drivable_area;
  std::vector<Agent> agents;
  EgoState ego;
  Route route;
  int horizon_N = 16;
  double dt = 0.25;
  ContinuousTrajectory reference_trajectory;  // hidden feasible solution, oracle-only
};

// Constant-velocity rollout; heading stays fixed.
inline OrientedBox agent_pose_at(const Agent& a, double t) {
  if (t < 0.0) throw std::invalid_argument("agent_pose_at: negative time");
  return {a.center + t * a.velocity, a.heading, a.half_extents};
}

// Piecewise-linear scripted motion, clamped outside the sampled span. Falls
// back to the constant-velocity rollout when no script is present.
inline OrientedBox agent_scripted_pose_at(const Agent& a, double t) {
  const auto& s = a.scripted_future;
  if (s.empty()) return agent_pose_at(a, t);
  if (t <= s.front().t) return {s.front().center, s.front().heading, a.half_extents};
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    if (t <= s[i + 1].t) {
      const double span = s[i + 1].t - s[i].t;
      const double u = span > 1e-12 ? (t - s[i].t) / span : 0.0;
      return {s[i].center + u * (s[i + 1].center - s[i].center),
              s[i].heading + u * (s[i + 1].heading - s[i].heading), a.half_extents};
    }
  }
  return {s.back().center, s.back().heading, a.half_extents};
}

// Compliance definition used throughout: all 4 corners plus the center inside
// the union of drivable polygons.
inline bool footprint_in_drivable(const OrientedBox& box, const Scene& scene) {
  if (!point_in_any(scene.drivable_area, box.center)) return false;
  for (const Vec2& c : box.corners())
    if (!point_in_any(scene.drivable_area, c)) return false;
  return true;
}

inline void validate_scene(const Scene& scene) {
  if (scene.horizon_N < 1) throw ValidationError("scene: horizon_N must be >= 1");
  if (!(scene.dt > 0.0)) throw ValidationError("scene: dt must be positive");
  if (scene.drivable_area.empty()) throw ValidationError("scene: empty drivable area");
  if (scene.route.points.size() < 2) throw ValidationError("scene: route needs >= 2 points");
  if (norm(scene.route.points.front()) > 1e-6)
    throw ValidationError("scene: route must start at the ego origin");
  if (scene.ego.speed < 0.0) throw ValidationError("scene: negative ego speed");
  if (!(scene.ego.footprint_half_extents.x > 0.0) || !(scene.ego.footprint_half_extents.y > 0.0))
    throw ValidationError("scene: ego footprint extents must be positive");
  if (!point_in_any(scene.drivable_area, {0.0, 0.0}))
    throw ValidationError("scene: ego origin outside the drivable area");
  for (const Agent& a : scene.agents) {
    if (!(a.half_extents.x > 0.0) || !(a.half_extents.y > 0.0))
      throw ValidationError("scene: agent extents must be positive");
    for (size_t i = 0; i + 1 < a.scripted_future.size(); ++i)
      if (a.scripted_future[i + 1].t < a.scripted_future[i].t)
        throw ValidationError("scene: scripted future not time-sorted");
  }
  if (!scene.reference_trajectory.waypoints.empty() &&
      static_cast<int>(scene.reference_trajectory.waypoints.size()) != scene.horizon_N)
    throw ValidationError("scene: reference trajectory length != horizon_N");
}

// Cubic Hermite ride from the ego origin to `goal`: leaves with the current
// speed along the ego heading, arrives along the route tangent at the goal's
// projection, with the exit speed chosen so the average speed covers the
// straight-line distance.
inline ContinuousTrajectory kinematic_reference(const Scene& scene, Vec2 goal) {
  if (!std::isfinite(goal.x) || !std::isfinite(goal.y))
    throw std::invalid_argument("kinematic_reference: non-finite goal");
  const double horizon = scene.horizon_N * scene.dt;
  if (!(horizon > 0.0)) throw std::invalid_argument("kinematic_reference: empty horizon");
  const Vec2 dir0 = unit_from_heading(scene.ego.heading);
  if (dot(goal, dir0) < -1.0)
    throw std::invalid_argument("kinematic_reference: goal behind the ego");

  const double dist = norm(goal);
  const double v_end = std::max(0.0, 2.0 * dist / horizon - scene.ego.speed);
  Vec2 end_dir = dir0;
  if (scene.route.points.size() >= 2 && v_end > 0.0) {
    const PathProjection proj = project_to_polyline(scene.route.points, goal);
    end_dir = polyline_tangent_at(scene.route.points, proj.arc);
  }
  const Vec2 m0 = (scene.ego.speed * horizon) * dir0;
  const Vec2 m1 = (v_end * horizon) * end_dir;

  ContinuousTrajectory out;
  out.dt = scene.dt;
  out.waypoints.reserve(scene.horizon_N);
  for (int j = 1; j <= scene.horizon_N; ++j) {
    const double u = static_cast<double>(j) / scene.horizon_N;
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double h10 = u3 - 2.0 * u2 + u;
    const double h01 = -2.0 * u3 + 3.0 * u2;
    const double h11 = u3 - u2;
    out.waypoints.push_back(h10 * m0 + h01 * goal + h11 * m1);  // start point is the origin
  }
  return out;
}

}  // namespace replan
