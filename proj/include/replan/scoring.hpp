#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/scene.hpp"

namespace replan {

enum class AgentFutureMode { constant_velocity, scripted_ground_truth };

struct ScoringConfig {
  double a_lon_max = 4.0;   // m/s^2
  double a_lat_max = 4.9;   // m/s^2
  double jerk_max = 8.0;    // m/s^3
  double ttc_horizon = 2.0; // s
  double ttc_step = 0.1;    // s
  double ep_speed_cap = 15.0;     // m/s, caps the achievable-progress bound
  double coherence_sigma = 1.0;   // m, falloff of the local-score kernel
  int window = 1;                 // half-width w of the safety window
  double safety_threshold = 1.0;  // windowed score below this flags a violation
  AgentFutureMode agent_future = AgentFutureMode::constant_velocity;
};

struct ScoreBreakdown {
  double m_nc = 0.0;
  double m_dac = 0.0;
  double m_ep = 0.0;
  double m_ttc = 0.0;
  double m_comfort = 0.0;
  double hard = 0.0;     // m_nc * m_dac
  double quality = 0.0;  // (5*m_ep + 5*m_ttc + 2*m_comfort) / 12
  double total = 0.0;    // hard * quality
};

enum class ViolationKind { collision, drivable_area, ttc };

struct WaypointSafetyReport {
  std::vector<double> per_waypoint_score;  // windowed, length N
  std::optional<int> first_violation_index;
  std::optional<ViolationKind> violation_kind;
};

inline OrientedBox agent_box_at(const Agent& a, double t, AgentFutureMode mode) {
  if (mode == AgentFutureMode::scripted_ground_truth && !a.scripted_future.empty())
    return agent_scripted_pose_at(a, t);
  return agent_pose_at(a, t);
}

// Heading at waypoint j = atan2 of the forward difference (backward at the
// last waypoint); degenerate segments inherit the previous heading, starting
// from the ego heading.
inline std::vector<double> waypoint_headings(const ContinuousTrajectory& traj,
                                             double ego_heading) {
  const auto& p = traj.waypoints;
  const int n = static_cast<int>(p.size());
  if (n == 0) throw std::invalid_argument("waypoint_headings: empty trajectory");
  std::vector<double> h(n);
  double prev = ego_heading;
  for (int j = 0; j < n; ++j) {
    Vec2 d;
    if (j + 1 < n)
      d = p[j + 1] - p[j];
    else if (n >= 2)
      d = p[j] - p[j - 1];
    else
      d = p[0];  // single waypoint: direction from the origin
    if (norm(d) > 1e-9) prev = std::atan2(d.y, d.x);
    h[j] = prev;
  }
  return h;
}

// Speed over the segment arriving at waypoint j; the ego origin precedes j=0.
inline std::vector<double> waypoint_speeds(const ContinuousTrajectory& traj) {
  const auto& p = traj.waypoints;
  if (p.empty()) throw std::invalid_argument("waypoint_speeds: empty trajectory");
  if (!(traj.dt > 0.0)) throw std::invalid_argument("waypoint_speeds: dt must be positive");
  std::vector<double> v(p.size());
  Vec2 prev{0.0, 0.0};
  for (size_t j = 0; j < p.size(); ++j) {
    v[j] = distance(p[j], prev) / traj.dt;
    prev = p[j];
  }
  return v;
}

inline OrientedBox ego_box(const Scene& scene, Vec2 center, double heading) {
  return {center, heading, scene.ego.footprint_half_extents};
}

// Front half of a footprint (the "ego front" used by the at-fault rule).
inline OrientedBox front_half(const OrientedBox& b) {
  return {b.center + (0.5 * b.half_extents.x) * b.axis_long(), b.heading,
          {0.5 * b.half_extents.x, b.half_extents.y}};
}

namespace detail {

struct WaypointFlags {
  bool at_fault_moving = false;  // front overlap with a moving agent
  bool at_fault_static = false;  // any overlap with a static obstacle
  bool off_area = false;
  bool ttc_breach = false;
};

inline WaypointFlags waypoint_flags(const ContinuousTrajectory& traj, const Scene& scene,
                                    const ScoringConfig& cfg, int j,
                                    const std::vector<double>& headings,
                                    const std::vector<double>& speeds) {
  WaypointFlags f;
  const double t_j = (j + 1) * traj.dt;
  const OrientedBox ego = ego_box(scene, traj.waypoints[j], headings[j]);
  const OrientedBox front = front_half(ego);

  for (const Agent& a : scene.agents) {
    const OrientedBox abox = agent_box_at(a, t_j, cfg.agent_future);
    if (a.kind == AgentKind::static_obstacle) {
      if (boxes_intersect(ego, abox)) f.at_fault_static = true;
    } else if (boxes_intersect(front, abox)) {
      f.at_fault_moving = true;
    }
  }

  f.off_area = !footprint_in_drivable(ego, scene);

  const int substeps = static_cast<int>(std::round(cfg.ttc_horizon / cfg.ttc_step));
  const Vec2 dir = unit_from_heading(headings[j]);
  for (int k = 1; k <= substeps && !f.ttc_breach; ++k) {
    const double u = k * cfg.ttc_step;
    const OrientedBox projected = ego_box(scene, traj.waypoints[j] + (speeds[j] * u) * dir,
                                          headings[j]);
    for (const Agent& a : scene.agents) {
      if (boxes_intersect(projected, agent_box_at(a, t_j + u, cfg.agent_future))) {
        f.ttc_breach = true;
        break;
      }
    }
  }
  return f;
}

inline double base_score(const WaypointFlags& f) {
  if (f.at_fault_moving || f.at_fault_static || f.off_area) return 0.0;
  if (f.ttc_breach) return 0.5;
  return 1.0;
}

inline void check_alignment(const ContinuousTrajectory& traj, const Scene& scene) {
  if (static_cast<int>(traj.waypoints.size()) != scene.horizon_N)
    throw std::invalid_argument("scoring: trajectory length != scene horizon");
  if (std::abs(traj.dt - scene.dt) > 1e-9)
    throw std::invalid_argument("scoring: trajectory dt != scene dt");
}

}  // namespace detail

inline double metric_nc(const ContinuousTrajectory& traj, const Scene& scene,
                        const ScoringConfig& cfg = {}) {
  detail::check_alignment(traj, scene);
  const auto headings = waypoint_headings(traj, scene.ego.heading);
  bool any_static = false;
  for (int j = 0; j < scene.horizon_N; ++j) {
    const double t_j = (j + 1) * traj.dt;
    const OrientedBox ego = ego_box(scene, traj.waypoints[j], headings[j]);
    const OrientedBox front = front_half(ego);
    for (const Agent& a : scene.agents) {
      const OrientedBox abox = agent_box_at(a, t_j, cfg.agent_future);
      if (a.kind == AgentKind::static_obstacle) {
        if (boxes_intersect(ego, abox)) any_static = true;
      } else if (boxes_intersect(front, abox)) {
        return 0.0;
      }
    }
  }
  return any_static ? 0.5 : 1.0;
}

inline double metric_dac(const ContinuousTrajectory& traj, const Scene& scene,
                         const ScoringConfig& cfg = {}) {
  (void)cfg;
  detail::check_alignment(traj, scene);
  const auto headings = waypoint_headings(traj, scene.ego.heading);
  for (int j = 0; j < scene.horizon_N; ++j)
    if (!footprint_in_drivable(ego_box(scene, traj.waypoints[j], headings[j]), scene))
      return 0.0;
  return 1.0;
}

inline double metric_ttc(const ContinuousTrajectory& traj, const Scene& scene,
                         const ScoringConfig& cfg = {}) {
  detail::check_alignment(traj, scene);
  const auto headings = waypoint_headings(traj, scene.ego.heading);
  const auto speeds = waypoint_speeds(traj);
  const int substeps = static_cast<int>(std::round(cfg.ttc_horizon / cfg.ttc_step));
  for (int j = 0; j < scene.horizon_N; ++j) {
    const double t_j = (j + 1) * traj.dt;
    const Vec2 dir = unit_from_heading(headings[j]);
    for (int k = 1; k <= substeps; ++k) {
      const double u = k * cfg.ttc_step;
      const OrientedBox projected =
          ego_box(scene, traj.waypoints[j] + (speeds[j] * u) * dir, headings[j]);
      for (const Agent& a : scene.agents)
        if (boxes_intersect(projected, agent_box_at(a, t_j + u, cfg.agent_future)))
          return 0.0;
    }
  }
  return 1.0;
}

inline double metric_comfort(const ContinuousTrajectory& traj, const Scene& scene,
                             const ScoringConfig& cfg = {}) {
  detail::check_alignment(traj, scene);
  const auto& p = traj.waypoints;
  const int n = static_cast<int>(p.size());
  if (n < 4) throw std::invalid_argument("metric_comfort: need at least 4 waypoints for jerk");
  const double dt = traj.dt;
  const auto headings = waypoint_headings(traj, scene.ego.heading);

  std::vector<Vec2> accel(n - 2);
  for (int j = 1; j + 1 < n; ++j) {
    accel[j - 1] = (1.0 / (dt * dt)) * (p[j + 1] - 2.0 * p[j] + p[j - 1]);
    const Vec2 dir = unit_from_heading(headings[j]);
    const Vec2 lat{-dir.y, dir.x};
    if (std::abs(dot(accel[j - 1], dir)) > cfg.a_lon_max) return 0.0;
    if (std::abs(dot(accel[j - 1], lat)) > cfg.a_lat_max) return 0.0;
  }
  for (size_t j = 0; j + 1 < accel.size(); ++j)
    if (norm((1.0 / dt) * (accel[j + 1] - accel[j])) > cfg.jerk_max) return 0.0;
  return 1.0;
}

inline double metric_ep(const ContinuousTrajectory& traj, const Scene& scene,
                        const ScoringConfig& cfg = {}) {
  detail::check_alignment(traj, scene);
  if (scene.route.points.size() < 2)
    throw std::invalid_argument("metric_ep: degenerate route");
  const double total_len = polyline_length(scene.route.points);
  const double start_arc = project_to_polyline(scene.route.points, {0.0, 0.0}).arc;
  const double end_arc = project_to_polyline(scene.route.points, traj.waypoints.back()).arc;
  const double progress = end_arc - start_arc;
  const double bound =
      std::min(total_len - start_arc, cfg.ep_speed_cap * scene.horizon_N * scene.dt);
  if (bound < 1e-9) return 0.0;
  return std::clamp(progress / bound, 0.0, 1.0);
}

inline ScoreBreakdown global_score(const ContinuousTrajectory& traj, const Scene& scene,
                                   const ScoringConfig& cfg = {}) {
  ScoreBreakdown b;
  b.m_nc = metric_nc(traj, scene, cfg);
  b.m_dac = metric_dac(traj, scene, cfg);
  b.m_ep = metric_ep(traj, scene, cfg);
  b.m_ttc = metric_ttc(traj, scene, cfg);
  b.m_comfort = metric_comfort(traj, scene, cfg);
  b.hard = b.m_nc * b.m_dac;
  b.quality = (5.0 * b.m_ep + 5.0 * b.m_ttc + 2.0 * b.m_comfort) / 12.0;
  b.total = b.hard * b.quality;
  return b;
}

inline WaypointSafetyReport safety_report(const ContinuousTrajectory& traj, const Scene& scene,
                                          int window_w, const ScoringConfig& cfg = {}) {
  if (window_w < 0) throw std::invalid_argument("safety_report: negative window");
  detail::check_alignment(traj, scene);
  const int n = scene.horizon_N;
  const auto headings = waypoint_headings(traj, scene.ego.heading);
  const auto speeds = waypoint_speeds(traj);

  std::vector<detail::WaypointFlags> flags(n);
  std::vector<double> base(n);
  for (int j = 0; j < n; ++j) {
    flags[j] = detail::waypoint_flags(traj, scene, cfg, j, headings, speeds);
    base[j] = detail::base_score(flags[j]);
  }

  WaypointSafetyReport rep;
  rep.per_waypoint_score.resize(n);
  for (int j = 0; j < n; ++j) {
    double w = 1.0;
    for (int k = std::max(0, j - window_w); k <= std::min(n - 1, j + window_w); ++k)
      w = std::min(w, base[k]);
    rep.per_waypoint_score[j] = w;
  }
  for (int j = 0; j < n; ++j) {
    if (rep.per_waypoint_score[j] < cfg.safety_threshold) {
      rep.first_violation_index = j;
      bool coll = false;
      bool dac = false;
      for (int k = std::max(0, j - window_w); k <= std::min(n - 1, j + window_w); ++k) {
        coll = coll || flags[k].at_fault_moving || flags[k].at_fault_static;
        dac = dac || flags[k].off_area;
      }
      rep.violation_kind = coll    ? ViolationKind::collision
                           : dac   ? ViolationKind::drivable_area
                                   : ViolationKind::ttc;
      break;
    }
  }
  return rep;
}

// Score a single token-pair substitution: windowed hard safety at the touched
// waypoint times a Gaussian coherence kernel on the deviation from the
// neighbor midpoint (linear extrapolation at the endpoints).
inline double local_score(TokenPair candidate, int at_index, const TokenTrajectory& base,
                          const Scene& scene, const Codebook& cb,
                          const ScoringConfig& cfg = {}) {
  const int n = base.horizon_N;
  if (at_index < 0 || at_index >= n) throw std::invalid_argument("local_score: index out of range");
  if (n < 3) throw std::invalid_argument("local_score: need at least 3 waypoints");

  TokenTrajectory mod = base;
  mod.tokens[2 * at_index] = candidate.x;
  mod.tokens[2 * at_index + 1] = candidate.y;
  const ContinuousTrajectory traj = cb.dequantize(mod);

  const auto headings = waypoint_headings(traj, scene.ego.heading);
  const auto speeds = waypoint_speeds(traj);
  double hard_local = 1.0;
  for (int k = std::max(0, at_index - cfg.window);
       k <= std::min(n - 1, at_index + cfg.window); ++k)
    hard_local = std::min(
        hard_local, detail::base_score(detail::waypoint_flags(traj, scene, cfg, k, headings, speeds)));

  const auto& p = traj.waypoints;
  Vec2 expected;
  if (at_index == 0)
    expected = 2.0 * p[1] - p[2];
  else if (at_index == n - 1)
    expected = 2.0 * p[n - 2] - p[n - 3];
  else
    expected = 0.5 * (p[at_index - 1] + p[at_index + 1]);
  const double d = distance(p[at_index], expected);
  return hard_local * std::exp(-(d * d) / (cfg.coherence_sigma * cfg.coherence_sigma));
}

}  // namespace replan
