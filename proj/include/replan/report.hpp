#pragma once

#include <cstdint>
#include <ctime>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "replan/codebook.hpp"
#include "replan/reflect.hpp"
#include "replan/scenario_io.hpp"
#include "replan/scoring.hpp"

namespace replan {

inline constexpr int kReportSchemaVersion = 1;

inline const char* violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::collision: return "collision";
    case ViolationKind::drivable_area: return "drivable_area";
    case ViolationKind::ttc: return "ttc";
  }
  return "unknown";
}

inline const char* terminal_status_name(TerminalStatus s) {
  return s == TerminalStatus::safe ? "safe" : "budget_exhausted";
}

// Condensed view of one regeneration step for the report.
struct IterationSummary {
  std::optional<int> violation_index;
  std::optional<ViolationKind> violation_kind;
  std::optional<TokenPair> chosen_anchor;
  int search_candidates = 0;
  ScoreBreakdown score;
};

struct SceneResult {
  std::string scene_id;
  bool failed = false;
  std::string error;
  ContinuousTrajectory trajectory;
  ScoreBreakdown score;
  ScoreBreakdown initial_score;  // before any repair
  bool initial_safe = true;      // windowed safety report clean pre-repair
  int iterations = 0;            // repair cycles executed
  TerminalStatus terminal_status = TerminalStatus::safe;
  std::vector<IterationSummary> iteration_detail;
  std::vector<Vec2> goals;
  int selected_goal = 0;
  double wall_seconds = 0.0;       // volatile; stripped for comparisons
  double wall_goal_seconds = 0.0;  // stage split of the same measurement
  double wall_safety_seconds = 0.0;
};

struct Aggregate {
  int scenes = 0;
  int failures = 0;
  double mean_nc = 0.0;
  double mean_dac = 0.0;
  double mean_ttc = 0.0;
  double mean_comfort = 0.0;
  double mean_ep = 0.0;
  double mean_total = 0.0;
  std::vector<int> iteration_histogram;  // index = repair cycles used
};

struct RunReport {
  nlohmann::json config_echo;
  std::vector<SceneResult> scenes;
  Aggregate aggregate;
};

inline Aggregate compute_aggregate(const std::vector<SceneResult>& scenes) {
  Aggregate a;
  a.scenes = static_cast<int>(scenes.size());
  int used = 0;
  for (const SceneResult& r : scenes) {
    if (r.failed) {
      ++a.failures;
      continue;
    }
    ++used;
    a.mean_nc += r.score.m_nc;
    a.mean_dac += r.score.m_dac;
    a.mean_ttc += r.score.m_ttc;
    a.mean_comfort += r.score.m_comfort;
    a.mean_ep += r.score.m_ep;
    a.mean_total += r.score.total;
    if (static_cast<int>(a.iteration_histogram.size()) <= r.iterations)
      a.iteration_histogram.resize(r.iterations + 1, 0);
    ++a.iteration_histogram[r.iterations];
  }
  if (used > 0) {
    a.mean_nc /= used;
    a.mean_dac /= used;
    a.mean_ttc /= used;
    a.mean_comfort /= used;
    a.mean_ep /= used;
    a.mean_total /= used;
  }
  return a;
}

inline nlohmann::json score_to_json(const ScoreBreakdown& s) {
  return {{"nc", s.m_nc},      {"dac", s.m_dac},     {"ttc", s.m_ttc},
          {"comfort", s.m_comfort}, {"ep", s.m_ep},  {"hard", s.hard},
          {"quality", s.quality},   {"total", s.total}};
}

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["generated_at"] = utc_timestamp();
  j["config"] = r.config_echo;

  nlohmann::json scenes = nlohmann::json::array();
  for (const SceneResult& s : r.scenes) {
    nlohmann::json e;
    e["scene_id"] = s.scene_id;
    if (s.failed) {
      e["failed"] = true;
      e["error"] = s.error;
      scenes.push_back(std::move(e));
      continue;
    }
    e["failed"] = false;
    nlohmann::json wps = nlohmann::json::array();
    for (const Vec2& p : s.trajectory.waypoints) wps.push_back({p.x, p.y});
    e["trajectory"] = std::move(wps);
    e["score"] = score_to_json(s.score);
    e["initial_score"] = score_to_json(s.initial_score);
    e["initial_safe"] = s.initial_safe;
    e["iterations"] = s.iterations;
    e["terminal_status"] = terminal_status_name(s.terminal_status);
    nlohmann::json iters = nlohmann::json::array();
    for (const IterationSummary& it : s.iteration_detail) {
      nlohmann::json ij;
      ij["violation_index"] =
          it.violation_index ? nlohmann::json(*it.violation_index) : nlohmann::json(nullptr);
      ij["violation_kind"] = it.violation_kind
                                 ? nlohmann::json(violation_kind_name(*it.violation_kind))
                                 : nlohmann::json(nullptr);
      ij["anchor"] = it.chosen_anchor
                         ? nlohmann::json::array({it.chosen_anchor->x, it.chosen_anchor->y})
                         : nlohmann::json(nullptr);
      ij["search_candidates"] = it.search_candidates;
      ij["total"] = it.score.total;
      iters.push_back(std::move(ij));
    }
    e["iteration_detail"] = std::move(iters);
    nlohmann::json goals = nlohmann::json::array();
    for (const Vec2& g : s.goals) goals.push_back({g.x, g.y});
    e["goals"] = std::move(goals);
    e["selected_goal"] = s.selected_goal;
    e["wall_seconds"] = s.wall_seconds;
    e["wall_goal_seconds"] = s.wall_goal_seconds;
    e["wall_safety_seconds"] = s.wall_safety_seconds;
    scenes.push_back(std::move(e));
  }
  j["scenes"] = std::move(scenes);

  const Aggregate& a = r.aggregate;
  j["aggregate"] = {{"scenes", a.scenes},
                    {"failures", a.failures},
                    {"mean_nc", a.mean_nc},
                    {"mean_dac", a.mean_dac},
                    {"mean_ttc", a.mean_ttc},
                    {"mean_comfort", a.mean_comfort},
                    {"mean_ep", a.mean_ep},
                    {"mean_total", a.mean_total},
                    {"iteration_histogram", a.iteration_histogram}};
  return j;
}

// Removes wall-clock fields so two reports from identical runs compare equal.
inline nlohmann::json strip_volatile(nlohmann::json j) {
  j.erase("generated_at");
  if (j.contains("scenes"))
    for (auto& s : j["scenes"]) {
      s.erase("wall_seconds");
      s.erase("wall_goal_seconds");
      s.erase("wall_safety_seconds");
    }
  return j;
}

}  // namespace replan
