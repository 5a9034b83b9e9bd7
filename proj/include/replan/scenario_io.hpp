#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "replan/errors.hpp"
#include "replan/rng.hpp"
#include "replan/scenario_gen.hpp"
#include "replan/scene.hpp"

namespace replan {

inline constexpr int kSceneSchemaVersion = 1;

namespace detail {

using nlohmann::json;

// Scene files are machine-written, so every key is mandatory and unknown keys
// are rejected outright: a typo should fail loudly, not default silently.
inline void check_keys(const json& j, std::initializer_list<const char*> keys,
                       const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  std::set<std::string> expect(keys.begin(), keys.end());
  for (const auto& item : j.items())
    if (!expect.count(item.key()))
      throw ValidationError(std::string(where) + ": unknown key '" + item.key() + "'");
  for (const std::string& k : expect)
    if (!j.contains(k)) throw ValidationError(std::string(where) + ": missing key '" + k + "'");
}

inline json vec_to_json(Vec2 v) { return json::array({v.x, v.y}); }

inline Vec2 vec_from_json(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(std::string(where) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline const char* agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::vehicle: return "vehicle";
    case AgentKind::pedestrian: return "pedestrian";
    case AgentKind::static_obstacle: return "static_obstacle";
  }
  throw std::logic_error("unreachable agent kind");
}

inline AgentKind agent_kind_parse(const std::string& s) {
  if (s == "vehicle") return AgentKind::vehicle;
  if (s == "pedestrian") return AgentKind::pedestrian;
  if (s == "static_obstacle") return AgentKind::static_obstacle;
  throw ValidationError("agent: unknown kind '" + s + "'");
}

inline const char* turn_name(TurnLabel t) {
  switch (t) {
    case TurnLabel::straight: return "straight";
    case TurnLabel::left: return "left";
    case TurnLabel::right: return "right";
  }
  throw std::logic_error("unreachable turn label");
}

inline TurnLabel turn_parse(const std::string& s) {
  if (s == "straight") return TurnLabel::straight;
  if (s == "left") return TurnLabel::left;
  if (s == "right") return TurnLabel::right;
  throw ValidationError("route: unknown turn '" + s + "'");
}

}  // namespace detail

inline nlohmann::json scene_to_json(const Scene& s) {
  using detail::vec_to_json;
  nlohmann::json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["scene_id"] = s.scene_id;
  j["kind"] = s.kind;
  j["seed"] = s.seed;
  j["horizon_N"] = s.horizon_N;
  j["dt"] = s.dt;
  j["ego"] = {{"speed", s.ego.speed},
              {"heading", s.ego.heading},
              {"footprint_half_extents", vec_to_json(s.ego.footprint_half_extents)}};

  nlohmann::json area = nlohmann::json::array();
  for (const ConvexPolygon& poly : s.drivable_area) {
    nlohmann::json ring = nlohmann::json::array();
    for (const Vec2& v : poly.vertices()) ring.push_back(vec_to_json(v));
    area.push_back(std::move(ring));
  }
  j["drivable_area"] = std::move(area);

  nlohmann::json pts = nlohmann::json::array();
  for (const Vec2& p : s.route.points) pts.push_back(vec_to_json(p));
  j["route"] = {{"points", std::move(pts)}, {"turn", detail::turn_name(s.route.turn)}};

  nlohmann::json agents = nlohmann::json::array();
  for (const Agent& a : s.agents) {
    nlohmann::json script = nlohmann::json::array();
    for (const ScriptedPose& p : a.scripted_future)
      script.push_back(
          {{"t", p.t}, {"center", vec_to_json(p.center)}, {"heading", p.heading}});
    agents.push_back({{"center", vec_to_json(a.center)},
                      {"heading", a.heading},
                      {"half_extents", vec_to_json(a.half_extents)},
                      {"velocity", vec_to_json(a.velocity)},
                      {"kind", detail::agent_kind_name(a.kind)},
                      {"scripted_future", std::move(script)}});
  }
  j["agents"] = std::move(agents);

  // Hidden feasible solution; consumed only by the oracle denoiser and the
  // training-set builder, never by the planner under evaluation.
  nlohmann::json ref = nlohmann::json::array();
  for (const Vec2& p : s.reference_trajectory.waypoints) ref.push_back(vec_to_json(p));
  j["reference_trajectory"] = std::move(ref);
  return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::vec_from_json;
  try {
    check_keys(j,
               {"schema_version", "scene_id", "kind", "seed", "horizon_N", "dt", "ego",
                "drivable_area", "route", "agents", "reference_trajectory"},
               "scene");
    if (j["schema_version"].get<int>() != kSceneSchemaVersion)
      throw ValidationError("scene: unsupported schema version");

    Scene s;
    s.scene_id = j["scene_id"].get<std::string>();
    s.kind = j["kind"].get<std::string>();
    s.seed = j["seed"].get<uint64_t>();
    s.horizon_N = j["horizon_N"].get<int>();
    s.dt = j["dt"].get<double>();

    check_keys(j["ego"], {"speed", "heading", "footprint_half_extents"}, "ego");
    s.ego.speed = j["ego"]["speed"].get<double>();
    s.ego.heading = j["ego"]["heading"].get<double>();
    s.ego.footprint_half_extents = vec_from_json(j["ego"]["footprint_half_extents"], "ego");

    for (const auto& ring : j["drivable_area"]) {
      std::vector<Vec2> pts;
      for (const auto& v : ring) pts.push_back(vec_from_json(v, "drivable_area"));
      s.drivable_area.push_back(ConvexPolygon::make(std::move(pts)));
    }

    check_keys(j["route"], {"points", "turn"}, "route");
    for (const auto& v : j["route"]["points"])
      s.route.points.push_back(vec_from_json(v, "route"));
    s.route.turn = detail::turn_parse(j["route"]["turn"].get<std::string>());

    for (const auto& a : j["agents"]) {
      check_keys(a, {"center", "heading", "half_extents", "velocity", "kind", "scripted_future"},
                 "agent");
      Agent agent;
      agent.center = vec_from_json(a["center"], "agent");
      agent.heading = a["heading"].get<double>();
      agent.half_extents = vec_from_json(a["half_extents"], "agent");
      agent.velocity = vec_from_json(a["velocity"], "agent");
      agent.kind = detail::agent_kind_parse(a["kind"].get<std::string>());
      for (const auto& p : a["scripted_future"]) {
        check_keys(p, {"t", "center", "heading"}, "scripted pose");
        agent.scripted_future.push_back(
            {p["t"].get<double>(), vec_from_json(p["center"], "scripted pose"),
             p["heading"].get<double>()});
      }
      s.agents.push_back(std::move(agent));
    }

    for (const auto& v : j["reference_trajectory"])
      s.reference_trajectory.waypoints.push_back(vec_from_json(v, "reference"));
    s.reference_trajectory.dt = s.dt;

    validate_scene(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene: malformed json: ") + e.what());
  } catch (const std::invalid_argument& e) {  // polygon construction
    throw ValidationError(std::string("scene: ") + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void save_scene(const Scene& s, const std::string& path) {
  write_text_file(path, scene_to_json(s).dump(2) + "\n");
}

inline Scene load_scene(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return scene_from_json(j);
}

struct SuiteManifest {
  int schema_version = kSceneSchemaVersion;
  uint64_t seed = 0;
  std::vector<std::string> kinds;
  int count = 0;
  std::vector<std::string> scene_ids;
};

// Stratified deterministic suite: `count` scenes split across the kinds as
// evenly as possible (earlier kinds take the remainder), one derived seed per
// slot so the suite is reproducible and order-independent of generation.
inline std::vector<Scene> generate_suite(const std::vector<ScenarioKind>& kinds, int count,
                                         uint64_t seed, const ScenarioParams& params = {}) {
  if (kinds.empty()) throw std::invalid_argument("generate_suite: no kinds");
  if (count < 1) throw std::invalid_argument("generate_suite: count must be >= 1");
  std::vector<Scene> out;
  out.reserve(count);
  const int base = count / static_cast<int>(kinds.size());
  const int rem = count % static_cast<int>(kinds.size());
  int index = 0;
  for (size_t ki = 0; ki < kinds.size(); ++ki) {
    const int n = base + (static_cast<int>(ki) < rem ? 1 : 0);
    for (int i = 0; i < n; ++i, ++index) {
      Scene s = generate_scenario(kinds[ki], derive_seed(seed, static_cast<uint64_t>(index)),
                                  params);
      char buf[32];
      std::snprintf(buf, sizeof(buf), "-%06d", index);
      s.scene_id = std::string(to_string(kinds[ki])) + buf;
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline SuiteManifest save_suite(const std::vector<Scene>& scenes, const std::string& dir,
                                uint64_t seed) {
  SuiteManifest m;
  m.seed = seed;
  m.count = static_cast<int>(scenes.size());
  std::set<std::string> kinds_seen;
  for (const Scene& s : scenes) {
    save_scene(s, dir + "/" + s.scene_id + ".json");
    m.scene_ids.push_back(s.scene_id);
    kinds_seen.insert(s.kind);
  }
  m.kinds.assign(kinds_seen.begin(), kinds_seen.end());

  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["seed"] = m.seed;
  j["kinds"] = m.kinds;
  j["count"] = m.count;
  j["scene_ids"] = m.scene_ids;
  write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
  return m;
}

inline SuiteManifest load_manifest(const std::string& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    detail::check_keys(j, {"schema_version", "seed", "kinds", "count", "scene_ids"}, "manifest");
    SuiteManifest m;
    m.schema_version = j["schema_version"].get<int>();
    m.seed = j["seed"].get<uint64_t>();
    m.kinds = j["kinds"].get<std::vector<std::string>>();
    m.count = j["count"].get<int>();
    m.scene_ids = j["scene_ids"].get<std::vector<std::string>>();
    if (m.schema_version != kSceneSchemaVersion)
      throw ValidationError("manifest: unsupported schema version");
    if (m.count != static_cast<int>(m.scene_ids.size()))
      throw ValidationError("manifest: count does not match scene_ids");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: malformed json: ") + e.what());
  }
}

inline std::vector<Scene> load_suite(const std::string& dir) {
  const SuiteManifest m = load_manifest(dir);
  std::vector<Scene> out;
  out.reserve(m.scene_ids.size());
  for (const std::string& id : m.scene_ids) out.push_back(load_scene(dir + "/" + id + ".json"));
  return out;
}

}  // namespace replan
