#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "replan/codebook.hpp"
#include "replan/diffusion.hpp"
#include "replan/errors.hpp"
#include "replan/reflect.hpp"
#include "replan/scenario_gen.hpp"
#include "replan/scenario_io.hpp"
#include "replan/scoring.hpp"
#include "replan/train.hpp"

namespace replan {

struct DenoiserSelection {
  enum class Type { oracle, trained };
  Type type = Type::oracle;
  double sharpness = 2.0;  // oracle peakedness (temperature of the synthetic model)
  std::string checkpoint;  // trained parameters path
};

struct SuiteSpec {
  std::vector<ScenarioKind> kinds{kAllScenarioKinds.begin(), kAllScenarioKinds.end()};
  int count = 100;
  uint64_t seed = 7;
};

// Complete run description. Every key is optional on load (defaults below),
// unknown keys are rejected; window and safety_threshold ride in the reflect
// section but land in ScoringConfig, which owns the safety report.
struct RunConfig {
  uint64_t seed = 0;  // planning seed; the --seed flag overrides it
  double codebook_half_range = 100.0;
  double codebook_cell = 0.5;
  ScenarioParams horizon;
  GenerateOptions diffusion;
  ReflectConfig reflect;
  ScoringConfig scoring;
  SuiteSpec suite;
  DenoiserSelection denoiser;
  TrainConfig training;
};

namespace detail {

inline void check_allowed(const nlohmann::json& j, std::initializer_list<const char*> keys,
                          const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw ValidationError(std::string(where) + ": unknown key '" + item.key() + "'");
}

template <typename T>
void opt_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void require_range(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("config: ") + what);
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::check_allowed;
  using detail::opt_get;
  using detail::require_range;
  RunConfig c;
  try {
    check_allowed(j,
                  {"seed", "codebook", "horizon", "diffusion", "reflect", "scoring", "suite",
                   "denoiser", "agents", "training"},
                  "config");
    opt_get(j, "seed", c.seed);

    if (j.contains("codebook")) {
      const auto& s = j["codebook"];
      check_allowed(s, {"half_range", "cell"}, "codebook");
      opt_get(s, "half_range", c.codebook_half_range);
      opt_get(s, "cell", c.codebook_cell);
    }
    if (j.contains("horizon")) {
      const auto& s = j["horizon"];
      check_allowed(s, {"n", "dt"}, "horizon");
      opt_get(s, "n", c.horizon.horizon_N);
      opt_get(s, "dt", c.horizon.dt);
    }
    if (j.contains("diffusion")) {
      const auto& s = j["diffusion"];
      check_allowed(s, {"steps", "schedule", "mode", "temperature", "cfg_scale"}, "diffusion");
      opt_get(s, "steps", c.diffusion.steps);
      opt_get(s, "temperature", c.diffusion.temperature);
      opt_get(s, "cfg_scale", c.diffusion.cfg_scale);
      if (s.contains("schedule")) {
        const std::string v = s["schedule"].get<std::string>();
        if (v == "cosine") c.diffusion.schedule = MaskSchedule::Kind::cosine;
        else if (v == "linear") c.diffusion.schedule = MaskSchedule::Kind::linear;
        else throw ValidationError("config: unknown schedule '" + v + "'");
      }
      if (s.contains("mode")) {
        const std::string v = s["mode"].get<std::string>();
        if (v == "greedy") c.diffusion.mode = DecodeMode::greedy;
        else if (v == "sample") c.diffusion.mode = DecodeMode::sample;
        else throw ValidationError("config: unknown decode mode '" + v + "'");
      }
    }
    if (j.contains("reflect")) {
      const auto& s = j["reflect"];
      check_allowed(s,
                    {"k", "k_prime", "d_nms", "delta", "max_iterations", "window",
                     "safety_threshold", "goal_stage", "safety_stage"},
                    "reflect");
      opt_get(s, "k", c.reflect.k);
      opt_get(s, "k_prime", c.reflect.k_prime);
      opt_get(s, "d_nms", c.reflect.d_nms);
      opt_get(s, "delta", c.reflect.delta);
      opt_get(s, "max_iterations", c.reflect.max_iterations);
      opt_get(s, "window", c.scoring.window);
      opt_get(s, "safety_threshold", c.scoring.safety_threshold);
      opt_get(s, "goal_stage", c.reflect.goal_stage);
      opt_get(s, "safety_stage", c.reflect.safety_stage);
    }
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      check_allowed(s,
                    {"a_lon_max", "a_lat_max", "jerk_max", "ttc_horizon", "ttc_step",
                     "ep_speed_cap", "coherence_sigma"},
                    "scoring");
      opt_get(s, "a_lon_max", c.scoring.a_lon_max);
      opt_get(s, "a_lat_max", c.scoring.a_lat_max);
      opt_get(s, "jerk_max", c.scoring.jerk_max);
      opt_get(s, "ttc_horizon", c.scoring.ttc_horizon);
      opt_get(s, "ttc_step", c.scoring.ttc_step);
      opt_get(s, "ep_speed_cap", c.scoring.ep_speed_cap);
      opt_get(s, "coherence_sigma", c.scoring.coherence_sigma);
    }
    if (j.contains("suite")) {
      const auto& s = j["suite"];
      check_allowed(s, {"kinds", "count", "seed"}, "suite");
      if (s.contains("kinds")) {
        c.suite.kinds.clear();
        for (const auto& k : s["kinds"])
          c.suite.kinds.push_back(scenario_kind_from_string(k.get<std::string>()));
      }
      opt_get(s, "count", c.suite.count);
      opt_get(s, "seed", c.suite.seed);
    }
    if (j.contains("denoiser")) {
      const auto& s = j["denoiser"];
      check_allowed(s, {"type", "sharpness", "checkpoint"}, "denoiser");
      if (s.contains("type")) {
        const std::string v = s["type"].get<std::string>();
        if (v == "oracle") c.denoiser.type = DenoiserSelection::Type::oracle;
        else if (v == "trained") c.denoiser.type = DenoiserSelection::Type::trained;
        else throw ValidationError("config: unknown denoiser type '" + v + "'");
      }
      opt_get(s, "sharpness", c.denoiser.sharpness);
      opt_get(s, "checkpoint", c.denoiser.checkpoint);
    }
    if (j.contains("agents")) {
      const std::string v = j["agents"].get<std::string>();
      if (v == "cv") c.scoring.agent_future = AgentFutureMode::constant_velocity;
      else if (v == "gt") c.scoring.agent_future = AgentFutureMode::scripted_ground_truth;
      else throw ValidationError("config: unknown agents mode '" + v + "'");
    }
    if (j.contains("training")) {
      const auto& s = j["training"];
      check_allowed(s,
                    {"epochs", "lr", "batch_size", "seed", "cfg_dropout", "goal_dropout",
                     "samples_per_scene"},
                    "training");
      opt_get(s, "epochs", c.training.epochs);
      opt_get(s, "lr", c.training.lr);
      opt_get(s, "batch_size", c.training.batch_size);
      opt_get(s, "seed", c.training.seed);
      opt_get(s, "cfg_dropout", c.training.cfg_dropout);
      opt_get(s, "goal_dropout", c.training.goal_dropout);
      opt_get(s, "samples_per_scene", c.training.samples_per_scene);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: malformed json: ") + e.what());
  }

  require_range(c.codebook_half_range > 0.0, "codebook.half_range must be positive");
  require_range(c.codebook_cell > 0.0, "codebook.cell must be positive");
  require_range(c.horizon.horizon_N >= 4, "horizon.n must be >= 4");
  require_range(c.horizon.dt > 0.0, "horizon.dt must be positive");
  require_range(c.diffusion.steps >= 1, "diffusion.steps must be >= 1");
  require_range(c.diffusion.temperature > 0.0, "diffusion.temperature must be positive");
  require_range(std::isfinite(c.diffusion.cfg_scale), "diffusion.cfg_scale must be finite");
  require_range(c.reflect.k >= 1, "reflect.k must be >= 1");
  require_range(c.reflect.k_prime >= 1, "reflect.k_prime must be >= 1");
  require_range(c.reflect.d_nms >= 0.0, "reflect.d_nms must be non-negative");
  require_range(c.reflect.delta >= 1, "reflect.delta must be >= 1");
  require_range(c.reflect.max_iterations >= 0, "reflect.max_iterations must be >= 0");
  require_range(c.scoring.window >= 0, "reflect.window must be >= 0");
  require_range(c.scoring.safety_threshold > 0.0, "reflect.safety_threshold must be positive");
  require_range(c.scoring.a_lon_max > 0.0 && c.scoring.a_lat_max > 0.0 && c.scoring.jerk_max > 0.0,
                "scoring comfort limits must be positive");
  require_range(c.scoring.ttc_horizon >= 0.0, "scoring.ttc_horizon must be non-negative");
  require_range(c.scoring.ttc_step > 0.0, "scoring.ttc_step must be positive");
  require_range(c.scoring.ep_speed_cap > 0.0, "scoring.ep_speed_cap must be positive");
  require_range(c.scoring.coherence_sigma > 0.0, "scoring.coherence_sigma must be positive");
  require_range(!c.suite.kinds.empty(), "suite.kinds must be non-empty");
  require_range(c.suite.count >= 1, "suite.count must be >= 1");
  require_range(c.training.epochs >= 1, "training.epochs must be >= 1");
  require_range(c.training.lr > 0.0, "training.lr must be positive");
  require_range(c.training.batch_size >= 1, "training.batch_size must be >= 1");
  require_range(c.training.cfg_dropout >= 0.0 && c.training.cfg_dropout <= 1.0,
                "training.cfg_dropout must be in [0, 1]");
  require_range(c.training.goal_dropout >= 0.0 && c.training.goal_dropout <= 1.0,
                "training.goal_dropout must be in [0, 1]");
  require_range(c.training.samples_per_scene >= 1, "training.samples_per_scene must be >= 1");
  require_range(c.denoiser.sharpness > 0.0, "denoiser.sharpness must be positive");
  require_range(c.denoiser.type != DenoiserSelection::Type::trained ||
                    !c.denoiser.checkpoint.empty(),
                "denoiser.checkpoint required for the trained denoiser");
  return c;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["codebook"] = {{"half_range", c.codebook_half_range}, {"cell", c.codebook_cell}};
  j["horizon"] = {{"n", c.horizon.horizon_N}, {"dt", c.horizon.dt}};
  j["diffusion"] = {
      {"steps", c.diffusion.steps},
      {"schedule", c.diffusion.schedule == MaskSchedule::Kind::cosine ? "cosine" : "linear"},
      {"mode", c.diffusion.mode == DecodeMode::greedy ? "greedy" : "sample"},
      {"temperature", c.diffusion.temperature},
      {"cfg_scale", c.diffusion.cfg_scale}};
  j["reflect"] = {{"k", c.reflect.k},
                  {"k_prime", c.reflect.k_prime},
                  {"d_nms", c.reflect.d_nms},
                  {"delta", c.reflect.delta},
                  {"max_iterations", c.reflect.max_iterations},
                  {"window", c.scoring.window},
                  {"safety_threshold", c.scoring.safety_threshold},
                  {"goal_stage", c.reflect.goal_stage},
                  {"safety_stage", c.reflect.safety_stage}};
  j["scoring"] = {{"a_lon_max", c.scoring.a_lon_max},
                  {"a_lat_max", c.scoring.a_lat_max},
                  {"jerk_max", c.scoring.jerk_max},
                  {"ttc_horizon", c.scoring.ttc_horizon},
                  {"ttc_step", c.scoring.ttc_step},
                  {"ep_speed_cap", c.scoring.ep_speed_cap},
                  {"coherence_sigma", c.scoring.coherence_sigma}};
  nlohmann::json kinds = nlohmann::json::array();
  for (ScenarioKind k : c.suite.kinds) kinds.push_back(to_string(k));
  j["suite"] = {{"kinds", std::move(kinds)}, {"count", c.suite.count}, {"seed", c.suite.seed}};
  j["denoiser"] = {
      {"type", c.denoiser.type == DenoiserSelection::Type::oracle ? "oracle" : "trained"},
      {"sharpness", c.denoiser.sharpness},
      {"checkpoint", c.denoiser.checkpoint}};
  j["agents"] =
      c.scoring.agent_future == AgentFutureMode::constant_velocity ? "cv" : "gt";
  j["training"] = {{"epochs", c.training.epochs},
                   {"lr", c.training.lr},
                   {"batch_size", c.training.batch_size},
                   {"seed", c.training.seed},
                   {"cfg_dropout", c.training.cfg_dropout},
                   {"goal_dropout", c.training.goal_dropout},
                   {"samples_per_scene", c.training.samples_per_scene}};
  return j;
}

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline Codebook make_codebook(const RunConfig& c) {
  return Codebook(c.codebook_half_range, c.codebook_cell);
}

}  // namespace replan
