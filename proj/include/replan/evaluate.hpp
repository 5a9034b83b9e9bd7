#pragma once

#include <chrono>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "replan/config.hpp"
#include "replan/denoiser.hpp"
#include "replan/reflect.hpp"
#include "replan/report.hpp"
#include "replan/rng.hpp"
#include "replan/scenario_io.hpp"
#include "replan/svg.hpp"

namespace replan {

inline std::unique_ptr<DenoiserFactory> make_denoiser_factory(const RunConfig& cfg) {
  if (cfg.denoiser.type == DenoiserSelection::Type::oracle)
    return std::make_unique<OracleDenoiserFactory>(make_codebook(cfg), cfg.denoiser.sharpness);
  return std::make_unique<TrainedDenoiserFactory>(
      TrainedDenoiserFactory::from_checkpoint(cfg.denoiser.checkpoint));
}

struct EvaluateOptions {
  bool write_svg = false;
  std::string svg_dir;
};

inline SceneResult evaluate_scene(const Scene& scene, const Codebook& cb,
                                  const DenoiserFactory& factory, const RunConfig& cfg,
                                  uint64_t scene_seed, const EvaluateOptions& opts = {}) {
  SceneResult r;
  r.scene_id = scene.scene_id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    GenerateOptions gen = cfg.diffusion;
    gen.seed = scene_seed;
    const std::unique_ptr<Denoiser> den = factory.make(scene);
    PlanTiming timing;
    const PlanResult p = plan(*den, scene, cb, gen, cfg.reflect, cfg.scoring, &timing);

    r.trajectory = p.trajectory;
    r.score = p.score;
    r.initial_score = p.trace.iterations.front().score;
    r.initial_safe = !p.trace.iterations.front().violation_index.has_value();
    r.iterations = p.trace.total_iterations;
    r.terminal_status = p.trace.terminal_status;
    for (const ReflectionIteration& it : p.trace.iterations)
      r.iteration_detail.push_back({it.violation_index, it.violation_kind, it.chosen_anchor,
                                    it.search_candidates, it.score});
    for (const GoalCandidate& g : p.goals.goals) r.goals.push_back(g.position);
    r.selected_goal = static_cast<int>(p.selected_index);
    r.wall_goal_seconds = timing.goal_seconds;
    r.wall_safety_seconds = timing.safety_seconds;

    if (opts.write_svg)
      write_text_file(opts.svg_dir + "/" + scene.scene_id + ".svg",
                      scene_svg(scene, p.trace, p.goals, r.selected_goal));
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Plans every scene with a per-scene derived seed; failures are recorded in
// the report and do not stop the run.
inline RunReport run_evaluate(const std::vector<Scene>& scenes, const RunConfig& cfg,
                              const EvaluateOptions& opts = {}) {
  const Codebook cb = make_codebook(cfg);
  const std::unique_ptr<DenoiserFactory> factory = make_denoiser_factory(cfg);
  RunReport report;
  report.config_echo = run_config_to_json(cfg);
  report.scenes.reserve(scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i)
    report.scenes.push_back(evaluate_scene(scenes[i], cb, *factory, cfg,
                                           derive_seed(cfg.seed, static_cast<uint64_t>(i)),
                                           opts));
  report.aggregate = compute_aggregate(report.scenes);
  return report;
}

struct AblationRow {
  std::string label;
  bool goal_stage = false;
  bool safety_stage = false;
  Aggregate aggregate;
};

struct AblationResult {
  std::vector<AblationRow> rows;     // W/o Both, W/ Goal-Cond., W/ Safety-Guided, Full Model
  std::vector<RunReport> reports;    // same order
};

// Four paired-seed evaluations over the identical suite, one per stage-toggle
// combination.
inline AblationResult run_ablate(const std::vector<Scene>& scenes, const RunConfig& cfg,
                                 const EvaluateOptions& opts = {}) {
  struct RowSpec {
    const char* label;
    bool goal;
    bool safety;
  };
  static constexpr RowSpec kRows[] = {{"W/o Both", false, false},
                                      {"W/ Goal-Cond.", true, false},
                                      {"W/ Safety-Guided", false, true},
                                      {"Full Model", true, true}};
  AblationResult out;
  for (const RowSpec& row : kRows) {
    RunConfig rc = cfg;
    rc.reflect.goal_stage = row.goal;
    rc.reflect.safety_stage = row.safety;
    RunReport rep = run_evaluate(scenes, rc, opts);
    out.rows.push_back({row.label, row.goal, row.safety, rep.aggregate});
    out.reports.push_back(std::move(rep));
  }
  return out;
}

inline nlohmann::json ablation_to_json(const AblationResult& a) {
  nlohmann::json rows = nlohmann::json::array();
  for (const AblationRow& r : a.rows) {
    rows.push_back({{"label", r.label},
                    {"goal_stage", r.goal_stage},
                    {"safety_stage", r.safety_stage},
                    {"mean_nc", r.aggregate.mean_nc},
                    {"mean_dac", r.aggregate.mean_dac},
                    {"mean_ttc", r.aggregate.mean_ttc},
                    {"mean_comfort", r.aggregate.mean_comfort},
                    {"mean_ep", r.aggregate.mean_ep},
                    {"mean_total", r.aggregate.mean_total}});
  }
  return {{"schema_version", kReportSchemaVersion}, {"rows", std::move(rows)}};
}

inline std::string ablation_table(const AblationResult& a) {
  std::string out =
      "configuration      NC      DAC     TTC     Comf.   EP      total\n";
  char buf[160];
  for (const AblationRow& r : a.rows) {
    std::snprintf(buf, sizeof(buf), "%-18s %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f %-7.3f\n",
                  r.label.c_str(), r.aggregate.mean_nc, r.aggregate.mean_dac,
                  r.aggregate.mean_ttc, r.aggregate.mean_comfort, r.aggregate.mean_ep,
                  r.aggregate.mean_total);
    out += buf;
  }
  return out;
}

}  // namespace replan
