#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "replan/config.hpp"
#include "replan/denoiser.hpp"
#include "replan/errors.hpp"
#include "replan/evaluate.hpp"
#include "replan/report.hpp"
#include "replan/scenario_io.hpp"
#include "replan/svg.hpp"
#include "replan/train.hpp"

namespace fs = std::filesystem;
using namespace replan;

namespace {

// Flags shared by every subcommand; each maps onto the loaded RunConfig.
struct Common {
  std::string config;
  uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string denoiser;
  std::string agents;
  std::string toggle_goal;
  std::string toggle_safety;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run configuration JSON");
  c.seed_opt = cmd->add_option("--seed", c.seed, "override the configured seed");
  cmd->add_option("--denoiser", c.denoiser, "denoiser backend")
      ->check(CLI::IsMember({"oracle", "trained"}));
  cmd->add_option("--agents", c.agents, "agent future model: cv or gt")
      ->check(CLI::IsMember({"cv", "gt"}));
  cmd->add_option("--toggle-goal", c.toggle_goal, "goal-conditioning stage")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--toggle-safety", c.toggle_safety, "safety-regeneration stage")
      ->check(CLI::IsMember({"on", "off"}));
}

RunConfig materialize(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed_opt && c.seed_opt->count() > 0) cfg.seed = c.seed;
  if (c.denoiser == "oracle") cfg.denoiser.type = DenoiserSelection::Type::oracle;
  if (c.denoiser == "trained") cfg.denoiser.type = DenoiserSelection::Type::trained;
  if (c.agents == "cv") cfg.scoring.agent_future = AgentFutureMode::constant_velocity;
  if (c.agents == "gt") cfg.scoring.agent_future = AgentFutureMode::scripted_ground_truth;
  if (!c.toggle_goal.empty()) cfg.reflect.goal_stage = c.toggle_goal == "on";
  if (!c.toggle_safety.empty()) cfg.reflect.safety_stage = c.toggle_safety == "on";
  return cfg;
}

bool seed_given(const Common& c) { return c.seed_opt && c.seed_opt->count() > 0; }

void print_breakdown(const char* tag, const ScoreBreakdown& s) {
  std::printf("%s total %.4f  nc %.2f dac %.2f ttc %.2f comfort %.2f ep %.4f\n", tag, s.total,
              s.m_nc, s.m_dac, s.m_ttc, s.m_comfort, s.m_ep);
}

int cmd_gen(const Common& common, const std::string& out_dir,
            const std::vector<std::string>& kind_names, int count) {
  RunConfig cfg = materialize(common);
  std::vector<ScenarioKind> kinds = cfg.suite.kinds;
  if (!kind_names.empty()) {
    kinds.clear();
    for (const std::string& k : kind_names) kinds.push_back(scenario_kind_from_string(k));
  }
  const int n = count > 0 ? count : cfg.suite.count;
  const uint64_t seed = seed_given(common) ? common.seed : cfg.suite.seed;
  fs::create_directories(out_dir);
  const std::vector<Scene> scenes = generate_suite(kinds, n, seed, cfg.horizon);
  save_suite(scenes, out_dir, seed);
  std::printf("wrote %zu scenes to %s (seed %llu)\n", scenes.size(), out_dir.c_str(),
              static_cast<unsigned long long>(seed));
  return 0;
}

int cmd_train(const Common& common, const std::string& suite_dir, const std::string& out_path,
              const std::string& resume_path) {
  RunConfig cfg = materialize(common);
  const std::vector<Scene> scenes = load_suite(suite_dir);
  const Codebook cb = make_codebook(cfg);
  const std::vector<TrainingExample> data = build_training_set(scenes, cb);

  TrainConfig tc = cfg.training;
  tc.schedule.total_steps = cfg.diffusion.steps;
  tc.schedule.kind = cfg.diffusion.schedule;
  if (seed_given(common)) tc.seed = common.seed;

  DenoiserParams start;
  if (!resume_path.empty()) {
    start = load_checkpoint(resume_path);
  } else {
    DenoiserConfig dc;
    dc.vocab = cb.vocab_size();
    dc.seq_len = 2 * cfg.horizon.horizon_N;
    start = DenoiserParams::init(dc, tc.seed);
  }

  const TrainResult res = train(std::move(start), data, tc);
  save_checkpoint(out_path, res.params);
  nlohmann::json curve;
  curve["losses"] = res.loss_curve;
  curve["diverged"] = res.diverged;
  curve["resumed_from"] = resume_path;
  write_text_file(out_path + ".losses.json", curve.dump(2) + "\n");

  for (size_t i = 0; i < res.loss_curve.size(); ++i)
    std::printf("epoch %zu: loss %.6f\n", i, res.loss_curve[i]);
  if (res.diverged) {
    std::fprintf(stderr, "training diverged; partial curve written to %s.losses.json\n",
                 out_path.c_str());
    return 2;
  }
  std::printf("checkpoint written to %s\n", out_path.c_str());
  return 0;
}

int cmd_plan(const Common& common, const std::string& scene_path, const std::string& out_path,
             bool svg) {
  RunConfig cfg = materialize(common);
  const Scene scene = load_scene(scene_path);
  const Codebook cb = make_codebook(cfg);
  const std::unique_ptr<DenoiserFactory> factory = make_denoiser_factory(cfg);

  EvaluateOptions opts;
  opts.write_svg = svg;
  fs::path dir = out_path.empty() ? fs::path(".") : fs::path(out_path).parent_path();
  if (dir.empty()) dir = ".";
  opts.svg_dir = dir.string();

  const SceneResult r = evaluate_scene(scene, cb, *factory, cfg, cfg.seed, opts);
  if (r.failed) {
    std::fprintf(stderr, "planning failed: %s\n", r.error.c_str());
    return 2;
  }
  std::printf("scene %s: %d repair iterations, %s\n", r.scene_id.c_str(), r.iterations,
              terminal_status_name(r.terminal_status));
  print_breakdown("initial ", r.initial_score);
  print_breakdown("final   ", r.score);
  if (!out_path.empty()) {
    RunReport rep;
    rep.config_echo = run_config_to_json(cfg);
    rep.scenes.push_back(r);
    rep.aggregate = compute_aggregate(rep.scenes);
    write_text_file(out_path, report_to_json(rep).dump(2) + "\n");
  }
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& suite_dir, const std::string& out_path,
                 bool svg) {
  RunConfig cfg = materialize(common);
  const std::vector<Scene> scenes = load_suite(suite_dir);
  EvaluateOptions opts;
  if (svg) {
    fs::path dir = fs::path(out_path).parent_path() /
                   (fs::path(out_path).stem().string() + "_svg");
    fs::create_directories(dir);
    opts.write_svg = true;
    opts.svg_dir = dir.string();
  }
  const RunReport rep = run_evaluate(scenes, cfg, opts);
  write_text_file(out_path, report_to_json(rep).dump(2) + "\n");
  const Aggregate& a = rep.aggregate;
  std::printf("evaluated %d scenes (%d failures)\n", a.scenes, a.failures);
  std::printf("mean nc %.4f dac %.4f ttc %.4f comfort %.4f ep %.4f total %.4f\n", a.mean_nc,
              a.mean_dac, a.mean_ttc, a.mean_comfort, a.mean_ep, a.mean_total);
  std::printf("report written to %s\n", out_path.c_str());
  return 0;
}

int cmd_ablate(const Common& common, const std::string& suite_dir, const std::string& out_path) {
  RunConfig cfg = materialize(common);
  const std::vector<Scene> scenes = load_suite(suite_dir);
  const AblationResult res = run_ablate(scenes, cfg);
  write_text_file(out_path, ablation_to_json(res).dump(2) + "\n");
  std::fputs(ablation_table(res).c_str(), stdout);
  std::printf("ablation written to %s\n", out_path.c_str());
  return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out_dir,
             const std::string& suite_dir) {
  nlohmann::json rep;
  try {
    rep = nlohmann::json::parse(read_text_file(report_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(report_path + ": " + e.what());
  }
  if (!rep.contains("aggregate") || !rep.contains("scenes"))
    throw ValidationError("plot: not a run report: " + report_path);
  fs::create_directories(out_dir);

  const std::vector<int> hist =
      rep["aggregate"]["iteration_histogram"].get<std::vector<int>>();
  write_text_file(out_dir + "/iterations_histogram.svg",
                  bar_chart_svg(hist, "scenes per repair-iteration count", "repair iterations"));

  std::vector<Vec2> timing;
  for (const auto& s : rep["scenes"])
    if (!s.value("failed", false) && s.contains("wall_seconds"))
      timing.push_back(
          {static_cast<double>(s["iterations"].get<int>()), s["wall_seconds"].get<double>()});
  write_text_file(out_dir + "/inference_scaling.svg",
                  scatter_svg(timing, "wall time vs. repair iterations", "repair iterations",
                              "seconds"));

  int overlays = 0;
  if (!suite_dir.empty()) {
    for (const auto& s : rep["scenes"]) {
      if (s.value("failed", false)) continue;
      const std::string id = s["scene_id"].get<std::string>();
      const Scene scene = load_scene(suite_dir + "/" + id + ".json");
      ReflectionTrace trace;
      ReflectionIteration it;
      for (const auto& p : s["trajectory"])
        it.trajectory.waypoints.push_back({p[0].get<double>(), p[1].get<double>()});
      it.trajectory.dt = scene.dt;
      trace.iterations.push_back(std::move(it));
      GoalSet goals;
      for (const auto& g : s["goals"])
        goals.goals.push_back({{g[0].get<double>(), g[1].get<double>()}, 0.0, {0, 0}});
      write_text_file(out_dir + "/" + id + ".svg",
                      scene_svg(scene, trace, goals, s["selected_goal"].get<int>()));
      ++overlays;
    }
  }
  std::printf("wrote 2 charts and %d overlays to %s\n", overlays, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory planner: masked-diffusion generation with safety-guided repair"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("gen-scenarios", "generate a deterministic scenario suite");
  Common gen_c;
  add_common(gen, gen_c);
  std::string gen_out;
  std::vector<std::string> gen_kinds;
  int gen_count = 0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--kinds", gen_kinds, "scenario kinds (comma separated)")->delimiter(',');
  gen->add_option("--count", gen_count, "total scene count");

  CLI::App* tr = app.add_subcommand("train", "train the denoiser on a suite's references");
  Common tr_c;
  add_common(tr, tr_c);
  std::string tr_suite, tr_out, tr_resume;
  tr->add_option("--suite", tr_suite, "scenario suite directory")->required();
  tr->add_option("--out", tr_out, "checkpoint output path")->required();
  tr->add_option("--resume", tr_resume, "continue from an existing checkpoint");

  CLI::App* pl = app.add_subcommand("plan", "plan a single scene file");
  Common pl_c;
  add_common(pl, pl_c);
  std::string pl_scene, pl_out;
  bool pl_svg = false;
  pl->add_option("--scene", pl_scene, "scene JSON file")->required();
  pl->add_option("--out", pl_out, "single-scene report path");
  pl->add_flag("--svg", pl_svg, "emit the overlay SVG");

  CLI::App* ev = app.add_subcommand("evaluate", "plan every scene in a suite; write a report");
  Common ev_c;
  add_common(ev, ev_c);
  std::string ev_suite, ev_out = "report.json";
  bool ev_svg = false;
  ev->add_option("--suite", ev_suite, "scenario suite directory")->required();
  ev->add_option("--out", ev_out, "report output path");
  ev->add_flag("--svg", ev_svg, "emit per-scene overlay SVGs");

  CLI::App* ab = app.add_subcommand("ablate", "stage-toggle ablation table over a suite");
  Common ab_c;
  add_common(ab, ab_c);
  std::string ab_suite, ab_out = "ablation.json";
  ab->add_option("--suite", ab_suite, "scenario suite directory")->required();
  ab->add_option("--out", ab_out, "ablation table output path");

  CLI::App* pt = app.add_subcommand("plot", "figures from an existing report");
  std::string pt_report, pt_out = "plots", pt_suite;
  pt->add_option("--report", pt_report, "run report JSON")->required();
  pt->add_option("--out", pt_out, "output directory");
  pt->add_option("--suite", pt_suite, "suite directory for per-scene overlays");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen(gen_c, gen_out, gen_kinds, gen_count);
    if (app.got_subcommand(tr)) return cmd_train(tr_c, tr_suite, tr_out, tr_resume);
    if (app.got_subcommand(pl)) return cmd_plan(pl_c, pl_scene, pl_out, pl_svg);
    if (app.got_subcommand(ev)) return cmd_evaluate(ev_c, ev_suite, ev_out, ev_svg);
    if (app.got_subcommand(ab)) return cmd_ablate(ab_c, ab_suite, ab_out);
    if (app.got_subcommand(pt)) return cmd_plot(pt_report, pt_out, pt_suite);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
