#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/diffusion.hpp"
#include "replan/geometry.hpp"
#include "replan/rng.hpp"
#include "replan/scene.hpp"
#include "replan/scoring.hpp"

namespace replan {

struct GoalCandidate {
  Vec2 position;       // meters
  double probability;  // product of the two per-axis marginals
  TokenPair tokens;
};

// Up to k spatially diverse endpoint proposals, probability non-increasing,
// pairwise distance >= d_nms.
struct GoalSet {
  std::vector<GoalCandidate> goals;
  int k = 3;
  int k_prime = 64;
  double d_nms = 0.9;
};

struct ReflectConfig {
  int k = 3;           // goal candidates kept after NMS
  int k_prime = 64;    // per-axis top list feeding the joint product
  double d_nms = 0.9;  // meters
  int delta = 10;      // Manhattan radius of the anchor search, token units
  int max_iterations = 10;
  bool goal_stage = true;
  bool safety_stage = true;
};

enum class TerminalStatus { safe, budget_exhausted };

// One examined trajectory in the regeneration loop. The anchor fields are set
// only when a repair was launched from this state.
struct ReflectionIteration {
  ContinuousTrajectory trajectory;
  ScoreBreakdown score;
  std::optional<int> violation_index;
  std::optional<ViolationKind> violation_kind;
  std::optional<TokenPair> chosen_anchor;
  int search_candidates = 0;
};

struct ReflectionTrace {
  std::vector<ReflectionIteration> iterations;  // initial state + one per repair
  TerminalStatus terminal_status = TerminalStatus::safe;
  int total_iterations = 0;  // repair (inpaint) cycles executed
};

// One scored goal-conditioned rollout.
struct PlanCandidate {
  TokenTrajectory tokens;
  ContinuousTrajectory trajectory;
  ScoreBreakdown score;
  Vec2 goal;  // dequantized anchor actually imposed
};

// Probability-greedy non-maximum suppression: keep the highest-probability
// candidate whose distance to everything already kept is >= d_nms, up to k.
// Ties sort by token order so the result is deterministic.
inline std::vector<GoalCandidate> greedy_nms(std::vector<GoalCandidate> cand, int k,
                                             double d_nms) {
  if (k < 1) throw std::invalid_argument("greedy_nms: k must be >= 1");
  if (!(d_nms >= 0.0)) throw std::invalid_argument("greedy_nms: d_nms must be non-negative");
  std::stable_sort(cand.begin(), cand.end(), [](const GoalCandidate& a, const GoalCandidate& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.tokens.x != b.tokens.x) return a.tokens.x < b.tokens.x;
    return a.tokens.y < b.tokens.y;
  });
  std::vector<GoalCandidate> kept;
  for (const GoalCandidate& c : cand) {
    bool clear = true;
    for (const GoalCandidate& g : kept)
      if (distance(c.position, g.position) < d_nms) {
        clear = false;
        break;
      }
    if (!clear) continue;
    kept.push_back(c);
    if (static_cast<int>(kept.size()) == k) break;
  }
  return kept;
}

inline GoalSet propose_goals(const Denoiser& denoiser, const Codebook& cb, int steps, int k_prime,
                             int k, double d_nms) {
  if (steps < 1) throw std::invalid_argument("propose_goals: steps must be >= 1");
  if (k < 1 || k_prime < 1)
    throw std::invalid_argument("propose_goals: k and k_prime must be >= 1");
  if (!(d_nms >= 0.0)) throw std::invalid_argument("propose_goals: d_nms must be non-negative");
  const int n = denoiser.sequence_length();
  const int vocab = denoiser.vocab_size();
  if (n < 2) throw std::invalid_argument("propose_goals: sequence too short");

  const NoisySequence blank = NoisySequence::fully_masked(n);
  const DenoiserOutput out = denoiser.denoise(blank, steps, steps, false);

  // Marginals of the final waypoint's two slots.
  std::vector<double> px(vocab), py(vocab);
  softmax_row(&out.logits[static_cast<size_t>(n - 2) * vocab], vocab, px.data());
  softmax_row(&out.logits[static_cast<size_t>(n - 1) * vocab], vocab, py.data());

  auto top_tokens = [&](const std::vector<double>& p) {
    std::vector<int> idx(vocab);
    for (int a = 0; a < vocab; ++a) idx[a] = a;
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p[a] > p[b]; });
    idx.resize(std::min(static_cast<size_t>(k_prime), idx.size()));
    return idx;
  };
  const std::vector<int> tx = top_tokens(px);
  const std::vector<int> ty = top_tokens(py);

  std::vector<GoalCandidate> cand;
  cand.reserve(tx.size() * ty.size());
  for (int a : tx)
    for (int b : ty) cand.push_back({cb.dequantize_point({a, b}), px[a] * py[b], TokenPair{a, b}});

  GoalSet set;
  set.k = k;
  set.k_prime = k_prime;
  set.d_nms = d_nms;
  set.goals = greedy_nms(std::move(cand), k, d_nms);
  return set;
}

inline std::vector<PlanCandidate> goal_conditioned_generate(const Denoiser& denoiser,
                                                            const Scene& scene,
                                                            const GoalSet& goals,
                                                            const Codebook& cb,
                                                            const GenerateOptions& opt,
                                                            const ScoringConfig& cfg = {}) {
  if (goals.goals.empty()) throw std::invalid_argument("goal_conditioned_generate: no goals");
  const int n = 2 * scene.horizon_N;
  std::vector<PlanCandidate> out;
  out.reserve(goals.goals.size());
  for (size_t gi = 0; gi < goals.goals.size(); ++gi) {
    const TokenPair g = goals.goals[gi].tokens;
    TokenTrajectory base;
    base.tokens.assign(n, 0);
    base.horizon_N = scene.horizon_N;
    base.dt = scene.dt;
    base.tokens[n - 2] = g.x;
    base.tokens[n - 1] = g.y;
    GenerateOptions per = opt;
    per.seed = derive_seed(opt.seed, 0x67656e, static_cast<uint64_t>(gi));

    PlanCandidate c;
    c.tokens = inpaint(denoiser, base, {n - 2, n - 1}, per);
    c.trajectory = cb.dequantize(c.tokens);
    c.score = global_score(c.trajectory, scene, cfg);
    c.goal = cb.dequantize_point(g);
    out.push_back(std::move(c));
  }
  return out;
}

// Argmax of total; ties prefer higher m_ep, then the earlier candidate.
inline size_t select_best(const std::vector<PlanCandidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_best: empty candidate set");
  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    const ScoreBreakdown& a = candidates[i].score;
    const ScoreBreakdown& b = candidates[best].score;
    if (a.total > b.total || (a.total == b.total && a.m_ep > b.m_ep)) best = i;
  }
  return best;
}

struct AnchorSearchResult {
  TokenPair anchor;
  double score = 0.0;           // local_score of the chosen pair
  double original_score = 0.0;  // local_score of the unmodified pair
  int candidate_count = 0;
};

// Exhaustive argmax of local_score over the Manhattan ball |dx|+|dy| <= delta
// around the current pair at waypoint t_star, intersected with the vocabulary.
// Ties prefer smaller Manhattan distance, then lexicographic token order; the
// original pair is always in the ball, so the result never scores below it.
inline AnchorSearchResult search_anchor(const TokenTrajectory& traj, int t_star, int delta,
                                        const Scene& scene, const Codebook& cb,
                                        const ScoringConfig& cfg = {}) {
  if (t_star < 0 || t_star >= traj.horizon_N)
    throw std::invalid_argument("search_anchor: t_star out of range");
  if (delta < 1) throw std::invalid_argument("search_anchor: delta must be >= 1");
  const int vocab = cb.vocab_size();
  const TokenPair orig{traj.tokens[2 * t_star], traj.tokens[2 * t_star + 1]};

  AnchorSearchResult res;
  bool have = false;
  int best_dist = 0;
  for (int dx = -delta; dx <= delta; ++dx) {
    const int ax = orig.x + dx;
    if (ax < 0 || ax >= vocab) continue;
    const int rem = delta - std::abs(dx);
    for (int dy = -rem; dy <= rem; ++dy) {
      const int ay = orig.y + dy;
      if (ay < 0 || ay >= vocab) continue;
      const TokenPair cand{ax, ay};
      const double s = local_score(cand, t_star, traj, scene, cb, cfg);
      const int dist = std::abs(dx) + std::abs(dy);
      ++res.candidate_count;
      if (cand == orig) res.original_score = s;
      bool better = !have || s > res.score;
      if (have && s == res.score) {
        better = dist < best_dist ||
                 (dist == best_dist &&
                  (cand.x < res.anchor.x || (cand.x == res.anchor.x && cand.y < res.anchor.y)));
      }
      if (better) {
        res.anchor = cand;
        res.score = s;
        best_dist = dist;
        have = true;
      }
    }
  }
  return res;
}

struct RepairResult {
  TokenTrajectory tokens;
  ReflectionTrace trace;
};

// Evaluate -> anchor -> inpaint until the windowed safety report is clean or
// the iteration budget runs out. fixed_slots (goal anchors) stay fixed
// throughout; every substituted waypoint joins the anchor set permanently.
// When consecutive repairs pick the identical (t*, anchor) pair, the search
// radius is widened once to break boundary oscillation.
inline RepairResult regenerate_safe(const Denoiser& denoiser, const Scene& scene,
                                    const TokenTrajectory& start,
                                    const std::vector<int>& fixed_slots, const Codebook& cb,
                                    const GenerateOptions& opt, const ReflectConfig& rcfg,
                                    const ScoringConfig& cfg = {}) {
  if (rcfg.max_iterations < 0)
    throw std::invalid_argument("regenerate_safe: negative iteration budget");
  RepairResult out;
  out.tokens = start;
  std::vector<int> anchored = fixed_slots;
  int delta = rcfg.delta;
  bool widened = false;
  int prev_tstar = -1;
  TokenPair prev_anchor{-1, -1};

  for (int iter = 0;; ++iter) {
    const ContinuousTrajectory traj = cb.dequantize(out.tokens);
    const WaypointSafetyReport report = safety_report(traj, scene, cfg.window, cfg);

    ReflectionIteration entry;
    entry.trajectory = traj;
    entry.score = global_score(traj, scene, cfg);
    entry.violation_index = report.first_violation_index;
    entry.violation_kind = report.violation_kind;
    if (!report.first_violation_index) {
      out.trace.iterations.push_back(std::move(entry));
      out.trace.terminal_status = TerminalStatus::safe;
      break;
    }
    if (iter >= rcfg.max_iterations) {
      out.trace.iterations.push_back(std::move(entry));
      out.trace.terminal_status = TerminalStatus::budget_exhausted;
      break;
    }

    const int t_star = *report.first_violation_index;
    const AnchorSearchResult found = search_anchor(out.tokens, t_star, delta, scene, cb, cfg);
    entry.chosen_anchor = found.anchor;
    entry.search_candidates = found.candidate_count;
    out.trace.iterations.push_back(std::move(entry));

    if (!widened && t_star == prev_tstar && found.anchor == prev_anchor) {
      delta = std::max(delta, std::min(2 * delta, 10));
      widened = true;
    }
    prev_tstar = t_star;
    prev_anchor = found.anchor;

    out.tokens.tokens[2 * t_star] = found.anchor.x;
    out.tokens.tokens[2 * t_star + 1] = found.anchor.y;
    for (int slot : {2 * t_star, 2 * t_star + 1})
      if (std::find(anchored.begin(), anchored.end(), slot) == anchored.end())
        anchored.push_back(slot);

    GenerateOptions per = opt;
    per.seed = derive_seed(opt.seed, 0x726570, static_cast<uint64_t>(iter));
    out.tokens = inpaint(denoiser, out.tokens, anchored, per);
  }
  out.trace.total_iterations = static_cast<int>(out.trace.iterations.size()) - 1;
  return out;
}

struct PlanResult {
  TokenTrajectory tokens;
  ContinuousTrajectory trajectory;
  ScoreBreakdown score;
  GoalSet goals;                          // empty when the goal stage is off
  std::vector<PlanCandidate> candidates;  // scored rollouts feeding selection
  size_t selected_index = 0;
  ReflectionTrace trace;
};

// Wall time spent in each stage, for the inference-scaling view.
struct PlanTiming {
  double goal_seconds = 0.0;
  double safety_seconds = 0.0;
};

// Two-stage pipeline with independently toggleable stages: goal proposal +
// conditioned generation + selection, then safety-guided regeneration. With
// the safety stage off the repair budget is zero, so the trace still records
// the selected trajectory's safety report.
inline PlanResult plan(const Denoiser& denoiser, const Scene& scene, const Codebook& cb,
                       const GenerateOptions& opt, const ReflectConfig& rcfg,
                       const ScoringConfig& cfg = {}, PlanTiming* timing = nullptr) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  PlanResult out;
  const int n = 2 * scene.horizon_N;
  std::vector<int> goal_slots;

  if (rcfg.goal_stage) {
    out.goals = propose_goals(denoiser, cb, opt.steps, rcfg.k_prime, rcfg.k, rcfg.d_nms);
    out.candidates = goal_conditioned_generate(denoiser, scene, out.goals, cb, opt, cfg);
    goal_slots = {n - 2, n - 1};
  } else {
    out.goals.k = rcfg.k;
    out.goals.k_prime = rcfg.k_prime;
    out.goals.d_nms = rcfg.d_nms;
    GenerateOptions per = opt;
    per.seed = derive_seed(opt.seed, 0x67656e, 0);
    PlanCandidate c;
    TokenTrajectory blank;
    blank.tokens.assign(n, 0);
    blank.horizon_N = scene.horizon_N;
    blank.dt = scene.dt;
    c.tokens = inpaint(denoiser, blank, {}, per);
    c.trajectory = cb.dequantize(c.tokens);
    c.score = global_score(c.trajectory, scene, cfg);
    c.goal = c.trajectory.waypoints.back();
    out.candidates.push_back(std::move(c));
  }

  out.selected_index = select_best(out.candidates);
  const PlanCandidate& best = out.candidates[out.selected_index];
  const auto t1 = clock::now();

  ReflectConfig stage = rcfg;
  if (!rcfg.safety_stage) stage.max_iterations = 0;
  RepairResult repaired =
      regenerate_safe(denoiser, scene, best.tokens, goal_slots, cb, opt, stage, cfg);
  out.tokens = std::move(repaired.tokens);
  out.trace = std::move(repaired.trace);
  out.trajectory = cb.dequantize(out.tokens);
  out.score = out.trace.iterations.back().score;
  if (timing) {
    const auto t2 = clock::now();
    timing->goal_seconds = std::chrono::duration<double>(t1 - t0).count();
    timing->safety_seconds = std::chrono::duration<double>(t2 - t1).count();
  }
  return out;
}

}  // namespace replan
