#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/denoiser_trainable.hpp"
#include "replan/diffusion.hpp"
#include "replan/rng.hpp"
#include "replan/scene.hpp"
#include "replan/scene_context.hpp"

namespace replan {

struct TrainingExample {
  TokenTrajectory clean;
  SceneContext ctx;         // goal-conditioned featureization
  SceneContext ctx_nogoal;  // same scene without the goal slot
};

// Supervision pairs: quantized reference trajectory, goal = its endpoint.
inline std::vector<TrainingExample> build_training_set(const std::vector<Scene>& scenes,
                                                       const Codebook& cb) {
  std::vector<TrainingExample> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) {
    if (s.reference_trajectory.waypoints.empty())
      throw std::invalid_argument("build_training_set: scene lacks a reference trajectory");
    TrainingExample ex;
    ex.clean = cb.quantize(s.reference_trajectory);
    ex.ctx = SceneContext::from_scene(s, s.reference_trajectory.waypoints.back());
    ex.ctx_nogoal = SceneContext::from_scene(s, std::nullopt);
    out.push_back(std::move(ex));
  }
  return out;
}

struct TrainConfig {
  int epochs = 3;
  double lr = 1e-3;
  int batch_size = 16;
  uint64_t seed = 0;
  double cfg_dropout = 0.1;   // context replaced by the null context
  double goal_dropout = 0.3;  // trains the goal-free conditional as well
  int samples_per_scene = 8;  // mask draws per scene per epoch
  MaskSchedule schedule{};
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
  double divergence_limit = 50.0;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> loss_curve;  // [0] = pre-training evaluation, then one entry per epoch
  bool diverged = false;
};

// Parameter tensors in a fixed, shared order; lets optimizer code zip
// parameter/gradient/state triples without naming every tensor.
inline std::vector<std::vector<double>*> tensor_list(DenoiserParams& p) {
  std::vector<std::vector<double>*> out;
  p.for_each_tensor([&](const char*, std::vector<double>& t) { out.push_back(&t); });
  return out;
}

// Deterministic mean masked-NLL over the dataset (no updates); used for the
// epoch-0 entry of the loss curve and for held-out monitoring.
inline double evaluate_loss(const DenoiserParams& params, const std::vector<TrainingExample>& data,
                            const MaskSchedule& schedule, uint64_t seed) {
  return training_loss(
      data,
      [&](const TrainingExample& item, const NoisySequence& noisy, int s) {
        return trainable_forward(params, noisy, item.ctx, s, schedule.total_steps);
      },
      schedule, seed);
}

inline TrainResult train(DenoiserParams params, const std::vector<TrainingExample>& data,
                         const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.samples_per_scene < 1)
    throw std::invalid_argument("train: bad hyperparameters");

  TrainResult result;
  DenoiserParams rms = DenoiserParams::zeros(params.config);
  const int vocab = params.config.vocab;
  const int L = params.config.seq_len;

  result.loss_curve.push_back(
      evaluate_loss(params, data, cfg.schedule, derive_seed(cfg.seed, 0xeba1)));

  std::vector<int> order;
  order.reserve(data.size() * cfg.samples_per_scene);
  Mat dlogits(L, vocab);
  ForwardCache cache;

  for (int epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(epoch)));
    order.clear();
    for (size_t i = 0; i < data.size(); ++i)
      for (int k = 0; k < cfg.samples_per_scene; ++k) order.push_back(static_cast<int>(i));
    rng.shuffle(order);

    double epoch_nll = 0.0;
    long epoch_masked = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      DenoiserParams grads = DenoiserParams::zeros(params.config);
      long batch_masked = 0;

      for (size_t u = start; u < end; ++u) {
        const TrainingExample& item = data[order[u]];
        int s = 1 + static_cast<int>(rng.uniform_below(cfg.schedule.total_steps));
        NoisySequence noisy = forward_mask(item.clean, s, cfg.schedule, rng.next_u64());
        const bool drop_ctx = rng.bernoulli(cfg.cfg_dropout);
        const bool drop_goal = rng.bernoulli(cfg.goal_dropout);
        if (noisy.masked_total() == 0) {
          s = 1 + static_cast<int>(rng.uniform_below(cfg.schedule.total_steps));
          noisy = forward_mask(item.clean, s, cfg.schedule, rng.next_u64());
          if (noisy.masked_total() == 0) continue;
        }
        const SceneContext ctx = drop_ctx    ? SceneContext::null_context()
                                 : drop_goal ? item.ctx_nogoal
                                             : item.ctx;
        const DenoiserOutput out = trainable_forward(params, noisy, ctx, s,
                                                     cfg.schedule.total_steps, &cache);

        std::fill(dlogits.a.begin(), dlogits.a.end(), 0.0);
        std::vector<double> probs(vocab);
        for (int i = 0; i < L; ++i) {
          if (!noisy.mask_flags[i]) continue;
          const double* row = &out.logits[static_cast<size_t>(i) * vocab];
          softmax_row(row, vocab, probs.data());
          const int target = item.clean.tokens[i];
          epoch_nll += log_sum_exp(row, vocab) - row[target];
          double* dl = dlogits.row(i);
          for (int a = 0; a < vocab; ++a) dl[a] = probs[a];
          dl[target] -= 1.0;
          ++batch_masked;
        }

        DenoiserParams item_grads = trainable_backward(params, cache, dlogits);
        const auto dst = tensor_list(grads);
        const auto src = tensor_list(item_grads);
        for (size_t t = 0; t < dst.size(); ++t)
          for (size_t i = 0; i < dst[t]->size(); ++i) (*dst[t])[i] += (*src[t])[i];
      }

      if (batch_masked == 0) continue;
      epoch_masked += batch_masked;
      const double scale = 1.0 / static_cast<double>(batch_masked);

      // RMS-scaled step, momentum-free
      const auto pt = tensor_list(params);
      const auto gt = tensor_list(grads);
      const auto vt = tensor_list(rms);
      for (size_t t = 0; t < pt.size(); ++t) {
        for (size_t i = 0; i < pt[t]->size(); ++i) {
          const double gi = (*gt[t])[i] * scale;
          double& v = (*vt[t])[i];
          v = cfg.rms_decay * v + (1.0 - cfg.rms_decay) * gi * gi;
          (*pt[t])[i] -= cfg.lr * gi / (std::sqrt(v) + cfg.rms_eps);
        }
      }
    }

    const double epoch_loss =
        epoch_masked > 0 ? epoch_nll / static_cast<double>(epoch_masked) : 0.0;
    result.loss_curve.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss) || epoch_loss > cfg.divergence_limit) result.diverged = true;
  }

  result.params = std::move(params);
  return result;
}

// Greedy goal-anchored decode accuracy: fraction of tokens within
// `token_tolerance` of the quantized reference, over all scenes.
inline double evaluate_token_accuracy(const DenoiserParams& params,
                                      const std::vector<Scene>& scenes, const Codebook& cb,
                                      int steps, int token_tolerance) {
  auto shared = std::make_shared<const DenoiserParams>(params);
  long hits = 0;
  long total = 0;
  for (const Scene& scene : scenes) {
    const TokenTrajectory clean = cb.quantize(scene.reference_trajectory);
    const int n = static_cast<int>(clean.tokens.size());
    const Vec2 goal = scene.reference_trajectory.waypoints.back();
    TrainedDenoiser den(shared, SceneContext::from_scene(scene, goal));

    NoisySequence anchors = NoisySequence::fully_masked(n);
    for (int slot : {n - 2, n - 1}) {
      anchors.tokens[slot] = clean.tokens[slot];
      anchors.mask_flags[slot] = 0;
      anchors.anchor_flags[slot] = 1;
    }
    GenerateOptions opt;
    opt.steps = steps;
    opt.mode = DecodeMode::greedy;
    const TokenTrajectory decoded =
        reverse_generate(den, anchors, clean.horizon_N, clean.dt, opt);
    for (int i = 0; i < n; ++i) {
      hits += std::abs(decoded.tokens[i] - clean.tokens[i]) <= token_tolerance ? 1 : 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace replan
