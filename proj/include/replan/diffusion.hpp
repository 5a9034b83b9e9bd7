#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "replan/codebook.hpp"
#include "replan/rng.hpp"

namespace replan {

inline constexpr int kMaskToken = -1;

struct MaskSchedule {
  enum class Kind { cosine, linear };

  int total_steps = 5;
  Kind kind = Kind::cosine;

  // Masked fraction at progress u in [0,1].
  double ratio(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    return kind == Kind::cosine ? std::sin(0.5 * std::numbers::pi * u) : u;
  }
};

// ceil(L_free * ratio(s/S)); the epsilon absorbs FP drift at exact grid points
// such as sin(pi/6).
inline int masked_count(const MaskSchedule& schedule, int s, int free_slots) {
  if (schedule.total_steps < 1) throw std::invalid_argument("mask schedule: total_steps < 1");
  if (s < 0 || s > schedule.total_steps)
    throw std::invalid_argument("masked_count: step out of range");
  if (free_slots < 0) throw std::invalid_argument("masked_count: negative slot count");
  const double g = schedule.ratio(static_cast<double>(s) / schedule.total_steps);
  return static_cast<int>(std::ceil(free_slots * g - 1e-9));
}

// Token sequence with MASK holes; anchored slots are never masked or resampled.
struct NoisySequence {
  std::vector<int> tokens;  // codebook index, or kMaskToken where masked
  std::vector<uint8_t> mask_flags;
  std::vector<uint8_t> anchor_flags;

  int length() const { return static_cast<int>(tokens.size()); }

  int masked_total() const {
    int n = 0;
    for (uint8_t m : mask_flags) n += m;
    return n;
  }

  static NoisySequence fully_masked(int length) {
    NoisySequence s;
    s.tokens.assign(length, kMaskToken);
    s.mask_flags.assign(length, 1);
    s.anchor_flags.assign(length, 0);
    return s;
  }

  void validate(int vocab) const {
    const size_t n = tokens.size();
    if (mask_flags.size() != n || anchor_flags.size() != n)
      throw std::invalid_argument("noisy sequence: flag lengths differ from tokens");
    for (size_t i = 0; i < n; ++i) {
      if (mask_flags[i] != (tokens[i] == kMaskToken ? 1 : 0))
        throw std::invalid_argument("noisy sequence: mask flag inconsistent with token");
      if (anchor_flags[i] && mask_flags[i])
        throw std::invalid_argument("noisy sequence: anchored slot is masked");
      if (!mask_flags[i] && (tokens[i] < 0 || tokens[i] >= vocab))
        throw std::invalid_argument("noisy sequence: token outside vocabulary");
    }
  }
};

struct DenoiserOutput {
  int length = 0;
  int vocab = 0;
  std::vector<double> logits;  // row-major length x vocab

  double at(int i, int a) const { return logits[static_cast<size_t>(i) * vocab + a]; }
  double& at(int i, int a) { return logits[static_cast<size_t>(i) * vocab + a]; }
};

// A denoiser already bound to one scene (and optionally a goal); the
// null_context flag selects the CFG null branch. Implementations must be pure.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int sequence_length() const = 0;
  virtual int vocab_size() const = 0;
  virtual DenoiserOutput denoise(const NoisySequence& noisy, int s, int total_steps,
                                 bool null_context) const = 0;
};

inline double log_sum_exp(const double* x, int n) {
  double m = x[0];
  for (int i = 1; i < n; ++i) m = std::max(m, x[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

inline void softmax_row(const double* logits, int n, double* out) {
  double m = logits[0];
  for (int i = 1; i < n; ++i) m = std::max(m, logits[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(logits[i] - m);
    acc += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= acc;
}

// Masks masked_count(schedule, s) slots uniformly without replacement among
// the non-anchored slots; deterministic per seed.
inline NoisySequence forward_mask(const TokenTrajectory& clean, int s,
                                  const MaskSchedule& schedule, uint64_t rng_seed,
                                  const std::vector<uint8_t>* anchor_flags = nullptr) {
  const int n = static_cast<int>(clean.tokens.size());
  NoisySequence out;
  out.tokens = clean.tokens;
  out.mask_flags.assign(n, 0);
  out.anchor_flags.assign(n, 0);
  if (anchor_flags) {
    if (static_cast<int>(anchor_flags->size()) != n)
      throw std::invalid_argument("forward_mask: anchor flag length mismatch");
    out.anchor_flags = *anchor_flags;
  }

  std::vector<int> free_slots;
  for (int i = 0; i < n; ++i)
    if (!out.anchor_flags[i]) free_slots.push_back(i);

  const int k = masked_count(schedule, s, static_cast<int>(free_slots.size()));
  Rng rng(rng_seed);
  for (int i = 0; i < k; ++i) {  // partial Fisher-Yates: first k entries
    const size_t j = i + rng.uniform_below(free_slots.size() - i);
    std::swap(free_slots[i], free_slots[j]);
    out.tokens[free_slots[i]] = kMaskToken;
    out.mask_flags[free_slots[i]] = 1;
  }
  return out;
}

// Mean NLL over masked positions, the standard masked-diffusion objective.
// Each item must expose a `.clean` TokenTrajectory; denoise_fn(item, noisy, s)
// supplies the per-item context binding.
template <typename Item, typename DenoiseFn>
double training_loss(const std::vector<Item>& batch, DenoiseFn&& denoise_fn,
                     const MaskSchedule& schedule, uint64_t rng_seed) {
  if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  Rng rng(rng_seed);
  double total = 0.0;
  long count = 0;
  for (const Item& item : batch) {
    int s = 1 + static_cast<int>(rng.uniform_below(schedule.total_steps));
    NoisySequence noisy = forward_mask(item.clean, s, schedule, rng.next_u64());
    if (noisy.masked_total() == 0) {  // resample s once, then skip
      s = 1 + static_cast<int>(rng.uniform_below(schedule.total_steps));
      noisy = forward_mask(item.clean, s, schedule, rng.next_u64());
      if (noisy.masked_total() == 0) continue;
    }
    const DenoiserOutput out = denoise_fn(item, noisy, s);
    const int n = noisy.length();
    if (out.length != n || static_cast<size_t>(out.length) * out.vocab != out.logits.size())
      throw std::invalid_argument("training_loss: denoiser output shape mismatch");
    for (int i = 0; i < n; ++i) {
      if (!noisy.mask_flags[i]) continue;
      const double* row = &out.logits[static_cast<size_t>(i) * out.vocab];
      total += log_sum_exp(row, out.vocab) - row[item.clean.tokens[i]];
      ++count;
    }
  }
  return count > 0 ? total / count : 0.0;
}

enum class DecodeMode { greedy, sample };

struct GenerateOptions {
  int steps = 5;
  MaskSchedule::Kind schedule = MaskSchedule::Kind::cosine;
  DecodeMode mode = DecodeMode::greedy;
  double temperature = 1.0;  // sampling only; confidence stays untempered
  double cfg_scale = 1.0;    // 1.0 = guidance off
  uint64_t seed = 0;
};

// Invoked after each reverse step with the in-progress sequence.
using StepObserver = std::function<void(int step, const NoisySequence&)>;

namespace detail {

inline DenoiserOutput guided_denoise(const Denoiser& denoiser, const NoisySequence& cur, int s,
                                     const GenerateOptions& opt) {
  DenoiserOutput out = denoiser.denoise(cur, s, opt.steps, false);
  if (opt.cfg_scale != 1.0) {
    const DenoiserOutput uncond = denoiser.denoise(cur, s, opt.steps, true);
    if (uncond.logits.size() != out.logits.size())
      throw std::runtime_error("denoiser: conditional/unconditional shape mismatch");
    for (size_t i = 0; i < out.logits.size(); ++i)
      out.logits[i] = uncond.logits[i] + opt.cfg_scale * (out.logits[i] - uncond.logits[i]);
  }
  for (double v : out.logits)
    if (!std::isfinite(v)) throw std::runtime_error("denoiser emitted non-finite logits");
  return out;
}

}  // namespace detail

// Reverse parallel decoding with low-confidence remasking. `anchors` supplies
// anchored slots; every non-anchored slot starts masked.
inline TokenTrajectory reverse_generate(const Denoiser& denoiser, const NoisySequence& anchors,
                                        int horizon_N, double dt, const GenerateOptions& opt,
                                        const StepObserver& observer = {}) {
  if (opt.steps < 1) throw std::invalid_argument("reverse_generate: steps must be >= 1");
  if (!(opt.temperature > 0.0))
    throw std::invalid_argument("reverse_generate: temperature must be positive");
  const int n = anchors.length();
  if (n != denoiser.sequence_length())
    throw std::invalid_argument("reverse_generate: sequence length mismatch");
  if (n != 2 * horizon_N) throw std::invalid_argument("reverse_generate: length != 2N");
  const int vocab = denoiser.vocab_size();

  NoisySequence cur = anchors;
  int free_slots = 0;
  for (int i = 0; i < n; ++i) {
    if (cur.anchor_flags[i]) continue;
    cur.tokens[i] = kMaskToken;
    cur.mask_flags[i] = 1;
    ++free_slots;
  }
  cur.validate(vocab);

  const MaskSchedule schedule{opt.steps, opt.schedule};
  Rng rng(opt.seed);
  std::vector<double> probs(vocab);
  std::vector<double> tempered(vocab);

  struct Pick {
    int slot;
    int token;
    double confidence;
  };

  for (int s = opt.steps; s >= 1; --s) {
    std::vector<int> masked;
    for (int i = 0; i < n; ++i)
      if (cur.mask_flags[i]) masked.push_back(i);
    if (masked.empty()) break;

    const DenoiserOutput out = detail::guided_denoise(denoiser, cur, s, opt);
    if (out.length != n || out.vocab != vocab)
      throw std::runtime_error("denoiser output shape mismatch");

    std::vector<Pick> picks;
    picks.reserve(masked.size());
    for (int i : masked) {
      const double* row = &out.logits[static_cast<size_t>(i) * vocab];
      softmax_row(row, vocab, probs.data());
      int token = 0;
      if (opt.mode == DecodeMode::greedy) {
        for (int a = 1; a < vocab; ++a)
          if (row[a] > row[token]) token = a;
      } else {
        for (int a = 0; a < vocab; ++a) tempered[a] = row[a] / opt.temperature;
        softmax_row(tempered.data(), vocab, tempered.data());
        token = rng.categorical(tempered);
      }
      picks.push_back({i, token, probs[token]});
    }

    const int target_remaining = masked_count(schedule, s - 1, free_slots);
    const int commit = std::max(0, static_cast<int>(picks.size()) - target_remaining);
    std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.slot < b.slot;
    });
    for (int k = 0; k < commit; ++k) {
      cur.tokens[picks[k].slot] = picks[k].token;
      cur.mask_flags[picks[k].slot] = 0;
    }
    if (observer) observer(s, cur);
  }

  if (cur.masked_total() != 0) throw std::runtime_error("reverse_generate: slots left masked");
  return TokenTrajectory{cur.tokens, horizon_N, dt};
}

// Regenerates every slot outside fixed_slots, keeping the fixed ones verbatim.
inline TokenTrajectory inpaint(const Denoiser& denoiser, const TokenTrajectory& base,
                               const std::vector<int>& fixed_slots, const GenerateOptions& opt,
                               const StepObserver& observer = {}) {
  const int n = static_cast<int>(base.tokens.size());
  NoisySequence anchors;
  anchors.tokens = base.tokens;
  anchors.mask_flags.assign(n, 0);
  anchors.anchor_flags.assign(n, 0);
  for (int idx : fixed_slots) {
    if (idx < 0 || idx >= n) throw std::invalid_argument("inpaint: fixed slot out of range");
    anchors.anchor_flags[idx] = 1;
  }
  return reverse_generate(denoiser, anchors, base.horizon_N, base.dt, opt, observer);
}

}  // namespace replan
