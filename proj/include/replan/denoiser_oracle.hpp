#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "replan/codebook.hpp"
#include "replan/diffusion.hpp"
#include "replan/scene.hpp"

namespace replan {

// Emulates a well-trained denoiser so the reflection machinery is testable in
// isolation: masked slots score each token by closeness to a reference
// trajectory (the scene's own, or a kinematic ride to the bound goal), with
// sharpness T controlling how peaked the distribution is.
class OracleDenoiser final : public Denoiser {
 public:
  OracleDenoiser(const Scene& scene, std::optional<Vec2> goal, const Codebook& codebook,
                 double sharpness)
      : codebook_(codebook), sharpness_(sharpness) {
    if (!(sharpness > 0.0))
      throw std::invalid_argument("oracle denoiser: sharpness must be positive");
    if (scene.reference_trajectory.waypoints.empty())
      throw std::invalid_argument("oracle denoiser: scene has no reference trajectory");

    ContinuousTrajectory ref = scene.reference_trajectory;
    if (goal && distance(*goal, ref.waypoints.back()) > 1e-9)
      ref = kinematic_reference(scene, *goal);

    ref_values_.reserve(ref.waypoints.size() * 2);
    for (const Vec2& p : ref.waypoints) {
      ref_values_.push_back(p.x);
      ref_values_.push_back(p.y);
    }
  }

  int sequence_length() const override { return static_cast<int>(ref_values_.size()); }
  int vocab_size() const override { return codebook_.vocab_size(); }

  DenoiserOutput denoise(const NoisySequence& noisy, int /*s*/, int /*total_steps*/,
                         bool null_context) const override {
    const int n = sequence_length();
    const int vocab = codebook_.vocab_size();
    if (noisy.length() != n)
      throw std::invalid_argument("oracle denoiser: sequence length mismatch");

    DenoiserOutput out;
    out.length = n;
    out.vocab = vocab;
    out.logits.assign(static_cast<size_t>(n) * vocab, 0.0);
    for (int i = 0; i < n; ++i) {
      double* row = &out.logits[static_cast<size_t>(i) * vocab];
      if (noisy.mask_flags[i]) {
        if (null_context) continue;  // uniform: the oracle's null-context branch
        for (int a = 0; a < vocab; ++a)
          row[a] = -std::abs(codebook_.token_value(a) - ref_values_[i]) / sharpness_;
      } else {
        for (int a = 0; a < vocab; ++a) row[a] = a == noisy.tokens[i] ? 0.0 : -1e4;
      }
    }
    return out;
  }

 private:
  Codebook codebook_;
  double sharpness_;
  std::vector<double> ref_values_;
};

}  // namespace replan
