#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "replan/codebook.hpp"
#include "replan/denoiser_oracle.hpp"
#include "replan/denoiser_trainable.hpp"
#include "replan/diffusion.hpp"
#include "replan/scene.hpp"
#include "replan/scene_context.hpp"

namespace replan {

// Builds a per-scene denoiser for the planner. Implementations carry whatever
// shared state they need (oracle sharpness, trained parameters).
class DenoiserFactory {
 public:
  virtual ~DenoiserFactory() = default;
  virtual std::unique_ptr<Denoiser> make(const Scene& scene) const = 0;
};

// Synthetic stand-in for a trained model: logits decay with distance from the
// scene's reference trajectory, with `sharpness` controlling how peaked.
class OracleDenoiserFactory final : public DenoiserFactory {
 public:
  OracleDenoiserFactory(Codebook codebook, double sharpness)
      : codebook_(std::move(codebook)), sharpness_(sharpness) {}

  std::unique_ptr<Denoiser> make(const Scene& scene) const override {
    return std::make_unique<OracleDenoiser>(scene, std::nullopt, codebook_, sharpness_);
  }

 private:
  Codebook codebook_;
  double sharpness_;
};

// Binds trained parameters to the scene context. The goal features stay
// empty: at plan time no endpoint is known yet, and once a goal is proposed
// it conditions the generation through anchored inpainting instead.
class TrainedDenoiserFactory final : public DenoiserFactory {
 public:
  explicit TrainedDenoiserFactory(std::shared_ptr<const DenoiserParams> params)
      : params_(std::move(params)) {
    if (!params_) throw std::invalid_argument("denoiser factory: null parameters");
  }

  static TrainedDenoiserFactory from_checkpoint(const std::string& path) {
    return TrainedDenoiserFactory(
        std::make_shared<const DenoiserParams>(load_checkpoint(path)));
  }

  std::unique_ptr<Denoiser> make(const Scene& scene) const override {
    return std::make_unique<TrainedDenoiser>(params_,
                                             SceneContext::from_scene(scene, std::nullopt));
  }

 private:
  std::shared_ptr<const DenoiserParams> params_;
};

}  // namespace replan
