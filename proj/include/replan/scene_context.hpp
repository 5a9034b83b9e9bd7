#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "replan/scene.hpp"

namespace replan {

// Fixed-length featureization of a scene (the conditioning vector c): ego
// speed, turn one-hot, optional goal offset, up to 8 nearest agents, and a
// trailing null flag used for classifier-free guidance.
struct SceneContext {
  static constexpr int kAgentSlots = 8;
  static constexpr int kAgentStride = 9;  // rel pos, vel, extents, kind one-hot
  static constexpr int kDim = 1 + 3 + 3 + kAgentSlots * kAgentStride + 1;

  std::array<double, kDim> features{};

  bool is_null() const { return features[kDim - 1] != 0.0; }

  static SceneContext null_context() {
    SceneContext c;
    c.features[kDim - 1] = 1.0;
    return c;
  }

  static SceneContext from_scene(const Scene& scene, std::optional<Vec2> goal) {
    SceneContext c;
    auto& f = c.features;
    f[0] = scene.ego.speed / 5.0;
    f[1 + static_cast<int>(scene.route.turn)] = 1.0;
    if (goal) {
      f[4] = goal->x / 10.0;
      f[5] = goal->y / 10.0;
      f[6] = 1.0;
    }

    std::vector<int> order(scene.agents.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return norm(scene.agents[a].center) < norm(scene.agents[b].center);
    });

    const int used = std::min<int>(kAgentSlots, static_cast<int>(order.size()));
    for (int slot = 0; slot < used; ++slot) {
      const Agent& a = scene.agents[order[slot]];
      const int base = 7 + slot * kAgentStride;
      f[base + 0] = a.center.x / 10.0;
      f[base + 1] = a.center.y / 10.0;
      f[base + 2] = a.velocity.x / 5.0;
      f[base + 3] = a.velocity.y / 5.0;
      f[base + 4] = a.half_extents.x;
      f[base + 5] = a.half_extents.y;
      f[base + 6 + static_cast<int>(a.kind)] = 1.0;
    }
    return c;
  }
};

}  // namespace replan
