#pragma once

#include <cstddef>
#include <string>

#include "uavheal/rng.hpp"
#include "uavheal/swarm_graph.hpp"

namespace uavheal {

// Axis-aligned box in meters.
struct SceneBounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3(1000.0, 1000.0, 100.0);

  void validate() const;
  Vec3 sample(Rng& rng) const;
};

// 1000 x 1000 x 100 m for a 200-node swarm; x and y shrink with sqrt(n / 200)
// so the areal density stays the same at smaller n.
SceneBounds scene_for_swarm(std::size_t swarm_size);

// Sequential rejection: each new point is kept only if it links to some point
// already placed, so the result is connected. Indices 1..n.
Topology generate_connected_topology(std::size_t n, const SceneBounds& scene, const LinkPredicate& linked, Rng& rng);

}  // namespace uavheal
