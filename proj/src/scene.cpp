#include "uavheal/scene.hpp"

#include <cmath>

#include "uavheal/errors.hpp"

namespace uavheal {

void SceneBounds::validate() const {
  if (!lo.allFinite() || !hi.allFinite()) throw Error(ErrorCode::Domain, "scene bounds must be finite");
  if (!(hi.array() >= lo.array()).all()) throw Error(ErrorCode::Domain, "scene upper corner below lower corner");
}

Vec3 SceneBounds::sample(Rng& rng) const {
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = rng.uniform(lo[a], hi[a]);
  return p;
}

SceneBounds scene_for_swarm(std::size_t swarm_size) {
  if (swarm_size == 0) throw Error(ErrorCode::Domain, "swarm size must be positive");
  const double side = 1000.0 * std::sqrt(static_cast<double>(swarm_size) / 200.0);
  return SceneBounds{Vec3::Zero(), Vec3(side, side, 100.0)};
}

Topology generate_connected_topology(std::size_t n, const SceneBounds& scene, const LinkPredicate& linked, Rng& rng) {
  if (n == 0) throw Error(ErrorCode::Domain, "swarm size must be positive");
  scene.validate();
  Positions p(static_cast<Eigen::Index>(n), 3);
  std::size_t placed = 0;
  int misses = 0;
  while (placed < n) {
    const Vec3 c = scene.sample(rng);
    bool near = placed == 0;
    for (std::size_t j = 0; j < placed && !near; ++j)
      near = linked(distance(c, p.row(static_cast<Eigen::Index>(j)).transpose()));
    if (!near) {
      if (++misses > 1000000) throw Error(ErrorCode::GenerationInfeasible, "could not grow a connected swarm");
      continue;
    }
    p.row(static_cast<Eigen::Index>(placed++)) = c.transpose();
  }
  return Topology::sequential(std::move(p));
}

}  // namespace uavheal
