#include "uavheal/vrg.hpp"

#include <cmath>

#include "uavheal/errors.hpp"

namespace uavheal {

namespace {

void require_pairs(const Topology& topology) {
  if (topology.size() < 2) throw Error(ErrorCode::DegenerateInput, "virtual distances need at least two rows");
}

LinkPredicate within(double m) {
  return [m](double d) { return d <= m; };
}

}  // namespace

double min_virtual_distance(const Topology& topology) {
  require_pairs(topology);
  const auto d = sorted_pair_distances(topology);
  std::size_t lo = 0;
  std::size_t hi = d.size() - 1;  // the diameter always connects
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (is_connected(topology, within(d[mid]))) hi = mid;
    else lo = mid + 1;
  }
  return d[lo];
}

double min_virtual_distance_linear_scan(const Topology& topology) {
  require_pairs(topology);
  const auto d = sorted_pair_distances(topology);
  for (double m : d) {
    const auto l = laplacian(build_graph(topology, within(m)));
    if (zero_eig_multiplicity(l) == 1) return m;
  }
  return d.back();
}

double max_virtual_distance(const Topology& topology) {
  require_pairs(topology);
  return sorted_pair_distances(topology).back();
}

VirtualDistance virtual_distance(double d_min_m, double d_max_m, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorCode::Domain, "eta must lie in [0, 1]");
  if (!(d_min_m <= d_max_m)) throw Error(ErrorCode::ContractViolation, "d_min must not exceed d_max");
  VirtualDistance v{d_min_m, d_max_m, eta, eta * d_min_m + (1.0 - eta) * d_max_m};
  // Guard the blend against rounding outside [d_min, d_max].
  v.d_v_m = std::min(std::max(v.d_v_m, d_min_m), d_max_m);
  return v;
}

VirtualDistance virtual_distance(const Topology& topology, double eta) {
  require_pairs(topology);
  return virtual_distance(min_virtual_distance(topology), max_virtual_distance(topology), eta);
}

SwarmGraph build_vrg(const Topology& topology, double d_v_m) {
  auto g = build_graph(topology, within(d_v_m));
  if (cluster_count(g) != 1) throw Error(ErrorCode::DisconnectedVrg, "virtual distance is below d_min");
  return g;
}

}  // namespace uavheal
