#pragma once

#include "uavheal/swarm_graph.hpp"

namespace uavheal {

// Relaxed link distance blended between the smallest connecting threshold
// and the swarm diameter: d_v = eta * d_min + (1 - eta) * d_max.
struct VirtualDistance {
  double d_min_m = 0.0;
  double d_max_m = 0.0;
  double eta = 0.0;
  double d_v_m = 0.0;
};

// Smallest pairwise distance m such that "distance <= m" connects the swarm.
// Binary search over the sorted pairwise distances; connectivity is monotone
// in the threshold, and ties resolve to the leftmost connecting entry.
double min_virtual_distance(const Topology& topology);

// Reference form: linear scan over the sorted distances, stopping at the
// first threshold whose Laplacian has a single zero eigenvalue.
double min_virtual_distance_linear_scan(const Topology& topology);

double max_virtual_distance(const Topology& topology);

VirtualDistance virtual_distance(double d_min_m, double d_max_m, double eta);

// d_min / d_max of the topology blended with eta.
VirtualDistance virtual_distance(const Topology& topology, double eta);

// Graph with edges wherever distance <= d_v; d_v must not be below d_min.
SwarmGraph build_vrg(const Topology& topology, double d_v_m);

}  // namespace uavheal
