#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uavheal/gcn.hpp"
#include "uavheal/meta.hpp"
#include "uavheal/rng.hpp"
#include "uavheal/swarm_graph.hpp"

namespace uavheal {

struct UedEvent {
  int time_step = 0;
  std::vector<int> destroyed;  // ascending uav indices
};

// Uniformly samples `count` indices whose removal disconnects the rest.
// Throws NoBreakingSet after 10000 rejections.
UedEvent sample_one_off_ued(const Topology& initial, std::size_t count, const LinkPredicate& linked, Rng& rng,
                            int time_step = 0);

// Disjoint destroyed sets of the given sizes, drawn together from the initial
// index set. times and counts must have equal length.
std::vector<UedEvent> sample_schedule(const Topology& initial, const std::vector<int>& times,
                                      const std::vector<int>& counts, Rng& rng);

// Event sizes given for a 200-node swarm, rescaled to swarm_size (at least 1).
std::vector<int> scale_counts(const std::vector<int>& counts_at_200, std::size_t swarm_size);

// One UAV's individual database. Slots follow the rows of the initial topology.
struct Idb {
  int owner = 0;
  std::vector<Vec3> believed;  // believed position per slot
  std::vector<int> iisr;       // believed-alive uav indices, ascending
};

struct SwarmState {
  std::vector<int> indices;  // uav index per slot
  std::vector<Vec3> truth;
  std::vector<char> alive;
  std::vector<Idb> idbs;
  int step = 0;

  // Every UAV alive and knowing every position.
  static SwarmState start(const Topology& initial);

  std::size_t slot_of(int index) const;
  std::vector<int> live_indices() const;
  Topology live_topology() const;
};

// Removes the destroyed UAVs. Each survivor linked to a destroyed UAV at this
// step drops it from its IISR. Throws ScheduleInvalid on a bad event.
void apply_ued(SwarmState& state, const UedEvent& event, const LinkPredicate& linked);

// Within each true cluster: share positions, intersect IISRs.
void broadcast_round(SwarmState& state, const LinkPredicate& linked);

// Overwrite every live database with ground truth.
void sync_global(SwarmState& state);

// Rows for the IISR members at their believed positions (owner at its true one).
Topology believed_topology(const SwarmState& state, std::size_t slot);

// Distance between the true live centroid and the believed IISR centroid.
double center_gap(const Idb& idb, const SwarmState& state);

// Position after one step of flight toward `target` at `speed`; lands exactly
// on the target when it is within reach.
Vec3 advance_toward(const Vec3& from, const Vec3& target, double speed);

// Runs and caches online GCN trainings. Initial parameters come from the store
// for the input size, or from random_layers_for(Q, seed, n) on a miss.
class GcnPlanner {
 public:
  GcnPlanner(GcnHyper hyper, const MetaParamStore* store, std::uint64_t seed, LinkPredicate linked);

  const OnlineResult& plan(const Topology& input);
  void clear_cache() { cache_.clear(); }

  const GcnHyper& hyper() const { return hyper_; }
  int store_misses() const { return store_misses_; }
  int trainings() const { return trainings_; }
  int fallbacks() const { return fallbacks_; }

 private:
  LayerBlocks initial_layers(std::size_t n);

  GcnHyper hyper_;
  const MetaParamStore* store_;
  std::uint64_t seed_;
  LinkPredicate linked_;
  std::map<std::pair<std::vector<int>, std::vector<double>>, OnlineResult> cache_;
  int store_misses_ = 0;
  int trainings_ = 0;
  int fallbacks_ = 0;
};

struct HealConfig {
  double speed_m_per_step = 1.0;
  int max_steps = 100000;
};

struct HealResult {
  Topology targets;
  int j_s = 0;                  // steps until the true graph is connected
  double l_max = 0.0;           // largest distance flown
  bool fallback = false;
  std::optional<int> k_star;
  std::vector<int> cluster_trace;        // C after each step
  std::vector<Positions> trajectory;     // positions at t = 0 .. j_s
};

// Plan once with the GCN, then fly every RUAV straight to its target until
// the true graph connects.
HealResult cr_mgc_heal(const Topology& post_ued, GcnPlanner& planner, const LinkPredicate& linked,
                       const HealConfig& cfg);

// Same flight rule with every RUAV heading for the post-event centroid.
HealResult cen_heal(const Topology& post_ued, const LinkPredicate& linked, const HealConfig& cfg);

// Flight with fixed targets; shared by both one-off policies.
HealResult fly_to_targets(const Topology& start, const Topology& targets, const LinkPredicate& linked,
                          const HealConfig& cfg);

struct PolicyMemory {
  int inertia_counter = 0;
  Vec3 target = Vec3::Zero();
};

struct Move {
  Vec3 velocity = Vec3::Zero();
  Vec3 next = Vec3::Zero();  // position after the step
  bool arrived = false;      // the step ended exactly on the target
};

struct PolicyConfig {
  double speed_m_per_step = 1.0;
  int inertia_steps = 10;  // kappa
};

// Per-UAV trajectory planning from its own database with an inertia counter.
Move cr_mgcm_policy(const SwarmState& state, std::size_t slot, const PolicyConfig& cfg, PolicyMemory& memory,
                    GcnPlanner& planner, const LinkPredicate& linked);

// Fly toward the centroid of the believed swarm until it looks connected.
Move cen_policy(const SwarmState& state, std::size_t slot, const PolicyConfig& cfg, const LinkPredicate& linked);

enum class PolicyKind { CrMgcm, CrMgcmGlob, Cen };
std::string to_string(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);

struct Scenario {
  Topology initial = Topology::sequential(Positions::Zero(1, 3));
  std::vector<UedEvent> schedule;
  int horizon = 450;
  double speed_m_per_step = 1.0;
  int inertia_steps = 10;
  std::uint64_t seed = 1;

  void validate(const LinkPredicate& linked) const;
};

struct TrajectoryRow {
  int t = 0;
  int index = 0;
  Vec3 position = Vec3::Zero();
};

struct GeneralMetrics {
  std::vector<int> cluster_trace;          // C_t, t = 1..T
  std::vector<int> alive_trace;            // live count, t = 1..T
  std::vector<double> center_gap_trace;    // max over live UAVs, t = 1..T
  std::vector<std::optional<int>> j_s;     // per event; empty when never healed
  double j_c = 0.0;
  double l_max = 0.0;
  int iisr_violations = 0;
  int speed_violations = 0;               // steps not of length v0, 0 or a landing
  int moves_after_heal = 0;               // steps with motion after a connected step and no event
  int eigen_checks = 0;
  int eigen_mismatches = 0;
  int store_misses = 0;
  int trainings = 0;
  int fallbacks = 0;
  std::vector<TrajectoryRow> trajectory;   // filled when requested
};

struct GeneralOptions {
  bool record_trajectory = false;
  int eigen_spot_checks = 10;
};

GeneralMetrics run_general(const Scenario& scenario, PolicyKind kind, const GcnHyper& hyper,
                           const MetaParamStore* store, const LinkPredicate& linked,
                           const GeneralOptions& options = {});

}  // namespace uavheal
