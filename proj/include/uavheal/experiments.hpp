#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavheal/channel.hpp"
#include "uavheal/gcn.hpp"
#include "uavheal/meta.hpp"
#include "uavheal/parallel.hpp"
#include "uavheal/scene.hpp"
#include "uavheal/sim.hpp"

namespace uavheal {

// Options shared by every experiment. Anything not set in a config file keeps
// the desk-scale default below.
struct ExperimentConfig {
  int swarm_size = 50;  // N
  int trials = 20;
  std::uint64_t seed = 1;
  int support_size = 200;  // U0
  GcnHyper hyper;
  LinkModel link = LinkModel::threshold(120.0);

  // Destroyed counts for one-off experiments; empty means 10%, 20%, ..., 90% of N.
  std::vector<int> destroy_counts;
  // Destroyed count for the eta / epsilon sweeps; 0 means N / 2.
  int sweep_destroy = 0;
  std::vector<double> c_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> eta_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> eps_grid = {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.8, 2.0};

  // General-event simulation.
  int horizon = 450;
  double speed_m_per_step = 1.0;
  int inertia_steps = 10;
  std::vector<int> event_times = {10, 90, 100, 131, 230};
  std::vector<int> event_counts_at_200 = {50, 8, 9, 7, 20};
  std::vector<std::string> policies = {"cr-mgcm", "cr-mgcm-glob", "cen"};
  bool record_trajectory = false;

  int threads = 0;  // 0: hardware concurrency

  void validate() const;
  std::vector<int> resolved_destroy_counts() const;
  int resolved_sweep_destroy() const;
  SceneBounds scene() const { return scene_for_swarm(static_cast<std::size_t>(swarm_size)); }
};

// Full-scale values: N = 200, U0 = 400, 100 trials.
void apply_full_scale(ExperimentConfig& cfg);

// Keys absent from `j` leave `cfg` untouched. Throws Config on bad values.
void merge_config(ExperimentConfig& cfg, const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
nlohmann::json link_to_json(const LinkModel& link);

struct BreakingCase {
  Topology initial;
  UedEvent event;
  Topology post;  // initial without the destroyed uavs
};

// Connected swarm of N plus a destroyed set of `count` that splits it. Draws a
// fresh swarm when a swarm has no breaking set of that size.
BreakingCase sample_breaking_case(int swarm_size, int count, const SceneBounds& scene, const LinkPredicate& linked,
                                  Rng& rng);

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b);

// name -> file contents
using Artifacts = std::map<std::string, std::string>;

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for fewer than two values
  int n = 0;
};
Summary summarize(const std::vector<double>& values);

// Cluster count of the graph "distance <= radius + c (d_min - radius)".
struct SweepCRow {
  int destroyed = 0;
  double c = 0.0;
  Summary clusters;
};
struct SweepCResult {
  std::vector<SweepCRow> rows;
  bool c1_all_connected = true;   // every sample at c = 1 has one cluster
  bool c0_all_split = true;       // every sample at c = 0 has more than one
};
SweepCResult sweep_c(const ExperimentConfig& cfg);
Artifacts render(const SweepCResult& r);

// k* and displacement of the plain contraction over a grid of eta or epsilon.
struct SweepRow {
  double value = 0.0;
  Summary k_star;  // converged runs only
  Summary l_max;   // converged runs only
  int converged = 0;
  int diverged = 0;   // gco_iterate gave up: blow-up or iteration cap
  int expansive = 0;  // contraction factor above 1
};
struct SweepResult {
  std::string parameter;  // "eta" or "epsilon"
  std::vector<SweepRow> rows;
};
SweepResult sweep_eta(const ExperimentConfig& cfg);
SweepResult sweep_eps(const ExperimentConfig& cfg);
Artifacts render(const SweepResult& r);

struct OneOffTrial {
  int destroyed = 0;
  int trial = 0;
  HealResult gcn;
  HealResult cen;
  int store_misses = 0;
};
struct OneOffSize {
  int destroyed = 0;
  Summary gcn_js;
  Summary cen_js;
  int gcn_connected = 0;  // runs ending with C = 1
  int cen_connected = 0;
  int fallbacks = 0;
};
struct OneOffResult {
  std::vector<OneOffTrial> trials;
  std::vector<OneOffSize> sizes;
  int store_misses = 0;
};
OneOffResult heal_oneoff(const ExperimentConfig& cfg, const MetaParamStore* store);
Artifacts render(const OneOffResult& r, bool with_trajectory);

struct GeneralRun {
  std::uint64_t seed = 0;
  std::string policy;
  GeneralMetrics metrics;
};
struct GeneralResult {
  std::vector<GeneralRun> runs;                 // seed-major, policy order of the config
  std::map<std::string, Summary> j_c;           // per policy
  std::optional<double> ratio;                  // mean J_c(cr-mgcm) / mean J_c(cr-mgcm-glob)
  int iisr_violations = 0;
  int speed_violations = 0;
  int moves_after_heal = 0;
  int eigen_mismatches = 0;
  int store_misses = 0;
};
// Scenario per seed: a connected swarm of N and disjoint destroyed sets at
// event_times with event_counts_at_200 rescaled to N.
Scenario demo_scenario(const ExperimentConfig& cfg, std::uint64_t seed);
GeneralResult sim_general(const ExperimentConfig& cfg, const MetaParamStore* store,
                          const std::optional<Scenario>& fixed = std::nullopt);
Artifacts render(const GeneralResult& r, bool with_trajectory);

struct BenchResult {
  double gcn_median_ms = 0.0;
  double cen_median_ms = 0.0;
  int trials = 0;
  int fallbacks = 0;
  int store_misses = 0;
};
BenchResult bench(const ExperimentConfig& cfg, const MetaParamStore* store);
Artifacts render(const BenchResult& r);

struct MetaTrainResult {
  MetaParamStore store;
};
MetaTrainResult run_meta_train(const ExperimentConfig& cfg, const std::function<void(int)>& progress = {});
Artifacts render(const MetaTrainResult& r);

// Fixed-width decimal used in every CSV so output bytes never depend on the
// stream state.
std::string fmt(double v);

}  // namespace uavheal
