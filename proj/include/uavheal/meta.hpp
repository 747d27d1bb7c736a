#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "uavheal/gcn.hpp"
#include "uavheal/rng.hpp"
#include "uavheal/scene.hpp"

namespace uavheal {

// n uniform points in the scene whose graph under `linked` is not connected.
// Throws GenerationInfeasible after 1000 consecutive rejections.
Topology gen_disconnected_topology(std::size_t n, const SceneBounds& scene, const LinkPredicate& linked, Rng& rng);

struct MetaTask {
  std::size_t n = 0;
  std::vector<Topology> support;
  std::vector<Topology> query;
};

// Draws U0 support then U0 query topologies of size n.
MetaTask gen_meta_task(std::size_t n, int support_size, const SceneBounds& scene, const LinkPredicate& linked, Rng& rng);

struct MetaEpisode {
  LayerBlocks next;
  double support_loss = 0.0;  // L(Gamma_prev, Y)
  double query_loss = 0.0;    // L(Pi, Z) at the adapted parameters
};

// One support step to get the adapted parameters, then the query gradient at
// the adapted parameters applied to the previous ones (first order).
MetaEpisode meta_episode(const GcnParams& prev, const Topology& support, const Topology& query,
                         const LinkPredicate& linked);

struct MetaConfig {
  GcnHyper hyper;
  int support_size = 200;  // U0
  SceneBounds scene;
  std::uint64_t seed = 1;
  int threads = 1;  // workers for meta_train_all; results do not depend on it
};

struct MetaTrained {
  LayerBlocks params;
  std::vector<double> loss_trace;  // query loss per episode
};

MetaTrained meta_train(const MetaConfig& cfg, const MetaTask& task, const LayerBlocks& init,
                       const LinkPredicate& linked);

// Generates the task from rng and starts from random_layers_for(Q, cfg.seed, n).
MetaTrained meta_train(std::size_t n, const MetaConfig& cfg, const LinkPredicate& linked);

// Conventional pretraining: plain gradient steps over the support set only.
LayerBlocks pretrain_pooled(const MetaConfig& cfg, const MetaTask& task, const LayerBlocks& init,
                            const LinkPredicate& linked);

struct MetaParamStore {
  static constexpr int kFormatVersion = 1;

  int swarm_size = 0;  // N
  int support_size = 0;
  GcnHyper hyper;
  SceneBounds scene;
  std::string link_descriptor;
  std::uint64_t seed = 0;
  std::map<int, LayerBlocks> params;
  std::map<int, std::vector<double>> loss_traces;  // not persisted

  // Throws StoreMiss when n has no entry.
  const LayerBlocks& lookup(std::size_t n) const;
  bool contains(std::size_t n) const { return params.count(static_cast<int>(n)) != 0; }
};

// Trains every n in 2..N. `progress` is called after each n when set.
MetaParamStore meta_train_all(int swarm_size, const MetaConfig& cfg, const LinkPredicate& linked,
                              const std::string& link_descriptor,
                              const std::function<void(int)>& progress = {});

std::string store_to_json(const MetaParamStore& store);
MetaParamStore store_from_json(const std::string& text);

void save_store(const MetaParamStore& store, const std::filesystem::path& path);
MetaParamStore load_store(const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `v`.
std::string exact_decimal(double v);
double parse_exact_decimal(const std::string& s);

}  // namespace uavheal
