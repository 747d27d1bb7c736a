#include "uavheal/meta.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "uavheal/errors.hpp"
#include "uavheal/parallel.hpp"

namespace uavheal {

using nlohmann::json;

Topology gen_disconnected_topology(std::size_t n, const SceneBounds& scene, const LinkPredicate& linked, Rng& rng) {
  if (n < 2) throw Error(ErrorCode::Domain, "a disconnected topology needs at least two nodes");
  scene.validate();
  Positions p(static_cast<Eigen::Index>(n), 3);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (Eigen::Index j = 0; j < p.rows(); ++j) p.row(j) = scene.sample(rng).transpose();
    Topology t = Topology::sequential(p);
    if (!is_connected(t, linked)) return t;
  }
  throw Error(ErrorCode::GenerationInfeasible, "1000 consecutive samples formed a connected graph");
}

MetaTask gen_meta_task(std::size_t n, int support_size, const SceneBounds& scene, const LinkPredicate& linked,
                       Rng& rng) {
  if (support_size < 1) throw Error(ErrorCode::Domain, "support size must be at least 1");
  MetaTask task{n, {}, {}};
  task.support.reserve(static_cast<std::size_t>(support_size));
  task.query.reserve(static_cast<std::size_t>(support_size));
  for (int u = 0; u < support_size; ++u) task.support.push_back(gen_disconnected_topology(n, scene, linked, rng));
  for (int u = 0; u < support_size; ++u) task.query.push_back(gen_disconnected_topology(n, scene, linked, rng));
  return task;
}

namespace {

void require_finite(const LayerBlocks& blocks, const LayerBlocks& last) {
  for (const auto& b : blocks)
    if (!b.allFinite()) throw TrainingDiverged("meta episode produced non-finite values", last);
}

}  // namespace

MetaEpisode meta_episode(const GcnParams& prev, const Topology& support, const Topology& query,
                         const LinkPredicate& linked) {
  prev.validate();
  if (support.size() != query.size())
    throw Error(ErrorCode::ContractViolation, "support and query topologies differ in size");

  const auto& hyper = prev.hyper;
  const GcnProblem y = prepare_problem(support, hyper.eta, hyper.epsilon);
  const GcnProblem z = prepare_problem(query, hyper.eta, hyper.epsilon);

  const LossAndGradient inner = loss_and_gradient(prev, y, linked);
  require_finite(inner.gradient, prev.layers);
  GcnParams adapted{descend(prev.layers, inner.gradient, hyper), hyper};
  require_finite(adapted.layers, prev.layers);

  const LossAndGradient outer = loss_and_gradient(adapted, z, linked);
  require_finite(outer.gradient, prev.layers);
  MetaEpisode ep{descend(prev.layers, outer.gradient, hyper), inner.output.loss_value, outer.output.loss_value};
  require_finite(ep.next, prev.layers);
  if (!std::isfinite(ep.support_loss) || !std::isfinite(ep.query_loss))
    throw TrainingDiverged("meta episode loss is not finite", prev.layers);
  return ep;
}

MetaTrained meta_train(const MetaConfig& cfg, const MetaTask& task, const LayerBlocks& init,
                       const LinkPredicate& linked) {
  cfg.hyper.validate();
  if (task.support.empty() || task.support.size() != task.query.size())
    throw Error(ErrorCode::ContractViolation, "meta task needs equal nonempty support and query sets");
  GcnParams gamma{init, cfg.hyper};
  MetaTrained out{init, {}};
  out.loss_trace.reserve(task.support.size());
  for (std::size_t u = 0; u < task.support.size(); ++u) {
    MetaEpisode ep = meta_episode(gamma, task.support[u], task.query[u], linked);
    out.loss_trace.push_back(ep.query_loss);
    gamma.layers = std::move(ep.next);
  }
  out.params = gamma.layers;
  return out;
}

MetaTrained meta_train(std::size_t n, const MetaConfig& cfg, const LinkPredicate& linked) {
  if (n < 2) throw Error(ErrorCode::Domain, "meta training needs n >= 2");
  if (cfg.support_size < 1) throw Error(ErrorCode::Domain, "U0 must be at least 1");
  Rng rng(mix_seed(cfg.seed, 0x7A5C0000ULL + n));
  const MetaTask task = gen_meta_task(n, cfg.support_size, cfg.scene, linked, rng);
  return meta_train(cfg, task, random_layers_for(cfg.hyper.layers, cfg.seed, n), linked);
}

LayerBlocks pretrain_pooled(const MetaConfig& cfg, const MetaTask& task, const LayerBlocks& init,
                            const LinkPredicate& linked) {
  cfg.hyper.validate();
  GcnParams params{init, cfg.hyper};
  for (const auto& y : task.support) {
    const GcnProblem problem = prepare_problem(y, cfg.hyper.eta, cfg.hyper.epsilon);
    const LossAndGradient lg = loss_and_gradient(params, problem, linked);
    LayerBlocks next = descend(params.layers, lg.gradient, cfg.hyper);
    require_finite(next, params.layers);
    params.layers = std::move(next);
  }
  return params.layers;
}

const LayerBlocks& MetaParamStore::lookup(std::size_t n) const {
  const auto it = params.find(static_cast<int>(n));
  if (it == params.end()) throw Error(ErrorCode::StoreMiss, "no meta parameters for n = " + std::to_string(n));
  return it->second;
}

MetaParamStore meta_train_all(int swarm_size, const MetaConfig& cfg, const LinkPredicate& linked,
                              const std::string& link_descriptor, const std::function<void(int)>& progress) {
  if (swarm_size < 2) throw Error(ErrorCode::Domain, "meta_train_all needs N >= 2");
  cfg.hyper.validate();
  cfg.scene.validate();
  MetaParamStore store;
  store.swarm_size = swarm_size;
  store.support_size = cfg.support_size;
  store.hyper = cfg.hyper;
  store.scene = cfg.scene;
  store.link_descriptor = link_descriptor;
  store.seed = cfg.seed;
  std::vector<MetaTrained> trained(static_cast<std::size_t>(swarm_size - 1));
  std::mutex progress_lock;
  parallel_for(swarm_size - 1, cfg.threads, [&](int k) {
    const int n = k + 2;
    trained[static_cast<std::size_t>(k)] = meta_train(static_cast<std::size_t>(n), cfg, linked);
    if (progress) {
      std::lock_guard<std::mutex> g(progress_lock);
      progress(n);
    }
  });
  for (int n = 2; n <= swarm_size; ++n) {
    MetaTrained& t = trained[static_cast<std::size_t>(n - 2)];
    store.params.emplace(n, std::move(t.params));
    store.loss_traces.emplace(n, std::move(t.loss_trace));
  }
  return store;
}

std::string exact_decimal(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::StoreFormat, "cannot serialise a non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw Error(ErrorCode::StoreFormat, "number formatting failed");
  return std::string(buf, res.ptr);
}

double parse_exact_decimal(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error(ErrorCode::StoreFormat, "bad decimal '" + s + "'");
  return v;
}

namespace {

json vec_json(const Vec3& v) { return json::array({exact_decimal(v[0]), exact_decimal(v[1]), exact_decimal(v[2])}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::StoreFormat, "expected a 3-vector");
  return Vec3(parse_exact_decimal(j[0].get<std::string>()), parse_exact_decimal(j[1].get<std::string>()),
              parse_exact_decimal(j[2].get<std::string>()));
}

}  // namespace

std::string store_to_json(const MetaParamStore& store) {
  json meta;
  meta["N"] = store.swarm_size;
  meta["U0"] = store.support_size;
  meta["Q"] = store.hyper.layers;
  meta["eta"] = exact_decimal(store.hyper.eta);
  meta["epsilon"] = exact_decimal(store.hyper.epsilon);
  meta["tau"] = exact_decimal(store.hyper.tau);
  meta["learning_rate"] = exact_decimal(store.hyper.learning_rate);
  meta["online_episodes"] = store.hyper.online_episodes;
  meta["coordinate_scale_m"] = exact_decimal(store.hyper.coordinate_scale_m);
  meta["gco_max_iterations"] = store.hyper.gco_max_iterations;
  meta["scene_lo"] = vec_json(store.scene.lo);
  meta["scene_hi"] = vec_json(store.scene.hi);
  meta["link"] = store.link_descriptor;
  meta["seed"] = store.seed;

  json entries = json::array();
  for (const auto& [n, blocks] : store.params) {
    json layers = json::array();
    for (const auto& b : blocks) {
      json rows = json::array();
      for (int r = 0; r < 3; ++r)
        rows.push_back(json::array({exact_decimal(b(r, 0)), exact_decimal(b(r, 1)), exact_decimal(b(r, 2))}));
      layers.push_back(std::move(rows));
    }
    entries.push_back(json{{"n", n}, {"layers", std::move(layers)}});
  }
  json doc{{"format", "uavheal-meta-store"}, {"version", MetaParamStore::kFormatVersion},
           {"metadata", std::move(meta)}, {"params", std::move(entries)}};
  return doc.dump(1) + "\n";
}

MetaParamStore store_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::StoreFormat, std::string("store is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "uavheal-meta-store")
      throw Error(ErrorCode::StoreFormat, "not a meta parameter store");
    if (doc.at("version").get<int>() != MetaParamStore::kFormatVersion)
      throw Error(ErrorCode::StoreFormat, "unsupported store version");
    const json& meta = doc.at("metadata");
    MetaParamStore s;
    s.swarm_size = meta.at("N").get<int>();
    s.support_size = meta.at("U0").get<int>();
    s.hyper.layers = meta.at("Q").get<int>();
    s.hyper.eta = parse_exact_decimal(meta.at("eta").get<std::string>());
    s.hyper.epsilon = parse_exact_decimal(meta.at("epsilon").get<std::string>());
    s.hyper.tau = parse_exact_decimal(meta.at("tau").get<std::string>());
    s.hyper.learning_rate = parse_exact_decimal(meta.at("learning_rate").get<std::string>());
    s.hyper.online_episodes = meta.at("online_episodes").get<int>();
    s.hyper.coordinate_scale_m = parse_exact_decimal(meta.at("coordinate_scale_m").get<std::string>());
    s.hyper.gco_max_iterations = meta.at("gco_max_iterations").get<int>();
    s.scene.lo = vec_from(meta.at("scene_lo"));
    s.scene.hi = vec_from(meta.at("scene_hi"));
    s.link_descriptor = meta.at("link").get<std::string>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    s.hyper.validate();

    for (const json& e : doc.at("params")) {
      const int n = e.at("n").get<int>();
      if (n < 2 || n > s.swarm_size) throw Error(ErrorCode::StoreFormat, "store key outside 2..N");
      const json& layers = e.at("layers");
      if (static_cast<int>(layers.size()) != s.hyper.layers)
        throw Error(ErrorCode::StoreFormat, "layer count differs from Q");
      LayerBlocks blocks;
      for (const json& rows : layers) {
        if (rows.size() != 3) throw Error(ErrorCode::StoreFormat, "layer block is not 3x3");
        Eigen::Matrix3d b;
        for (int r = 0; r < 3; ++r) b.row(r) = vec_from(rows[static_cast<std::size_t>(r)]).transpose();
        blocks.push_back(b);
      }
      if (!s.params.emplace(n, std::move(blocks)).second) throw Error(ErrorCode::StoreFormat, "duplicate store key");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::StoreFormat, std::string("malformed store: ") + e.what());
  }
}

void save_store(const MetaParamStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << store_to_json(store);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

MetaParamStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return store_from_json(ss.str());
}

}  // namespace uavheal
