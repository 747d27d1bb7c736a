#include "uavheal/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "uavheal/errors.hpp"
#include "uavheal/topology_io.hpp"
#include "uavheal/vrg.hpp"

namespace uavheal {

using nlohmann::json;

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::Config, what); };
  if (swarm_size < 3) bad("swarm_size must be at least 3");
  if (trials < 1) bad("trials must be at least 1");
  if (support_size < 1) bad("support_size (U0) must be at least 1");
  try {
    hyper.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  for (int d : destroy_counts)
    if (d < 1 || d > swarm_size - 2) bad("destroy counts must lie in 1..N-2");
  if (sweep_destroy < 0 || sweep_destroy > swarm_size - 2) bad("sweep_destroy must lie in 0..N-2");
  for (double c : c_grid)
    if (!(c >= 0.0 && c <= 1.0)) bad("c grid values must lie in [0, 1]");
  for (double e : eta_grid)
    if (!(e >= 0.0 && e <= 1.0)) bad("eta grid values must lie in [0, 1]");
  for (double e : eps_grid)
    if (!(e > 0.0 && std::isfinite(e))) bad("epsilon grid values must be positive");
  if (horizon < 1) bad("horizon must be at least 1");
  if (!(speed_m_per_step > 0.0)) bad("speed must be positive");
  if (inertia_steps < 1) bad("inertia must be at least 1");
  if (event_times.size() != event_counts_at_200.size()) bad("event_times and event_counts_at_200 differ in length");
  for (int t : event_times)
    if (t < 0 || t > horizon) bad("event times must lie in [0, horizon]");
  for (int c : event_counts_at_200)
    if (c < 1) bad("event counts must be positive");
  for (const auto& p : policies) {
    try {
      policy_from_string(p);
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  if (threads < 0) bad("threads must be nonnegative");
}

std::vector<int> ExperimentConfig::resolved_destroy_counts() const {
  if (!destroy_counts.empty()) return destroy_counts;
  std::vector<int> out;
  for (int k = 1; k <= 9; ++k) {
    const int d = static_cast<int>(std::lround(swarm_size * k / 10.0));
    out.push_back(std::clamp(d, 1, swarm_size - 2));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int ExperimentConfig::resolved_sweep_destroy() const { return sweep_destroy > 0 ? sweep_destroy : swarm_size / 2; }

void apply_full_scale(ExperimentConfig& cfg) {
  cfg.swarm_size = 200;
  cfg.support_size = 400;
  cfg.trials = 100;
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void merge_config(ExperimentConfig& cfg, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  static const std::vector<std::string> known = {
      "swarm_size", "trials", "seed", "support_size", "hyper", "link", "destroy_counts", "sweep_destroy",
      "c_grid", "eta_grid", "eps_grid", "horizon", "speed", "inertia", "event_times", "event_counts_at_200",
      "policies", "record_trajectory", "threads", "scenario", "scenario_file"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw Error(ErrorCode::Config, "unknown config key '" + it.key() + "'");
  take(j, "swarm_size", cfg.swarm_size);
  take(j, "trials", cfg.trials);
  take(j, "seed", cfg.seed);
  take(j, "support_size", cfg.support_size);
  if (j.contains("hyper")) {
    const json& h = j.at("hyper");
    if (!h.is_object()) throw Error(ErrorCode::Config, "hyper must be an object");
    take(h, "layers", cfg.hyper.layers);
    take(h, "epsilon", cfg.hyper.epsilon);
    take(h, "eta", cfg.hyper.eta);
    take(h, "tau", cfg.hyper.tau);
    take(h, "learning_rate", cfg.hyper.learning_rate);
    take(h, "online_episodes", cfg.hyper.online_episodes);
    take(h, "coordinate_scale_m", cfg.hyper.coordinate_scale_m);
    take(h, "gco_max_iterations", cfg.hyper.gco_max_iterations);
  }
  if (j.contains("link")) cfg.link = link_from_json(j.at("link"));
  take(j, "destroy_counts", cfg.destroy_counts);
  take(j, "sweep_destroy", cfg.sweep_destroy);
  take(j, "c_grid", cfg.c_grid);
  take(j, "eta_grid", cfg.eta_grid);
  take(j, "eps_grid", cfg.eps_grid);
  take(j, "horizon", cfg.horizon);
  take(j, "speed", cfg.speed_m_per_step);
  take(j, "inertia", cfg.inertia_steps);
  take(j, "event_times", cfg.event_times);
  take(j, "event_counts_at_200", cfg.event_counts_at_200);
  take(j, "policies", cfg.policies);
  take(j, "record_trajectory", cfg.record_trajectory);
  take(j, "threads", cfg.threads);
}

json link_to_json(const LinkModel& link) {
  if (link.is_threshold()) return json{{"override_m", link.threshold_m()}};
  const ChannelParams& p = link.params();
  return json{{"physical", true},
              {"transmit_power_dBm", p.transmit_power_dBm},
              {"receive_threshold_dBm", p.receive_threshold_dBm},
              {"antenna_gain_rx_dBi", p.antenna_gain_rx_dBi},
              {"antenna_gain_tx_dBi", p.antenna_gain_tx_dBi},
              {"path_loss_exponent", p.path_loss_exponent},
              {"carrier_freq_Hz", p.carrier_freq_Hz},
              {"light_speed_m_s", p.light_speed_m_s},
              {"scatter_strength", p.scatter_strength},
              {"rice_factor", p.rice_factor},
              {"small_scale_enabled", p.small_scale_enabled}};
}

json config_to_json(const ExperimentConfig& cfg) {
  const GcnHyper& h = cfg.hyper;
  return json{{"swarm_size", cfg.swarm_size},
              {"trials", cfg.trials},
              {"seed", cfg.seed},
              {"support_size", cfg.support_size},
              {"hyper",
               {{"layers", h.layers},
                {"epsilon", h.epsilon},
                {"eta", h.eta},
                {"tau", h.tau},
                {"learning_rate", h.learning_rate},
                {"online_episodes", h.online_episodes},
                {"coordinate_scale_m", h.coordinate_scale_m},
                {"gco_max_iterations", h.gco_max_iterations}}},
              {"link", link_to_json(cfg.link)},
              {"destroy_counts", cfg.resolved_destroy_counts()},
              {"sweep_destroy", cfg.resolved_sweep_destroy()},
              {"c_grid", cfg.c_grid},
              {"eta_grid", cfg.eta_grid},
              {"eps_grid", cfg.eps_grid},
              {"horizon", cfg.horizon},
              {"speed", cfg.speed_m_per_step},
              {"inertia", cfg.inertia_steps},
              {"event_times", cfg.event_times},
              {"event_counts_at_200", cfg.event_counts_at_200},
              {"policies", cfg.policies},
              {"record_trajectory", cfg.record_trajectory},
              {"threads", cfg.threads}};
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(seed, tag), a), b);
}

BreakingCase sample_breaking_case(int swarm_size, int count, const SceneBounds& scene, const LinkPredicate& linked,
                                  Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Topology initial = generate_connected_topology(static_cast<std::size_t>(swarm_size), scene, linked, rng);
    try {
      UedEvent ev = sample_one_off_ued(initial, static_cast<std::size_t>(count), linked, rng);
      Topology post = initial.without(ev.destroyed);
      return BreakingCase{std::move(initial), std::move(ev), std::move(post)};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoBreakingSet) throw;
    }
  }
  throw Error(ErrorCode::NoBreakingSet, "100 swarms had no breaking set of size " + std::to_string(count));
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (s.n - 1));
  }
  return s;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

constexpr std::uint64_t kTagSweepC = 0x5C;
constexpr std::uint64_t kTagSweep = 0x5E;
constexpr std::uint64_t kTagHeal = 0x4E;
constexpr std::uint64_t kTagGeneral = 0x6E;
constexpr std::uint64_t kTagBench = 0xBE;

LinkPredicate predicate(const LinkModel& link) {
  return [link](double d) { return link(d); };
}

json summary_json(const Summary& s) {
  return json{{"mean", s.mean}, {"stddev", s.stddev}, {"n", s.n}, {"ci95", s.n > 1 ? 1.96 * s.stddev / std::sqrt(s.n) : 0.0}};
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace

SweepCResult sweep_c(const ExperimentConfig& cfg) {
  cfg.validate();
  const LinkPredicate linked = predicate(cfg.link);
  const double radius = cfg.link.radius_m();
  const auto sizes = cfg.resolved_destroy_counts();
  const int jobs = static_cast<int>(sizes.size()) * cfg.trials;
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(jobs));
  parallel_for(jobs, cfg.threads, [&](int job) {
    const int d = sizes[static_cast<std::size_t>(job / cfg.trials)];
    const int t = job % cfg.trials;
    Rng rng(trial_seed(cfg.seed, kTagSweepC, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
    const BreakingCase bc = sample_breaking_case(cfg.swarm_size, d, cfg.scene(), linked, rng);
    const double d_min = min_virtual_distance(bc.post);
    auto& out = counts[static_cast<std::size_t>(job)];
    for (double c : cfg.c_grid) {
      const double d_v = (1.0 - c) * radius + c * d_min;
      out.push_back(cluster_count(bc.post, [d_v](double l) { return l <= d_v; }));
    }
  });

  SweepCResult r;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    for (std::size_t g = 0; g < cfg.c_grid.size(); ++g) {
      std::vector<double> v;
      for (int t = 0; t < cfg.trials; ++t) {
        const int k = counts[s * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)][g];
        v.push_back(k);
        if (cfg.c_grid[g] == 1.0 && k != 1) r.c1_all_connected = false;
        if (cfg.c_grid[g] == 0.0 && k <= 1) r.c0_all_split = false;
      }
      r.rows.push_back(SweepCRow{sizes[s], cfg.c_grid[g], summarize(v)});
    }
  }
  return r;
}

Artifacts render(const SweepCResult& r) {
  std::string csv = "destroyed,c,mean_clusters,stddev,n\n";
  for (const auto& row : r.rows)
    csv += std::to_string(row.destroyed) + "," + fmt(row.c) + "," + fmt(row.clusters.mean) + "," +
           fmt(row.clusters.stddev) + "," + std::to_string(row.clusters.n) + "\n";
  json summary{{"c1_all_connected", r.c1_all_connected}, {"c0_all_split", r.c0_all_split}};
  return {{"sweep_c.csv", csv}, {"sweep_c.json", dump(summary)}};
}

namespace {

struct SweepCell {
  bool converged = false;
  bool expansive = false;
  int k_star = 0;
  double l_max = 0.0;
};

SweepResult run_sweep(const ExperimentConfig& cfg, bool over_eta) {
  cfg.validate();
  const LinkPredicate linked = predicate(cfg.link);
  const int d = cfg.resolved_sweep_destroy();
  const auto& grid = over_eta ? cfg.eta_grid : cfg.eps_grid;
  std::vector<std::vector<SweepCell>> cells(static_cast<std::size_t>(cfg.trials));
  parallel_for(cfg.trials, cfg.threads, [&](int t) {
    Rng rng(trial_seed(cfg.seed, kTagSweep, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t)));
    const BreakingCase bc = sample_breaking_case(cfg.swarm_size, d, cfg.scene(), linked, rng);
    auto& out = cells[static_cast<std::size_t>(t)];
    for (double value : grid) {
      const double eta = over_eta ? value : cfg.hyper.eta;
      const double eps = over_eta ? cfg.hyper.epsilon : value;
      const SwarmGraph vrg = build_vrg(bc.post, virtual_distance(bc.post, eta).d_v_m);
      SweepCell cell;
      cell.expansive = gco_contraction_factor(vrg, eps) > 1.0;
      try {
        const GcoResult g = gco_iterate(bc.post, vrg, GcoConfig{eps, cfg.hyper.gco_max_iterations}, linked);
        cell.converged = true;
        cell.k_star = g.k_star;
        cell.l_max = max_displacement(g.topology, bc.post).first;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonConvergence) throw;
      }
      out.push_back(cell);
    }
  });

  SweepResult r;
  r.parameter = over_eta ? "eta" : "epsilon";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SweepRow row;
    row.value = grid[g];
    std::vector<double> ks, ls;
    for (const auto& trial : cells) {
      if (trial[g].expansive) ++row.expansive;
      if (trial[g].converged) {
        ++row.converged;
        ks.push_back(trial[g].k_star);
        ls.push_back(trial[g].l_max);
      } else {
        ++row.diverged;
      }
    }
    row.k_star = summarize(ks);
    row.l_max = summarize(ls);
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace

SweepResult sweep_eta(const ExperimentConfig& cfg) { return run_sweep(cfg, true); }
SweepResult sweep_eps(const ExperimentConfig& cfg) { return run_sweep(cfg, false); }

Artifacts render(const SweepResult& r) {
  std::string csv = r.parameter + ",mean_k_star,stddev_k_star,mean_l_max,stddev_l_max,converged,diverged,expansive\n";
  for (const auto& row : r.rows)
    csv += fmt(row.value) + "," + fmt(row.k_star.mean) + "," + fmt(row.k_star.stddev) + "," + fmt(row.l_max.mean) +
           "," + fmt(row.l_max.stddev) + "," + std::to_string(row.converged) + "," + std::to_string(row.diverged) + "," +
           std::to_string(row.expansive) + "\n";
  return {{"sweep_" + std::string(r.parameter == "eta" ? "eta" : "eps") + ".csv", csv}};
}

OneOffResult heal_oneoff(const ExperimentConfig& cfg, const MetaParamStore* store) {
  cfg.validate();
  const LinkPredicate linked = predicate(cfg.link);
  const auto sizes = cfg.resolved_destroy_counts();
  const int jobs = static_cast<int>(sizes.size()) * cfg.trials;
  const HealConfig heal{cfg.speed_m_per_step, HealConfig{}.max_steps};
  std::vector<std::optional<OneOffTrial>> slots(static_cast<std::size_t>(jobs));
  parallel_for(jobs, cfg.threads, [&](int job) {
    const int d = sizes[static_cast<std::size_t>(job / cfg.trials)];
    const int t = job % cfg.trials;
    const std::uint64_t s = trial_seed(cfg.seed, kTagHeal, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(t));
    Rng rng(s);
    const BreakingCase bc = sample_breaking_case(cfg.swarm_size, d, cfg.scene(), linked, rng);
    GcnPlanner planner(cfg.hyper, store, s, linked);
    HealResult gcn = cr_mgc_heal(bc.post, planner, linked, heal);
    HealResult cen = cen_heal(bc.post, linked, heal);
    slots[static_cast<std::size_t>(job)] = OneOffTrial{d, t, std::move(gcn), std::move(cen), planner.store_misses()};
  });
  std::vector<OneOffTrial> trials;
  for (auto& s : slots) trials.push_back(std::move(*s));

  OneOffResult r;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    OneOffSize size;
    size.destroyed = sizes[s];
    std::vector<double> g, c;
    for (int t = 0; t < cfg.trials; ++t) {
      const OneOffTrial& tr = trials[s * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)];
      g.push_back(tr.gcn.j_s);
      c.push_back(tr.cen.j_s);
      if (!tr.gcn.cluster_trace.empty() && tr.gcn.cluster_trace.back() == 1) ++size.gcn_connected;
      if (!tr.cen.cluster_trace.empty() && tr.cen.cluster_trace.back() == 1) ++size.cen_connected;
      if (tr.gcn.fallback) ++size.fallbacks;
      r.store_misses += tr.store_misses;
    }
    size.gcn_js = summarize(g);
    size.cen_js = summarize(c);
    r.sizes.push_back(size);
  }
  r.trials = std::move(trials);
  return r;
}

namespace {

void trajectory_rows(std::string& csv, const std::string& prefix, const HealResult& h, const Topology& start) {
  for (std::size_t t = 0; t < h.trajectory.size(); ++t)
    for (std::size_t r = 0; r < start.size(); ++r) {
      const auto p = h.trajectory[t].row(static_cast<Eigen::Index>(r));
      csv += prefix + std::to_string(t) + "," + std::to_string(start.indices()[r]) + "," + fmt(p(0)) + "," +
             fmt(p(1)) + "," + fmt(p(2)) + "\n";
    }
}

}  // namespace

Artifacts render(const OneOffResult& r, bool with_trajectory) {
  json sizes = json::array();
  for (const auto& s : r.sizes)
    sizes.push_back({{"destroyed", s.destroyed},
                     {"cr_mgc_j_s", summary_json(s.gcn_js)},
                     {"cen_j_s", summary_json(s.cen_js)},
                     {"cr_mgc_connected", s.gcn_connected},
                     {"cen_connected", s.cen_connected},
                     {"fallbacks", s.fallbacks}});
  json trials = json::array();
  std::string clusters = "destroyed,trial,policy,t,C_t\n";
  std::string traj = "destroyed,trial,policy,t,index,x,y,z\n";
  for (const auto& t : r.trials) {
    trials.push_back({{"destroyed", t.destroyed},
                      {"trial", t.trial},
                      {"cr_mgc_j_s", t.gcn.j_s},
                      {"cen_j_s", t.cen.j_s},
                      {"cr_mgc_l_max", t.gcn.l_max},
                      {"cen_l_max", t.cen.l_max},
                      {"fallback", t.gcn.fallback},
                      {"k_star", t.gcn.k_star ? json(*t.gcn.k_star) : json(nullptr)}});
    const std::string head = std::to_string(t.destroyed) + "," + std::to_string(t.trial) + ",";
    for (std::size_t k = 0; k < t.gcn.cluster_trace.size(); ++k)
      clusters += head + "cr-mgc," + std::to_string(k + 1) + "," + std::to_string(t.gcn.cluster_trace[k]) + "\n";
    for (std::size_t k = 0; k < t.cen.cluster_trace.size(); ++k)
      clusters += head + "cen," + std::to_string(k + 1) + "," + std::to_string(t.cen.cluster_trace[k]) + "\n";
    if (with_trajectory || t.trial == 0) {
      trajectory_rows(traj, head + "cr-mgc,", t.gcn, t.gcn.targets);
      trajectory_rows(traj, head + "cen,", t.cen, t.cen.targets);
    }
  }
  json out{{"sizes", sizes}, {"trials", trials}, {"store_misses", r.store_misses}};
  return {{"heal_oneoff.json", dump(out)}, {"clusters.csv", clusters}, {"trajectory.csv", traj}};
}

Scenario demo_scenario(const ExperimentConfig& cfg, std::uint64_t seed) {
  const LinkPredicate linked = predicate(cfg.link);
  Rng rng(mix_seed(seed, 0x5CE0));
  Scenario s;
  s.initial = generate_connected_topology(static_cast<std::size_t>(cfg.swarm_size), cfg.scene(), linked, rng);
  s.schedule = sample_schedule(s.initial, cfg.event_times,
                               scale_counts(cfg.event_counts_at_200, static_cast<std::size_t>(cfg.swarm_size)), rng);
  s.horizon = cfg.horizon;
  s.speed_m_per_step = cfg.speed_m_per_step;
  s.inertia_steps = cfg.inertia_steps;
  s.seed = seed;
  return s;
}

GeneralResult sim_general(const ExperimentConfig& cfg, const MetaParamStore* store,
                          const std::optional<Scenario>& fixed) {
  cfg.validate();
  const LinkPredicate linked = predicate(cfg.link);
  const int seeds = fixed ? 1 : cfg.trials;
  const int per = static_cast<int>(cfg.policies.size());
  std::vector<Scenario> scenarios;
  for (int s = 0; s < seeds; ++s)
    scenarios.push_back(fixed ? *fixed : demo_scenario(cfg, trial_seed(cfg.seed, kTagGeneral, static_cast<std::uint64_t>(s), 0)));

  GeneralResult r;
  r.runs.resize(static_cast<std::size_t>(seeds * per));
  GeneralOptions opt;
  opt.record_trajectory = cfg.record_trajectory;
  parallel_for(seeds * per, cfg.threads, [&](int job) {
    const Scenario& sc = scenarios[static_cast<std::size_t>(job / per)];
    const std::string& name = cfg.policies[static_cast<std::size_t>(job % per)];
    GeneralRun& run = r.runs[static_cast<std::size_t>(job)];
    run.seed = sc.seed;
    run.policy = name;
    run.metrics = run_general(sc, policy_from_string(name), cfg.hyper, store, linked, opt);
  });

  std::map<std::string, std::vector<double>> jc;
  for (const auto& run : r.runs) {
    jc[run.policy].push_back(run.metrics.j_c);
    r.iisr_violations += run.metrics.iisr_violations;
    r.speed_violations += run.metrics.speed_violations;
    r.moves_after_heal += run.metrics.moves_after_heal;
    r.eigen_mismatches += run.metrics.eigen_mismatches;
    r.store_misses += run.metrics.store_misses;
  }
  for (const auto& [name, v] : jc) r.j_c[name] = summarize(v);
  if (r.j_c.count("cr-mgcm") && r.j_c.count("cr-mgcm-glob") && r.j_c["cr-mgcm-glob"].mean > 0.0)
    r.ratio = r.j_c["cr-mgcm"].mean / r.j_c["cr-mgcm-glob"].mean;
  return r;
}

Artifacts render(const GeneralResult& r, bool with_trajectory) {
  json policies = json::object();
  for (const auto& [name, s] : r.j_c) policies[name] = summary_json(s);
  json runs = json::array();
  std::string traces = "seed,policy,t,C_t,alive_count,center_gap_max\n";
  std::string traj = "seed,policy,t,index,x,y,z\n";
  for (const auto& run : r.runs) {
    const GeneralMetrics& m = run.metrics;
    json js = json::array();
    for (const auto& v : m.j_s) js.push_back(v ? json(*v) : json(nullptr));
    runs.push_back({{"seed", run.seed},
                    {"policy", run.policy},
                    {"j_c", m.j_c},
                    {"j_s", js},
                    {"l_max", m.l_max},
                    {"iisr_violations", m.iisr_violations},
                    {"speed_violations", m.speed_violations},
                    {"moves_after_heal", m.moves_after_heal},
                    {"eigen_checks", m.eigen_checks},
                    {"eigen_mismatches", m.eigen_mismatches},
                    {"trainings", m.trainings},
                    {"fallbacks", m.fallbacks},
                    {"store_misses", m.store_misses}});
    const std::string head = std::to_string(run.seed) + "," + run.policy + ",";
    for (std::size_t k = 0; k < m.cluster_trace.size(); ++k)
      traces += head + std::to_string(k + 1) + "," + std::to_string(m.cluster_trace[k]) + "," +
                std::to_string(m.alive_trace[k]) + "," + fmt(m.center_gap_trace[k]) + "\n";
    for (const auto& row : m.trajectory)
      traj += head + std::to_string(row.t) + "," + std::to_string(row.index) + "," + fmt(row.position.x()) + "," +
              fmt(row.position.y()) + "," + fmt(row.position.z()) + "\n";
  }
  json out{{"j_c", policies},
           {"ratio_cr_mgcm_to_glob", r.ratio ? json(*r.ratio) : json(nullptr)},
           {"iisr_violations", r.iisr_violations},
           {"speed_violations", r.speed_violations},
           {"moves_after_heal", r.moves_after_heal},
           {"eigen_mismatches", r.eigen_mismatches},
           {"store_misses", r.store_misses},
           {"runs", runs}};
  Artifacts a{{"sim_general.json", dump(out)}, {"traces.csv", traces}};
  if (with_trajectory) a["trajectory.csv"] = traj;
  return a;
}

BenchResult bench(const ExperimentConfig& cfg, const MetaParamStore* store) {
  cfg.validate();
  const LinkPredicate linked = predicate(cfg.link);
  const int d = cfg.resolved_sweep_destroy();
  std::vector<double> gcn_ms, cen_ms;
  BenchResult r;
  r.trials = cfg.trials;
  using clock = std::chrono::steady_clock;
  // Sequential on purpose: timings from concurrent trials would interfere.
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t s = trial_seed(cfg.seed, kTagBench, static_cast<std::uint64_t>(t), 0);
    Rng rng(s);
    const BreakingCase bc = sample_breaking_case(cfg.swarm_size, d, cfg.scene(), linked, rng);
    GcnPlanner planner(cfg.hyper, store, s, linked);
    auto t0 = clock::now();
    const OnlineResult& plan = planner.plan(bc.post);
    auto t1 = clock::now();
    gcn_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    if (plan.fallback) ++r.fallbacks;
    r.store_misses += planner.store_misses();

    t0 = clock::now();
    const Vec3 c = centroid(bc.post);
    Positions goal(static_cast<Eigen::Index>(bc.post.size()), 3);
    for (Eigen::Index k = 0; k < goal.rows(); ++k) goal.row(k) = c.transpose();
    const Topology targets = bc.post.with_positions(std::move(goal));
    t1 = clock::now();
    if (targets.size() != bc.post.size()) throw Error(ErrorCode::ContractViolation, "centroid targets lost rows");
    cen_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  r.gcn_median_ms = median(gcn_ms);
  r.cen_median_ms = median(cen_ms);
  return r;
}

Artifacts render(const BenchResult& r) {
  json out{{"cr_mgc_median_ms", r.gcn_median_ms},
           {"cen_median_ms", r.cen_median_ms},
           {"trials", r.trials},
           {"fallbacks", r.fallbacks},
           {"store_misses", r.store_misses}};
  return {{"bench.json", dump(out)}};
}

MetaTrainResult run_meta_train(const ExperimentConfig& cfg, const std::function<void(int)>& progress) {
  cfg.validate();
  MetaConfig mc;
  mc.hyper = cfg.hyper;
  mc.support_size = cfg.support_size;
  mc.scene = cfg.scene();
  mc.seed = cfg.seed;
  mc.threads = cfg.threads;
  return MetaTrainResult{meta_train_all(cfg.swarm_size, mc, predicate(cfg.link), cfg.link.describe(), progress)};
}

Artifacts render(const MetaTrainResult& r) {
  std::string csv = "n,episode,query_loss\n";
  for (const auto& [n, trace] : r.store.loss_traces)
    for (std::size_t e = 0; e < trace.size(); ++e)
      csv += std::to_string(n) + "," + std::to_string(e + 1) + "," + fmt(trace[e]) + "\n";
  return {{"meta_store.json", store_to_json(r.store)}, {"meta_loss.csv", csv}};
}

}  // namespace uavheal
