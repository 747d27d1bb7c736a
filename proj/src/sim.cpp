#include "uavheal/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "uavheal/errors.hpp"

namespace uavheal {

UedEvent sample_one_off_ued(const Topology& initial, std::size_t count, const LinkPredicate& linked, Rng& rng,
                            int time_step) {
  const std::size_t n = initial.size();
  if (count < 1 || n < 3 || count > n - 2)
    throw Error(ErrorCode::Domain, "destroyed count must lie in 1..N-2");
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<int> d = rng.sample(initial.indices(), count);
    std::sort(d.begin(), d.end());
    if (!is_connected(initial.without(d), linked)) return UedEvent{time_step, std::move(d)};
  }
  throw Error(ErrorCode::NoBreakingSet, "10000 sampled sets all left the swarm connected");
}

std::vector<UedEvent> sample_schedule(const Topology& initial, const std::vector<int>& times,
                                      const std::vector<int>& counts, Rng& rng) {
  if (times.size() != counts.size()) throw Error(ErrorCode::ScheduleInvalid, "times and counts differ in length");
  std::size_t total = 0;
  for (int c : counts) {
    if (c < 1) throw Error(ErrorCode::ScheduleInvalid, "every event must destroy at least one UAV");
    total += static_cast<std::size_t>(c);
  }
  if (total >= initial.size()) throw Error(ErrorCode::ScheduleInvalid, "schedule would destroy the whole swarm");
  const std::vector<int> picked = rng.sample(initial.indices(), total);
  std::vector<UedEvent> out;
  std::size_t at = 0;
  for (std::size_t e = 0; e < times.size(); ++e) {
    UedEvent ev{times[e], {}};
    ev.destroyed.assign(picked.begin() + static_cast<std::ptrdiff_t>(at),
                        picked.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(counts[e])));
    std::sort(ev.destroyed.begin(), ev.destroyed.end());
    at += static_cast<std::size_t>(counts[e]);
    out.push_back(std::move(ev));
  }
  return out;
}

std::vector<int> scale_counts(const std::vector<int>& counts_at_200, std::size_t swarm_size) {
  std::vector<int> out;
  for (int c : counts_at_200)
    out.push_back(std::max(1, static_cast<int>(std::lround(c * static_cast<double>(swarm_size) / 200.0))));
  return out;
}

SwarmState SwarmState::start(const Topology& initial) {
  SwarmState s;
  s.indices = initial.indices();
  const std::size_t n = initial.size();
  s.truth.reserve(n);
  for (std::size_t j = 0; j < n; ++j) s.truth.push_back(initial.position(j));
  s.alive.assign(n, 1);
  for (std::size_t j = 0; j < n; ++j) s.idbs.push_back(Idb{s.indices[j], s.truth, s.indices});
  return s;
}

std::size_t SwarmState::slot_of(int index) const {
  const auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) throw Error(ErrorCode::ContractViolation, "unknown uav index");
  return static_cast<std::size_t>(it - indices.begin());
}

std::vector<int> SwarmState::live_indices() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < indices.size(); ++j)
    if (alive[j]) out.push_back(indices[j]);
  return out;
}

Topology SwarmState::live_topology() const {
  std::vector<int> idx;
  std::vector<std::size_t> slots;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (alive[j]) {
      idx.push_back(indices[j]);
      slots.push_back(j);
    }
  }
  Positions p(static_cast<Eigen::Index>(slots.size()), 3);
  for (std::size_t r = 0; r < slots.size(); ++r) p.row(static_cast<Eigen::Index>(r)) = truth[slots[r]].transpose();
  return Topology(std::move(idx), std::move(p));
}

void apply_ued(SwarmState& state, const UedEvent& event, const LinkPredicate& linked) {
  if (event.time_step != state.step) throw Error(ErrorCode::ScheduleInvalid, "event applied at the wrong step");
  if (event.destroyed.empty()) throw Error(ErrorCode::ScheduleInvalid, "event destroys nobody");

  std::vector<std::size_t> gone;
  for (int j : event.destroyed) {
    const auto it = std::lower_bound(state.indices.begin(), state.indices.end(), j);
    if (it == state.indices.end() || *it != j) throw Error(ErrorCode::ScheduleInvalid, "event names an unknown uav");
    const auto slot = static_cast<std::size_t>(it - state.indices.begin());
    if (!state.alive[slot]) throw Error(ErrorCode::ScheduleInvalid, "uav " + std::to_string(j) + " already destroyed");
    if (std::find(gone.begin(), gone.end(), slot) != gone.end())
      throw Error(ErrorCode::ScheduleInvalid, "event lists a uav twice");
    gone.push_back(slot);
  }
  const auto live = static_cast<std::size_t>(std::count(state.alive.begin(), state.alive.end(), 1));
  if (gone.size() >= live) throw Error(ErrorCode::ScheduleInvalid, "event would destroy every remaining uav");

  std::vector<char> survivor = state.alive;
  for (std::size_t s : gone) survivor[s] = 0;
  for (std::size_t s : gone) {
    const int j = state.indices[s];
    for (std::size_t i = 0; i < state.indices.size(); ++i) {
      if (!survivor[i] || !linked(distance(state.truth[i], state.truth[s]))) continue;
      auto& iisr = state.idbs[i].iisr;
      const auto at = std::lower_bound(iisr.begin(), iisr.end(), j);
      if (at != iisr.end() && *at == j) iisr.erase(at);
    }
  }
  state.alive = std::move(survivor);
}

void broadcast_round(SwarmState& state, const LinkPredicate& linked) {
  const Topology live = state.live_topology();
  for (const auto& members : clusters(build_graph(live, linked))) {
    std::vector<std::size_t> slots;
    for (int m : members) slots.push_back(state.slot_of(m));
    std::vector<int> shared = state.idbs[slots.front()].iisr;
    for (std::size_t k = 1; k < slots.size(); ++k) {
      const auto& other = state.idbs[slots[k]].iisr;
      std::vector<int> next;
      std::set_intersection(shared.begin(), shared.end(), other.begin(), other.end(), std::back_inserter(next));
      shared = std::move(next);
    }
    for (std::size_t s : slots) {
      Idb& idb = state.idbs[s];
      for (std::size_t o : slots) idb.believed[o] = state.truth[o];
      idb.iisr = shared;
    }
  }
}

void sync_global(SwarmState& state) {
  const std::vector<int> live = state.live_indices();
  for (std::size_t j = 0; j < state.indices.size(); ++j) {
    if (!state.alive[j]) continue;
    state.idbs[j].believed = state.truth;
    state.idbs[j].iisr = live;
  }
}

Topology believed_topology(const SwarmState& state, std::size_t slot) {
  const Idb& idb = state.idbs[slot];
  if (idb.iisr.empty()) throw Error(ErrorCode::ProtocolCorruption, "empty IISR");
  if (!std::binary_search(idb.iisr.begin(), idb.iisr.end(), idb.owner))
    throw Error(ErrorCode::ProtocolCorruption, "uav dropped itself from its IISR");
  Positions p(static_cast<Eigen::Index>(idb.iisr.size()), 3);
  for (std::size_t r = 0; r < idb.iisr.size(); ++r) {
    const std::size_t s = state.slot_of(idb.iisr[r]);
    p.row(static_cast<Eigen::Index>(r)) = (s == slot ? state.truth[s] : idb.believed[s]).transpose();
  }
  return Topology(idb.iisr, std::move(p));
}

double center_gap(const Idb& idb, const SwarmState& state) {
  Vec3 truth_sum = Vec3::Zero();
  std::size_t live = 0;
  for (std::size_t j = 0; j < state.indices.size(); ++j) {
    if (!state.alive[j]) continue;
    truth_sum += state.truth[j];
    ++live;
  }
  if (live == 0 || idb.iisr.empty()) throw Error(ErrorCode::ProtocolCorruption, "center gap of an empty set");
  Vec3 belief_sum = Vec3::Zero();
  for (int index : idb.iisr) belief_sum += idb.believed[state.slot_of(index)];
  return (truth_sum / static_cast<double>(live) - belief_sum / static_cast<double>(idb.iisr.size())).norm();
}

Vec3 advance_toward(const Vec3& from, const Vec3& target, double speed) {
  const Vec3 gap = target - from;
  const double d = gap.norm();
  if (d <= speed) return target;
  return from + gap * (speed / d);
}

GcnPlanner::GcnPlanner(GcnHyper hyper, const MetaParamStore* store, std::uint64_t seed, LinkPredicate linked)
    : hyper_(hyper), store_(store), seed_(seed), linked_(std::move(linked)) {
  hyper_.validate();
  if (store_ && store_->hyper.layers != hyper_.layers)
    throw Error(ErrorCode::StoreFormat, "store layer count differs from Q");
}

LayerBlocks GcnPlanner::initial_layers(std::size_t n) {
  if (store_) {
    if (store_->contains(n)) return store_->lookup(n);
    ++store_misses_;
  }
  return random_layers_for(hyper_.layers, seed_, n);
}

const OnlineResult& GcnPlanner::plan(const Topology& input) {
  const auto& p = input.positions();
  auto key = std::make_pair(input.indices(), std::vector<double>(p.data(), p.data() + p.size()));
  const auto hit = cache_.find(key);
  if (hit != cache_.end()) return hit->second;

  GcnParams init{initial_layers(input.size()), hyper_};
  OnlineResult r = [&] {
    try {
      return gcn_train_online(init, input, linked_);
    } catch (const TrainingDiverged&) {
      throw;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonConvergence) throw Error(ErrorCode::HealFailed, e.what());
      throw;
    }
  }();
  ++trainings_;
  if (r.fallback) ++fallbacks_;
  return cache_.emplace(std::move(key), std::move(r)).first->second;
}

HealResult fly_to_targets(const Topology& start, const Topology& targets, const LinkPredicate& linked,
                          const HealConfig& cfg) {
  if (start.indices() != targets.indices()) throw Error(ErrorCode::ContractViolation, "targets do not match swarm");
  if (!(cfg.speed_m_per_step > 0.0)) throw Error(ErrorCode::Domain, "speed must be positive");
  HealResult out{targets, 0, 0.0, false, std::nullopt, {}, {start.positions()}};
  Positions x = start.positions();
  if (!is_connected(start, linked)) {
    for (int t = 1;; ++t) {
      if (t > cfg.max_steps) throw Error(ErrorCode::HealFailed, "flight did not reconnect within max_steps");
      bool arrived = true;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Vec3 goal = targets.positions().row(r).transpose();
        const Vec3 next = advance_toward(x.row(r).transpose(), goal, cfg.speed_m_per_step);
        x.row(r) = next.transpose();
        arrived = arrived && next == goal;
      }
      out.trajectory.push_back(x);
      const int c = cluster_count(start.with_positions(x), linked);
      out.cluster_trace.push_back(c);
      if (c == 1) {
        out.j_s = t;
        break;
      }
      if (arrived) throw Error(ErrorCode::HealFailed, "every uav reached its target but the swarm is still split");
    }
  }
  out.l_max = (x - start.positions()).rowwise().norm().maxCoeff();
  return out;
}

HealResult cr_mgc_heal(const Topology& post_ued, GcnPlanner& planner, const LinkPredicate& linked,
                       const HealConfig& cfg) {
  if (post_ued.size() == 1 || is_connected(post_ued, linked)) return fly_to_targets(post_ued, post_ued, linked, cfg);
  const OnlineResult& plan = planner.plan(post_ued);
  HealResult out = fly_to_targets(post_ued, plan.best.target, linked, cfg);
  out.fallback = plan.fallback;
  out.k_star = plan.k_star;
  return out;
}

HealResult cen_heal(const Topology& post_ued, const LinkPredicate& linked, const HealConfig& cfg) {
  const Vec3 c = centroid(post_ued);
  Positions goal(static_cast<Eigen::Index>(post_ued.size()), 3);
  for (Eigen::Index r = 0; r < goal.rows(); ++r) goal.row(r) = c.transpose();
  return fly_to_targets(post_ued, post_ued.with_positions(std::move(goal)), linked, cfg);
}

namespace {

Move hold(const Vec3& at) { return Move{Vec3::Zero(), at, false}; }

Move head_for(const Vec3& at, const Vec3& target, double speed) {
  const Vec3 next = advance_toward(at, target, speed);
  return Move{next - at, next, next == target};
}

}  // namespace

Move cr_mgcm_policy(const SwarmState& state, std::size_t slot, const PolicyConfig& cfg, PolicyMemory& memory,
                    GcnPlanner& planner, const LinkPredicate& linked) {
  if (!state.alive[slot]) throw Error(ErrorCode::ContractViolation, "policy called for a destroyed uav");
  if (cfg.inertia_steps < 1) throw Error(ErrorCode::Domain, "inertia must be at least one step");
  const Vec3& own = state.truth[slot];
  const Topology belief = believed_topology(state, slot);
  if (belief.size() == 1 || is_connected(belief, linked)) {
    memory.inertia_counter = 0;
    return hold(own);
  }
  if (memory.inertia_counter == 0) {
    const OnlineResult& plan = planner.plan(belief);
    memory.target = plan.best.target.position(*belief.row_of(state.indices[slot]));
    memory.inertia_counter = 1;
  } else {
    ++memory.inertia_counter;
  }
  if (memory.inertia_counter >= cfg.inertia_steps) memory.inertia_counter = 0;
  return head_for(own, memory.target, cfg.speed_m_per_step);
}

Move cen_policy(const SwarmState& state, std::size_t slot, const PolicyConfig& cfg, const LinkPredicate& linked) {
  if (!state.alive[slot]) throw Error(ErrorCode::ContractViolation, "policy called for a destroyed uav");
  const Vec3& own = state.truth[slot];
  const Topology belief = believed_topology(state, slot);
  if (belief.size() == 1 || is_connected(belief, linked)) return hold(own);
  return head_for(own, centroid(belief), cfg.speed_m_per_step);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::CrMgcm: return "cr-mgcm";
    case PolicyKind::CrMgcmGlob: return "cr-mgcm-glob";
    case PolicyKind::Cen: return "cen";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& name) {
  if (name == "cr-mgcm") return PolicyKind::CrMgcm;
  if (name == "cr-mgcm-glob") return PolicyKind::CrMgcmGlob;
  if (name == "cen") return PolicyKind::Cen;
  throw Error(ErrorCode::Config, "unknown policy '" + name + "'");
}

void Scenario::validate(const LinkPredicate& linked) const {
  if (horizon < 1) throw Error(ErrorCode::ScheduleInvalid, "horizon must be at least 1");
  if (!(speed_m_per_step > 0.0)) throw Error(ErrorCode::Domain, "speed must be positive");
  if (inertia_steps < 1) throw Error(ErrorCode::Domain, "inertia must be at least one step");
  if (!is_connected(initial, linked)) throw Error(ErrorCode::ContractViolation, "initial swarm must be connected");
  std::vector<int> seen;
  for (const auto& ev : schedule) {
    if (ev.time_step < 0 || ev.time_step > horizon) throw Error(ErrorCode::ScheduleInvalid, "event outside [0, T]");
    if (ev.destroyed.empty()) throw Error(ErrorCode::ScheduleInvalid, "event destroys nobody");
    for (int j : ev.destroyed) {
      if (!initial.row_of(j)) throw Error(ErrorCode::ScheduleInvalid, "event names an unknown uav");
      if (std::find(seen.begin(), seen.end(), j) != seen.end())
        throw Error(ErrorCode::ScheduleInvalid, "uav " + std::to_string(j) + " destroyed twice");
      seen.push_back(j);
    }
  }
  if (seen.size() >= initial.size()) throw Error(ErrorCode::ScheduleInvalid, "schedule destroys every uav");
}

GeneralMetrics run_general(const Scenario& scenario, PolicyKind kind, const GcnHyper& hyper,
                           const MetaParamStore* store, const LinkPredicate& linked, const GeneralOptions& options) {
  scenario.validate(linked);
  const int horizon = scenario.horizon;
  const bool glob = kind == PolicyKind::CrMgcmGlob;
  const PolicyConfig pcfg{scenario.speed_m_per_step, scenario.inertia_steps};

  std::vector<UedEvent> events = scenario.schedule;
  std::stable_sort(events.begin(), events.end(),
                   [](const UedEvent& a, const UedEvent& b) { return a.time_step < b.time_step; });

  SwarmState state = SwarmState::start(scenario.initial);
  const std::vector<Vec3> origin = state.truth;
  GcnPlanner planner(hyper, store, scenario.seed, linked);
  std::vector<PolicyMemory> memory(state.indices.size());
  GeneralMetrics m;

  std::vector<int> spot;
  {
    std::vector<int> steps(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t) steps[static_cast<std::size_t>(t - 1)] = t;
    Rng rng(mix_seed(scenario.seed, 0xE16E));
    spot = rng.sample(steps, static_cast<std::size_t>(std::max(0, options.eigen_spot_checks)));
    std::sort(spot.begin(), spot.end());
  }

  auto record_positions = [&](int t) {
    if (!options.record_trajectory) return;
    for (std::size_t j = 0; j < state.indices.size(); ++j)
      if (state.alive[j]) m.trajectory.push_back(TrajectoryRow{t, state.indices[j], state.truth[j]});
  };
  auto share = [&] {
    if (glob) sync_global(state);
    else broadcast_round(state, linked);
  };

  // Per event: first step with flight after it, and whether it left the swarm connected.
  std::vector<int> event_start;
  std::vector<char> event_intact;
  std::size_t next_event = 0;
  auto fire_events = [&](int t) {
    bool any = false;
    while (next_event < events.size() && events[next_event].time_step == t) {
      apply_ued(state, events[next_event], linked);
      ++next_event;
      any = true;
    }
    if (any) {
      const bool intact = is_connected(state.live_topology(), linked);
      for (std::size_t e = event_start.size(); e < next_event; ++e) {
        event_start.push_back(std::max(t, 1));
        event_intact.push_back(intact ? 1 : 0);
      }
    }
    return any;
  };

  state.step = 0;
  fire_events(0);
  share();
  record_positions(0);

  int prev_clusters = is_connected(state.live_topology(), linked) ? 1 : 2;
  for (int t = 1; t <= horizon; ++t) {
    state.step = t;
    const bool event_now = fire_events(t);
    share();
    planner.clear_cache();

    std::vector<Move> moves(state.indices.size());
    for (std::size_t j = 0; j < state.indices.size(); ++j) {
      if (!state.alive[j]) continue;
      moves[j] = kind == PolicyKind::Cen ? cen_policy(state, j, pcfg, linked)
                                         : cr_mgcm_policy(state, j, pcfg, memory[j], planner, linked);
    }

    bool moved = false;
    for (std::size_t j = 0; j < state.indices.size(); ++j) {
      if (!state.alive[j]) continue;
      const double step_len = moves[j].velocity.norm();
      const double v0 = scenario.speed_m_per_step;
      if (step_len > 0.0) moved = true;
      if (step_len > v0 * (1.0 + 1e-9) || (step_len > 0.0 && step_len < v0 * (1.0 - 1e-9) && !moves[j].arrived))
        ++m.speed_violations;
      state.truth[j] = moves[j].next;
      state.idbs[j].believed[j] = state.truth[j];
    }
    if (moved && prev_clusters == 1 && !event_now) ++m.moves_after_heal;

    const Topology live = state.live_topology();
    const int c = cluster_count(live, linked);
    m.cluster_trace.push_back(c);
    m.alive_trace.push_back(static_cast<int>(live.size()));
    prev_clusters = c;

    if (std::binary_search(spot.begin(), spot.end(), t)) {
      ++m.eigen_checks;
      if (zero_eig_multiplicity(laplacian(build_graph(live, linked))) != c) ++m.eigen_mismatches;
    }

    double gap = 0.0;
    for (std::size_t j = 0; j < state.indices.size(); ++j) {
      if (!state.alive[j]) continue;
      const auto& iisr = state.idbs[j].iisr;
      if (!std::includes(iisr.begin(), iisr.end(), live.indices().begin(), live.indices().end()))
        ++m.iisr_violations;
      gap = std::max(gap, center_gap(state.idbs[j], state));
    }
    m.center_gap_trace.push_back(gap);
    record_positions(t);
  }

  const auto connected_steps = std::count(m.cluster_trace.begin(), m.cluster_trace.end(), 1);
  m.j_c = static_cast<double>(connected_steps) / horizon;

  for (std::size_t e = 0; e < event_start.size(); ++e) {
    if (event_intact[e]) {
      m.j_s.emplace_back(0);
      continue;
    }
    std::optional<int> js;
    for (int t = event_start[e]; t <= horizon; ++t) {
      if (m.cluster_trace[static_cast<std::size_t>(t - 1)] == 1) {
        js = t - event_start[e] + 1;
        break;
      }
    }
    m.j_s.push_back(js);
  }
  for (std::size_t j = 0; j < state.indices.size(); ++j)
    if (state.alive[j]) m.l_max = std::max(m.l_max, (state.truth[j] - origin[j]).norm());

  m.store_misses = planner.store_misses();
  m.trainings = planner.trainings();
  m.fallbacks = planner.fallbacks();
  return m;
}

}  // namespace uavheal
