#include <doctest.h>

#include "uavheal/errors.hpp"
#include "uavheal/scene.hpp"
#include "uavheal/sim.hpp"
#include "uavheal/vrg.hpp"

using namespace uavheal;

namespace {

LinkPredicate within(double m) {
  return [m](double d) { return d <= m; };
}

Topology line(std::initializer_list<double> xs) {
  Positions p = Positions::Zero(static_cast<Eigen::Index>(xs.size()), 3);
  Eigen::Index r = 0;
  for (double x : xs) p(r++, 0) = x;
  return Topology::sequential(p);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

bool has(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

// Connected swarm of n in the scaled scene.
Topology swarm(std::size_t n, Rng& rng) {
  return generate_connected_topology(n, scene_for_swarm(n), within(120), rng);
}

// Destroyed sets where every destroyed uav keeps a surviving neighbour, so
// every survivor's IISR can be corrected by broadcasts.
std::optional<std::vector<int>> sensed_breaking_set(const Topology& t, std::size_t count, Rng& rng) {
  for (int attempt = 0; attempt < 2000; ++attempt) {
    auto d = rng.sample(t.indices(), count);
    std::sort(d.begin(), d.end());
    const Topology rest = t.without(d);
    if (is_connected(rest, within(120))) continue;
    bool sensed = true;
    for (int j : d) {
      const Vec3 p = t.position(*t.row_of(j));
      bool any = false;
      for (std::size_t r = 0; r < rest.size(); ++r) any = any || distance(rest.position(r), p) <= 120;
      sensed = sensed && any;
    }
    if (sensed) return d;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("one-off event sampling") {
  // two far pairs bridged by node 3
  const auto t = line({0, 100, 200, 300, 400});
  Rng rng(1);
  const auto e = sample_one_off_ued(t, 1, within(120), rng);
  CHECK(e.destroyed.size() == 1);
  CHECK_FALSE(is_connected(t.without(e.destroyed), within(120)));
  CHECK(e.destroyed[0] != 1);
  CHECK(e.destroyed[0] != 5);

  Positions dense = Positions::Zero(6, 3);
  for (int i = 0; i < 6; ++i) dense(i, 0) = i;
  CHECK(code_of([&] { sample_one_off_ued(Topology::sequential(dense), 2, within(120), rng); }) ==
        ErrorCode::NoBreakingSet);
  CHECK(code_of([&] { sample_one_off_ued(t, 4, within(120), rng); }) == ErrorCode::Domain);
}

TEST_CASE("schedules") {
  Rng rng(2);
  const auto t = swarm(50, rng);
  const auto counts = scale_counts({50, 8, 9, 7, 20}, 50);
  CHECK(counts == std::vector<int>{13, 2, 2, 2, 5});
  CHECK(scale_counts({1}, 10) == std::vector<int>{1});
  const auto s = sample_schedule(t, {10, 90, 100, 131, 230}, counts, rng);
  std::vector<int> all;
  for (const auto& e : s) all.insert(all.end(), e.destroyed.begin(), e.destroyed.end());
  std::sort(all.begin(), all.end());
  CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
  CHECK(all.size() == 24);
  CHECK(code_of([&] { sample_schedule(t, {1, 2}, {1}, rng); }) == ErrorCode::ScheduleInvalid);
}

TEST_CASE("apply_ued and broadcast") {
  // 1 - 2 - 3 chain, 4 hanging off 3
  const auto t = line({0, 100, 200, 300});
  auto s = SwarmState::start(t);
  s.step = 3;
  apply_ued(s, UedEvent{3, {4}}, within(120));
  CHECK_FALSE(has(s.idbs[2].iisr, 4));
  CHECK(has(s.idbs[0].iisr, 4));
  CHECK(has(s.idbs[1].iisr, 4));
  CHECK(code_of([&] { apply_ued(s, UedEvent{3, {4}}, within(120)); }) == ErrorCode::ScheduleInvalid);
  CHECK(code_of([&] { apply_ued(s, UedEvent{2, {1}}, within(120)); }) == ErrorCode::ScheduleInvalid);

  broadcast_round(s, within(120));
  for (int j = 0; j < 3; ++j) CHECK(s.idbs[static_cast<std::size_t>(j)].iisr == std::vector<int>{1, 2, 3});

  // an isolated uav dies: nobody senses it
  auto u = SwarmState::start(line({0, 100, 200}));
  u.truth[2] = Vec3(900, 0, 0);
  const auto before = u.idbs;
  apply_ued(u, UedEvent{0, {3}}, within(120));
  CHECK(u.idbs[0].iisr == before[0].iisr);
  CHECK(u.idbs[1].iisr == before[1].iisr);

  // a singleton keeps stale beliefs about others
  auto w = SwarmState::start(line({0, 100}));
  w.truth[1] = Vec3(500, 0, 0);
  broadcast_round(w, within(120));
  CHECK(w.idbs[0].believed[1] == Vec3(100, 0, 0));
  CHECK(w.idbs[1].believed[1] == Vec3(500, 0, 0));

  // merging clusters equalise IISRs
  auto m = SwarmState::start(line({0, 100, 200, 300}));
  m.idbs[0].iisr = {1, 2, 3};
  m.idbs[3].iisr = {1, 2, 4};
  broadcast_round(m, within(120));
  for (const auto& idb : m.idbs) CHECK(idb.iisr == std::vector<int>{1, 2});
}

TEST_CASE("center gap") {
  const auto t = line({0, 100, 200, 300});
  auto s = SwarmState::start(t);
  CHECK(center_gap(s.idbs[0], s) == 0.0);
  sync_global(s);
  CHECK(center_gap(s.idbs[1], s) == 0.0);
  s.idbs[0].believed[2] += Vec3(0, 40, 0);
  CHECK(center_gap(s.idbs[0], s) == doctest::Approx(40.0 / 4));
}

TEST_CASE("advance_toward") {
  CHECK(advance_toward(Vec3::Zero(), Vec3(10, 0, 0), 1.0) == Vec3(1, 0, 0));
  CHECK(advance_toward(Vec3::Zero(), Vec3(0.5, 0, 0), 1.0) == Vec3(0.5, 0, 0));
  CHECK((advance_toward(Vec3::Zero(), Vec3(3, 4, 0), 1.0) - Vec3(0.6, 0.8, 0)).norm() < 1e-15);
}

TEST_CASE("one-off healing of two uavs 360 m apart") {
  const auto t = line({0, 360});
  HealConfig hc;
  const auto cen = cen_heal(t, within(120), hc);
  CHECK(cen.j_s == 120);

  GcoConfig gco{0.5, 100};
  const auto g = gco_iterate(t, build_vrg(t, 360), gco, within(120));
  CHECK(fly_to_targets(t, g.topology, within(120), hc).j_s == 120);

  // at epsilon 1 two nodes just swap places, so the fallback cannot connect
  GcnPlanner swap(GcnHyper{}, nullptr, 3, within(120));
  CHECK(code_of([&] { cr_mgc_heal(t, swap, within(120), hc); }) == ErrorCode::HealFailed);

  GcnHyper half;
  half.epsilon = 0.5;
  GcnPlanner planner(half, nullptr, 3, within(120));
  const auto r = cr_mgc_heal(t, planner, within(120), hc);
  CHECK(r.cluster_trace.back() == 1);
  // the gap must close from 360 m to 120 m at 2 m per step at best
  CHECK(r.j_s >= 120);
  CHECK(r.l_max <= r.j_s + 1e-9);

  const auto c = line({0, 50});
  const auto zero = cr_mgc_heal(c, planner, within(120), hc);
  CHECK(zero.j_s == 0);
  CHECK(zero.targets == c);
}

TEST_CASE("policies") {
  PolicyConfig pc{1.0, 3};
  auto s = SwarmState::start(line({0, 100}));
  GcnPlanner planner(GcnHyper{}, nullptr, 1, within(120));
  PolicyMemory mem;
  const auto hold = cr_mgcm_policy(s, 0, pc, mem, planner, within(120));
  CHECK(hold.velocity == Vec3::Zero());
  CHECK(cen_policy(s, 0, pc, within(120)).velocity == Vec3::Zero());

  auto far = SwarmState::start(line({0, 300, 600}));
  PolicyMemory m1;
  const auto first = cr_mgcm_policy(far, 0, pc, m1, planner, within(120));
  CHECK(m1.inertia_counter == 1);
  CHECK(planner.trainings() == 1);
  CHECK(first.velocity.norm() == doctest::Approx(1.0));
  const Vec3 target = m1.target;
  far.truth[0] = first.next;
  const auto second = cr_mgcm_policy(far, 0, pc, m1, planner, within(120));
  CHECK(m1.target == target);
  CHECK(planner.trainings() == 1);
  CHECK(m1.inertia_counter == 2);
  far.truth[0] = second.next;
  cr_mgcm_policy(far, 0, pc, m1, planner, within(120));
  CHECK(m1.inertia_counter == 0);  // reset at kappa

  auto empty = SwarmState::start(line({0, 300}));
  empty.idbs[0].iisr.clear();
  CHECK(code_of([&] { cen_policy(empty, 0, pc, within(120)); }) == ErrorCode::ProtocolCorruption);
  CHECK(policy_from_string("cr-mgcm-glob") == PolicyKind::CrMgcmGlob);
  CHECK(code_of([] { policy_from_string("x"); }) == ErrorCode::Config);
}

TEST_CASE("general runs: trivial schedules") {
  Scenario sc;
  sc.initial = line({0, 100, 200, 300});
  sc.horizon = 20;
  for (auto kind : {PolicyKind::CrMgcm, PolicyKind::CrMgcmGlob, PolicyKind::Cen}) {
    const auto m = run_general(sc, kind, GcnHyper{}, nullptr, within(120));
    CHECK(m.j_c == 1.0);
    CHECK(m.cluster_trace.size() == 20);
  }
  sc.schedule = {UedEvent{5, {1, 2, 3}}};
  const auto m = run_general(sc, PolicyKind::Cen, GcnHyper{}, nullptr, within(120));
  for (std::size_t t = 4; t < 20; ++t) CHECK(m.cluster_trace[t] == 1);
  CHECK(m.alive_trace.back() == 1);

  sc.schedule = {UedEvent{5, {1, 2, 3, 4}}};
  CHECK(code_of([&] { run_general(sc, PolicyKind::Cen, GcnHyper{}, nullptr, within(120)); }) ==
        ErrorCode::ScheduleInvalid);
  sc.schedule = {UedEvent{5, {2}}, UedEvent{7, {2}}};
  CHECK(code_of([&] { run_general(sc, PolicyKind::Cen, GcnHyper{}, nullptr, within(120)); }) ==
        ErrorCode::ScheduleInvalid);
}

TEST_CASE("property: IISR soundness and speed contract on random schedules") {
  Rng rng(77);
  for (int trial = 0; trial < 6; ++trial) {
    Scenario sc;
    sc.initial = swarm(30, rng);
    sc.schedule = sample_schedule(sc.initial, {0, 15, 60}, {6, 3, 4}, rng);
    sc.horizon = 150;
    sc.seed = rng.next_u64();
    sc.inertia_steps = 1 + static_cast<int>(rng.below(12));
    for (auto kind : {PolicyKind::CrMgcm, PolicyKind::CrMgcmGlob, PolicyKind::Cen}) {
      const auto m = run_general(sc, kind, GcnHyper{}, nullptr, within(120));
      CHECK(m.iisr_violations == 0);
      CHECK(m.speed_violations == 0);
      CHECK(m.eigen_mismatches == 0);
      CHECK(m.eigen_checks == 10);
      CHECK(m.j_c >= 0.0);
      CHECK(m.j_c <= 1.0);
      if (kind == PolicyKind::CrMgcmGlob) CHECK(m.moves_after_heal == 0);
    }
  }
}

TEST_CASE("property: uavs stop once healed when every loss was sensed") {
  Rng rng(78);
  int runs = 0;
  while (runs < 8) {
    Scenario sc;
    sc.initial = swarm(25, rng);
    const auto d = sensed_breaking_set(sc.initial, 4, rng);
    if (!d) continue;
    sc.schedule = {UedEvent{runs % 2 == 0 ? 0 : 5, *d}};
    sc.horizon = 200;
    sc.seed = rng.next_u64();
    for (auto kind : {PolicyKind::CrMgcm, PolicyKind::Cen}) {
      const auto m = run_general(sc, kind, GcnHyper{}, nullptr, within(120));
      CHECK(m.moves_after_heal == 0);
      CHECK(m.iisr_violations == 0);
    }
    ++runs;
  }
}

TEST_CASE("an unsensed loss leaves a ghost that keeps survivors moving") {
  // 4 only links to 3; destroying both leaves 4 in every survivor's IISR
  Scenario sc;
  sc.initial = line({0, 100, 200, 300});
  sc.schedule = {UedEvent{0, {3, 4}}};
  sc.horizon = 30;
  const auto m = run_general(sc, PolicyKind::Cen, GcnHyper{}, nullptr, within(120));
  for (int c : m.cluster_trace) CHECK(c == 1);
  CHECK(m.moves_after_heal > 0);
  CHECK(m.iisr_violations == 0);

  auto s = SwarmState::start(sc.initial);
  apply_ued(s, sc.schedule[0], within(120));
  broadcast_round(s, within(120));
  CHECK(s.idbs[0].iisr == std::vector<int>{1, 2, 4});
}

TEST_CASE("glob policy with a single event reproduces the one-off heal") {
  Rng rng(90);
  int checked = 0;
  while (checked < 4) {
    Scenario sc;
    sc.initial = swarm(20, rng);
    std::optional<UedEvent> ev;
    try {
      ev = sample_one_off_ued(sc.initial, 5, within(120), rng);
    } catch (const Error&) {
      continue;
    }
    sc.schedule = {*ev};
    sc.horizon = 400;
    sc.inertia_steps = sc.horizon;
    sc.seed = rng.next_u64();
    GeneralOptions opt;
    opt.record_trajectory = true;
    const auto m = run_general(sc, PolicyKind::CrMgcmGlob, GcnHyper{}, nullptr, within(120), opt);

    const Topology post = sc.initial.without(ev->destroyed);
    GcnPlanner planner(GcnHyper{}, nullptr, sc.seed, within(120));
    const auto heal = cr_mgc_heal(post, planner, within(120), HealConfig{});
    REQUIRE(heal.j_s < sc.horizon);

    bool same = true;
    for (const auto& row : m.trajectory) {
      const auto t = static_cast<std::size_t>(std::min(row.t, heal.j_s));
      const auto r = static_cast<Eigen::Index>(*post.row_of(row.index));
      same = same && heal.trajectory[t].row(r).transpose() == row.position;
    }
    CHECK(same);
    CHECK(m.j_s.at(0) == heal.j_s);
    ++checked;
  }
}

TEST_CASE("general runs are deterministic") {
  Rng rng(5);
  Scenario sc;
  sc.initial = swarm(30, rng);
  sc.schedule = sample_schedule(sc.initial, {3, 40}, {8, 3}, rng);
  sc.horizon = 120;
  const auto a = run_general(sc, PolicyKind::CrMgcm, GcnHyper{}, nullptr, within(120));
  const auto b = run_general(sc, PolicyKind::CrMgcm, GcnHyper{}, nullptr, within(120));
  CHECK(a.cluster_trace == b.cluster_trace);
  CHECK(a.center_gap_trace == b.center_gap_trace);
  CHECK(a.j_c == b.j_c);
}
