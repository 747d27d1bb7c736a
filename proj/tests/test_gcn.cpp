#include <doctest.h>

#include <algorithm>

#include "uavheal/errors.hpp"
#include "uavheal/gcn.hpp"
#include "uavheal/rng.hpp"
#include "uavheal/vrg.hpp"

using namespace uavheal;

namespace {

Topology line(std::initializer_list<double> xs) {
  Positions p = Positions::Zero(static_cast<Eigen::Index>(xs.size()), 3);
  Eigen::Index r = 0;
  for (double x : xs) p(r++, 0) = x;
  return Topology::sequential(p);
}

LinkPredicate within(double m) {
  return [m](double d) { return d <= m; };
}

Topology random_topology(Rng& rng, int n, double side) {
  Positions p(n, 3);
  for (int i = 0; i < n; ++i) p.row(i) << rng.uniform(0, side), rng.uniform(0, side), rng.uniform(0, side / 10);
  return Topology::sequential(p);
}

double spread(const Topology& t) {
  const Vec3 c = centroid(t);
  double m = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) m = std::max(m, (t.position(j) - c).norm());
  return m;
}

double row_sum_norm(const Positions& x) { return x.rowwise().lpNorm<1>().maxCoeff(); }

}  // namespace

TEST_CASE("infinity norm") {
  CHECK(infinity_norm(Eigen::MatrixXd::Identity(4, 4)) == 1.0);
  Eigen::MatrixXd complete = Eigen::MatrixXd::Ones(5, 5) - Eigen::MatrixXd::Identity(5, 5);
  CHECK(infinity_norm(complete) == 4.0);
  Eigen::MatrixXd m(2, 2);
  m << 1, -2, 3, 0;
  CHECK(infinity_norm(m) == 3.0);
}

TEST_CASE("property: infinity norm is sub-multiplicative") {
  Rng rng(5);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = 1 + static_cast<int>(rng.below(8)), k = 1 + static_cast<int>(rng.below(8)),
              c = 1 + static_cast<int>(rng.below(8));
    Eigen::MatrixXd a(r, k), b(k, c);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-5, 5);
    for (int i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform(-5, 5);
    if (infinity_norm(a * b) > infinity_norm(a) * infinity_norm(b) * (1 + 1e-12)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("gco_step hand cases") {
  const auto pair = line({0, 2});
  const auto vrg = build_vrg(pair, 2.0);
  const auto l = laplacian(vrg);
  CHECK(step_size(vrg, 1.0) == 1.0);
  const auto swapped = gco_step(pair, l, 1.0);
  CHECK(swapped.position(0).isApprox(Vec3(2, 0, 0)));
  CHECK(swapped.position(1).isApprox(Vec3(0, 0, 0)));
  const auto mid = gco_step(pair, l, step_size(vrg, 0.5));
  CHECK(mid.position(0).isApprox(Vec3(1, 0, 0)));
  CHECK(mid.position(1).isApprox(Vec3(1, 0, 0)));
  CHECK_THROWS_AS(gco_step(pair, Eigen::MatrixXd::Zero(3, 3), 1.0), Error);
}

TEST_CASE("gco_iterate") {
  GcoConfig cfg;
  const auto close = line({0, 50});
  const auto r0 = gco_iterate(close, build_vrg(close, 50), cfg, within(120));
  CHECK(r0.k_star == 0);
  CHECK(r0.topology == close);

  const auto t = line({0, 100, 250});
  const auto vrg = build_vrg(t, virtual_distance(t, 0.3).d_v_m);
  const auto r = gco_iterate(t, vrg, cfg, within(120));
  CHECK(r.k_star >= 1);
  CHECK(is_connected(r.topology, within(120)));
  const Vec3 c = centroid(t);
  for (std::size_t j = 0; j < t.size(); ++j)
    CHECK((r.topology.position(j) - c).norm() < (t.position(j) - c).norm());
  CHECK((centroid(r.topology) - c).norm() < 1e-9);

  try {
    gco_iterate(line({0, 360}), build_vrg(line({0, 360}), 360), cfg, within(120));
    FAIL("a two-node swap never connects");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonConvergence);
  }
}

TEST_CASE("property: centroid preservation, contraction, fixed point") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(14));
    const auto t = random_topology(rng, n, 600);
    const auto vrg = build_vrg(t, virtual_distance(t, rng.uniform()).d_v_m);
    const auto l = laplacian(vrg);
    const double eps = rng.uniform(0.05, 1.0);
    const double h = step_size(vrg, eps);
    const auto next = gco_step(t, l, h);
    const Vec3 c0 = centroid(t);
    CHECK((centroid(next) - c0).norm() <= 1e-9 * std::max(1.0, c0.norm()));
    // centroid attraction in the row-sum norm
    const Positions dev0 = t.positions().rowwise() - c0.transpose();
    const Positions dev1 = next.positions().rowwise() - c0.transpose();
    CHECK(row_sum_norm(dev1) <= row_sum_norm(dev0) * (1 + 1e-12));
    // fixed point: all nodes at the same place stay put
    Positions same(n, 3);
    same.rowwise() = c0.transpose();
    CHECK((gco_step(t.with_positions(same), l, h).positions() - same).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("property: contraction between mean-matched pairs at epsilon 1") {
  Rng rng(18);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(14));
    const auto t = random_topology(rng, n, 600);
    const auto vrg = build_vrg(t, virtual_distance(t, rng.uniform()).d_v_m);
    const auto l = laplacian(vrg);
    const double h = step_size(vrg, 1.0);
    Positions y(n, 3);
    for (int i = 0; i < 3 * n; ++i) y.data()[i] = rng.uniform(0, 600);
    y.rowwise() += (t.positions().colwise().mean() - y.colwise().mean());
    const auto u = t.with_positions(y);
    const double before = row_sum_norm(t.positions() - y);
    const double after = row_sum_norm(gco_step(t, l, h).positions() - gco_step(u, l, h).positions());
    if (after > before * (1 + 1e-12)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("contraction factor") {
  const auto t = line({0, 2});
  const auto vrg = build_vrg(t, 2);
  CHECK(gco_contraction_factor(vrg, 0.5) == doctest::Approx(0.0));
  CHECK(gco_contraction_factor(vrg, 1.0) == doctest::Approx(1.0));
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = random_topology(rng, 30, 400);
    const auto g = build_vrg(u, virtual_distance(u, 0.3).d_v_m);
    const double rho = gco_contraction_factor(g, 0.9);
    CHECK(rho < 1.0);
    // the factor bounds the deviation decay
    Topology x = u;
    const auto l = laplacian(g);
    const double h = step_size(g, 0.9);
    for (int k = 0; k < 200; ++k) x = gco_step(x, l, h);
    CHECK(spread(x) <= spread(u) * std::pow(rho, 200) * std::sqrt(30.0) + 1e-9);
    CHECK(spread(x) <= spread(u) * 1e-6);
  }
}

TEST_CASE("gcn_forward hand cases") {
  GcnParams params{identity_layers(3), GcnHyper{}};
  params.hyper.layers = 3;
  const auto one = line({5});
  const Eigen::MatrixXd zero1 = Eigen::MatrixXd::Zero(1, 1);
  CHECK(gcn_forward(params, one, zero1, 1.0).target == one);

  const auto t = line({10, 40, 90});
  const auto prob = prepare_problem(t, 0.3, 1.0);
  GcnParams zeros{LayerBlocks(3, Eigen::Matrix3d::Zero()), params.hyper};
  const auto out = gcn_forward(zeros, t, prob.laplacian_v, prob.step);
  CHECK(out.target.positions().isZero());
  CHECK(max_displacement(out.target, t).first == doctest::Approx(90.0));

  // negative coordinates are shifted in and back out
  const auto neg = line({-50});
  CHECK(gcn_forward(params, neg, zero1, 1.0).target == neg);
}

TEST_CASE("loss hand cases") {
  const auto c1 = line({0, 50});
  CHECK(gcn_loss(c1, c1, within(120), 100) == 0.0);
  const auto c3 = line({0, 500, 1000});
  CHECK(gcn_loss(c3, c3, within(120), 100) == 200.0);
  const auto moved = line({10, 500, 1000});
  const auto [d, row] = max_displacement(moved, c3);
  CHECK(d == 10.0);
  CHECK(row == 0u);
  CHECK(max_displacement(line({1, 1}), line({0, 0})).second == 0u);
}

TEST_CASE("backward: single node single layer by hand") {
  GcnHyper hyper;
  hyper.layers = 1;
  Eigen::Matrix3d theta;
  theta << 1.2, 0.1, 0.0, 0.0, 0.9, 0.2, 0.1, 0.0, 1.1;
  GcnParams params{{theta}, hyper};
  const auto in = Topology::sequential((Positions(1, 3) << 3.0, 4.0, 5.0).finished());
  const Eigen::MatrixXd l = Eigen::MatrixXd::Zero(1, 1);
  auto pass = gcn_forward(params, in, l, 1.0);
  const auto out = evaluate_output(pass.target, in, within(120), 100);
  const auto grad = gcn_backward(pass.cache, out, in, 100);
  const Eigen::RowVector3d p = in.positions().row(0);
  const Eigen::RowVector3d y = p * theta;
  const Eigen::RowVector3d unit = (y - p) / (y - p).norm();
  const Eigen::Matrix3d want = p.transpose() * unit;
  CHECK((grad[0] - want).cwiseAbs().maxCoeff() < 1e-12);

  // zero displacement gives zero gradient
  GcnParams ident{identity_layers(1), hyper};
  auto p2 = gcn_forward(ident, in, l, 1.0);
  const auto o2 = evaluate_output(p2.target, in, within(120), 100);
  CHECK(gcn_backward(p2.cache, o2, in, 100)[0].isZero());

  // stale caches are rejected
  CHECK_THROWS_AS(gcn_backward(pass.cache, o2, in, 100), Error);
}

TEST_CASE("property: analytic gradient matches central differences") {
  Rng rng(31);
  const double h = 1e-5;
  int checked = 0;
  int attempts = 0;
  while (checked < 50) {
    REQUIRE(++attempts < 2000);
    const int n = 3 + static_cast<int>(rng.below(6));
    const int depth = 1 + static_cast<int>(rng.below(4));
    const auto t = random_topology(rng, n, 300);
    GcnHyper hyper;
    hyper.layers = depth;
    GcnParams params{random_layers(depth, rng), hyper};
    const auto prob = prepare_problem(t, rng.uniform(), rng.uniform(0.2, 1.0));

    auto base = gcn_forward(params, t, prob.laplacian_v, prob.step);
    const auto out = evaluate_output(base.target, t, within(120), 100);
    const auto grad = gcn_backward(base.cache, out, t, 100);
    const std::size_t argmax = max_displacement(base.target, t).second;

    // Same activation pattern and argmax row at every probe, else resample.
    auto mask_of = [](const ForwardCache& c) {
      std::vector<bool> m;
      for (const auto& z : c.pre_activation)
        for (Eigen::Index i = 0; i < z.size(); ++i) m.push_back(z.data()[i] > 0.0);
      return m;
    };
    const auto base_mask = mask_of(base.cache);
    bool smooth = true;
    for (const auto& z : base.cache.pre_activation)
      if ((z.array().abs() < 1e-6).any()) smooth = false;

    double worst = 0.0;
    double scale = 0.0;
    for (const auto& g : grad) scale = std::max(scale, g.cwiseAbs().maxCoeff());
    for (int q = 0; q < depth && smooth; ++q)
      for (int e = 0; e < 9 && smooth; ++e) {
        double probe[2];
        for (int s = 0; s < 2; ++s) {
          GcnParams moved = params;
          moved.layers[static_cast<std::size_t>(q)].data()[e] += (s == 0 ? h : -h);
          auto pass = gcn_forward(moved, t, prob.laplacian_v, prob.step);
          const auto [d, row] = max_displacement(pass.target, t);
          if (row != argmax || mask_of(pass.cache) != base_mask) smooth = false;
          probe[s] = d;
        }
        const double fd = (probe[0] - probe[1]) / (2 * h);
        const double an = grad[static_cast<std::size_t>(q)].data()[e];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-3 * scale});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    if (!smooth || scale == 0.0) continue;
    ++checked;
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("descend scales by the coordinate unit") {
  GcnHyper hyper;
  hyper.learning_rate = 0.5;
  hyper.coordinate_scale_m = 1000.0;
  LayerBlocks theta{Eigen::Matrix3d::Identity()};
  LayerBlocks grad{Eigen::Matrix3d::Constant(2.0)};
  const auto next = descend(theta, grad, hyper);
  CHECK((next[0] - (Eigen::Matrix3d::Identity() - Eigen::Matrix3d::Constant(0.001))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("online training") {
  GcnHyper hyper;
  GcnParams init{identity_layers(hyper.layers), hyper};
  const auto connected = line({0, 50, 100});
  const auto r0 = gcn_train_online(init, connected, within(120));
  CHECK(r0.best.target == connected);
  CHECK(r0.best.max_displacement_m == 0.0);

  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_topology(rng, 8, 500);
    if (is_connected(t, within(120))) continue;
    GcnParams p{random_layers(hyper.layers, rng), hyper};
    const auto r = gcn_train_online(p, t, within(120));
    CHECK(r.best.cluster_count == 1);
    CHECK(r.loss_trace.size() == static_cast<std::size_t>(hyper.online_episodes + 1));
    if (!r.fallback) {
      CHECK(r.best.loss_value == doctest::Approx(r.loss_trace[static_cast<std::size_t>(r.best_episode)]));
    } else {
      CHECK(r.k_star.has_value());
    }
    // determinism
    const auto again = gcn_train_online(p, t, within(120));
    CHECK(again.best.target == r.best.target);
    CHECK(again.loss_trace == r.loss_trace);
  }
}

TEST_CASE("hyperparameter validation") {
  GcnHyper h;
  h.eta = 2.0;
  CHECK_THROWS_AS(h.validate(), Error);
  GcnHyper z;
  z.layers = 0;
  CHECK_THROWS_AS(z.validate(), Error);
  GcnParams bad{identity_layers(2), GcnHyper{}};
  CHECK_THROWS_AS(bad.validate(), Error);
}
