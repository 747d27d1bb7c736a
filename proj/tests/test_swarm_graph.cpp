#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "uavheal/errors.hpp"
#include "uavheal/rng.hpp"
#include "uavheal/swarm_graph.hpp"

using namespace uavheal;

namespace {

Topology line(std::initializer_list<double> xs) {
  Positions p(static_cast<Eigen::Index>(xs.size()), 3);
  p.setZero();
  Eigen::Index r = 0;
  for (double x : xs) p(r++, 0) = x;
  return Topology::sequential(p);
}

LinkPredicate within(double m) {
  return [m](double d) { return d <= m; };
}

// Depth-first component count from the adjacency, independent of UnionFind.
int dfs_components(const Eigen::MatrixXi& a) {
  const auto n = a.rows();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  int count = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++count;
    std::vector<Eigen::Index> stack{s};
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (Eigen::Index v = 0; v < n; ++v)
        if (a(u, v) && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
    }
  }
  return count;
}

}  // namespace

TEST_CASE("Topology validation") {
  CHECK_THROWS_AS(Topology({}, Positions(0, 3)), Error);
  CHECK_THROWS_AS(Topology({1, 2}, Positions::Zero(1, 3)), Error);
  CHECK_THROWS_AS(Topology({2, 1}, Positions::Zero(2, 3)), Error);
  CHECK_THROWS_AS(Topology({0, 1}, Positions::Zero(2, 3)), Error);
  Positions bad = Positions::Zero(1, 3);
  bad(0, 1) = NAN;
  CHECK_THROWS_AS(Topology::sequential(bad), Error);

  auto t = line({0, 100, 250});
  CHECK(t.row_of(2) == 1u);
  CHECK_FALSE(t.row_of(9).has_value());
  auto w = t.without({2});
  CHECK(w.indices() == std::vector<int>{1, 3});
  CHECK(w.position(1).x() == 250.0);
}

TEST_CASE("centroid") {
  CHECK(centroid(line({5})).isApprox(Vec3(5, 0, 0)));
  CHECK(centroid(line({0, 2})).isApprox(Vec3(1, 0, 0)));
  Rng rng(3);
  Positions p(6, 3);
  for (int i = 0; i < 18; ++i) p(i / 3, i % 3) = rng.uniform(-50, 50);
  const Vec3 shift(3, -4, 12);
  Positions q = p.rowwise() + shift.transpose();
  CHECK((centroid(Topology::sequential(q)) - centroid(Topology::sequential(p)) - shift).norm() < 1e-12);
}

TEST_CASE("graph construction and Laplacian") {
  auto g = build_graph(line({0, 50}), within(120));
  CHECK(g.edge_count() == 1);
  auto single = build_graph(line({0}), within(120));
  CHECK(single.adjacency().rows() == 1);
  CHECK(single.adjacency()(0, 0) == 0);

  Eigen::MatrixXi want(2, 2);
  want << 1, -1, -1, 1;
  CHECK(laplacian_exact(g) == want);
  auto empty = build_graph(line({0, 500, 1000}), within(120));
  CHECK(laplacian_exact(empty).isZero());

  auto three = build_graph(line({0, 100, 250}), within(120));
  CHECK(clusters(three) == std::vector<std::vector<int>>{{1, 2}, {3}});
  CHECK(cluster_count(three) == 2);
  CHECK(cluster_count(build_graph(line({0, 1, 2, 3}), within(1e9))) == 1);
}

TEST_CASE("Jacobi eigenvalues") {
  Eigen::MatrixXd l(2, 2);
  l << 1, -1, -1, 1;
  auto eig = jacobi_eigenvalues(l);
  CHECK(eig[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(eig[1] == doctest::Approx(2.0));
  CHECK(zero_eig_multiplicity(l) == 1);
  CHECK(zero_eig_multiplicity(Eigen::MatrixXd::Zero(5, 5)) == 5);
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 0, 0;
  CHECK_THROWS_AS(jacobi_eigenvalues(asym), Error);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(15));
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.uniform(-10, 10);
    auto ours = jacobi_eigenvalues(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(m, Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i) CHECK(std::abs(ours[static_cast<std::size_t>(i)] - ref.eigenvalues()[i]) < 1e-9);
  }
}

TEST_CASE("property: components equal zero-eigenvalue multiplicity") {
  Rng rng(2024);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    Positions p(n, 3);
    for (int i = 0; i < n; ++i) p.row(i) << rng.uniform(0, 400), rng.uniform(0, 400), rng.uniform(0, 50);
    const auto linked = within(rng.uniform(50, 250));
    const auto g = build_graph(Topology::sequential(p), linked);
    const auto l = laplacian(g);
    CHECK((l.rowwise().sum().array().abs() < 1e-12).all());
    for (double e : jacobi_eigenvalues(l)) CHECK(e > -1e-9);
    const int uf = cluster_count(g);
    CHECK(uf == dfs_components(g.adjacency()));
    CHECK(uf == cluster_count(g.topology(), linked));
    if (uf != zero_eig_multiplicity(l)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("pairwise distances") {
  auto d = sorted_pair_distances(line({0, 100, 250}));
  CHECK(d == std::vector<double>{100, 150, 250});
  UnionFind uf(4);
  CHECK(uf.unite(0, 1));
  CHECK_FALSE(uf.unite(1, 0));
  CHECK(uf.components() == 3);
}
