#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace uavheal {

using Vec3 = Eigen::Vector3d;
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using LinkPredicate = std::function<bool(double)>;

// Ordered rows of (uav index, position). Indices are strictly ascending, so
// row j always holds the j-th smallest live index.
class Topology {
 public:
  Topology(std::vector<int> indices, Positions positions);

  // Indices 1..n in row order.
  static Topology sequential(Positions positions);

  std::size_t size() const { return indices_.size(); }
  const std::vector<int>& indices() const { return indices_; }
  const Positions& positions() const { return positions_; }
  Vec3 position(std::size_t row) const { return positions_.row(static_cast<Eigen::Index>(row)).transpose(); }

  std::optional<std::size_t> row_of(int index) const;

  // Same index set, new coordinates.
  Topology with_positions(Positions positions) const;

  // Rows whose index is not in `removed`.
  Topology without(const std::vector<int>& removed) const;

  bool operator==(const Topology& other) const {
    return indices_ == other.indices_ && positions_ == other.positions_;
  }

 private:
  std::vector<int> indices_;
  Positions positions_;
};

double distance(const Vec3& a, const Vec3& b);
double pair_distance(const Topology& topology, std::size_t j, std::size_t k);

// Ascending multiset of all n(n-1)/2 pairwise distances.
std::vector<double> sorted_pair_distances(const Topology& topology);

Vec3 centroid(const Topology& topology);

// Undirected 0/1 graph over a topology's rows.
class SwarmGraph {
 public:
  SwarmGraph(Topology topology, Eigen::MatrixXi adjacency);

  const Topology& topology() const { return topology_; }
  const Eigen::MatrixXi& adjacency() const { return adjacency_; }
  std::size_t size() const { return topology_.size(); }

  Eigen::VectorXi degrees() const { return adjacency_.rowwise().sum(); }
  // ||A||_inf, i.e. the maximum degree.
  int max_degree() const;
  std::size_t edge_count() const;

 private:
  Topology topology_;
  Eigen::MatrixXi adjacency_;
};

SwarmGraph build_graph(const Topology& topology, const LinkPredicate& linked);

// L = D - A
Eigen::MatrixXi laplacian_exact(const SwarmGraph& graph);
Eigen::MatrixXd laplacian(const SwarmGraph& graph);

// Connected components as lists of uav indices; each list ascending, lists
// ordered by their smallest index.
std::vector<std::vector<int>> clusters(const SwarmGraph& graph);
int cluster_count(const SwarmGraph& graph);

// Union-find over all pairs without materialising the adjacency matrix.
int cluster_count(const Topology& topology, const LinkPredicate& linked);
bool is_connected(const Topology& topology, const LinkPredicate& linked);

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
// Stops once the off-diagonal Frobenius norm drops below rel_tol * ||M||_F.
std::vector<double> jacobi_eigenvalues(const Eigen::MatrixXd& symmetric, double rel_tol = 1e-12,
                                       int max_sweeps = 100);

// Number of eigenvalues with |lambda| < tol.
int zero_eig_multiplicity(const Eigen::MatrixXd& laplacian, double tol);

// tol = 1e-8 * max(1, ||L||_inf)
int zero_eig_multiplicity(const Eigen::MatrixXd& laplacian);

// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);
  std::size_t components() const { return components_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::size_t components_;
};

}  // namespace uavheal
