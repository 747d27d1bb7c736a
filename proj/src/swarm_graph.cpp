#include "uavheal/swarm_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uavheal/errors.hpp"

namespace uavheal {

Topology::Topology(std::vector<int> indices, Positions positions)
    : indices_(std::move(indices)), positions_(std::move(positions)) {
  if (indices_.empty()) throw Error(ErrorCode::DegenerateInput, "topology needs at least one row");
  if (static_cast<Eigen::Index>(indices_.size()) != positions_.rows())
    throw Error(ErrorCode::ContractViolation, "index count does not match position rows");
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (indices_[j] <= 0) throw Error(ErrorCode::ContractViolation, "uav indices must be positive");
    if (j > 0 && indices_[j] <= indices_[j - 1])
      throw Error(ErrorCode::ContractViolation, "uav indices must be strictly ascending");
  }
  if (!positions_.allFinite()) throw Error(ErrorCode::Domain, "positions must be finite");
}

Topology Topology::sequential(Positions positions) {
  std::vector<int> idx(static_cast<std::size_t>(positions.rows()));
  std::iota(idx.begin(), idx.end(), 1);
  return Topology(std::move(idx), std::move(positions));
}

std::optional<std::size_t> Topology::row_of(int index) const {
  const auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
  if (it == indices_.end() || *it != index) return std::nullopt;
  return static_cast<std::size_t>(it - indices_.begin());
}

Topology Topology::with_positions(Positions positions) const {
  return Topology(indices_, std::move(positions));
}

Topology Topology::without(const std::vector<int>& removed) const {
  std::vector<int> keep_idx;
  std::vector<Eigen::Index> keep_rows;
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (std::find(removed.begin(), removed.end(), indices_[j]) == removed.end()) {
      keep_idx.push_back(indices_[j]);
      keep_rows.push_back(static_cast<Eigen::Index>(j));
    }
  }
  Positions p(static_cast<Eigen::Index>(keep_rows.size()), 3);
  for (std::size_t r = 0; r < keep_rows.size(); ++r) p.row(static_cast<Eigen::Index>(r)) = positions_.row(keep_rows[r]);
  return Topology(std::move(keep_idx), std::move(p));
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double pair_distance(const Topology& topology, std::size_t j, std::size_t k) {
  return distance(topology.position(j), topology.position(k));
}

std::vector<double> sorted_pair_distances(const Topology& topology) {
  const std::size_t n = topology.size();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) d.push_back(pair_distance(topology, j, k));
  std::sort(d.begin(), d.end());
  return d;
}

Vec3 centroid(const Topology& topology) {
  return topology.positions().colwise().mean().transpose();
}

SwarmGraph::SwarmGraph(Topology topology, Eigen::MatrixXi adjacency)
    : topology_(std::move(topology)), adjacency_(std::move(adjacency)) {
  const auto n = static_cast<Eigen::Index>(topology_.size());
  if (adjacency_.rows() != n || adjacency_.cols() != n)
    throw Error(ErrorCode::ContractViolation, "adjacency shape does not match topology");
  if (adjacency_ != adjacency_.transpose()) throw Error(ErrorCode::ContractViolation, "adjacency must be symmetric");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (adjacency_(j, j) != 0) throw Error(ErrorCode::ContractViolation, "adjacency diagonal must be zero");
    for (Eigen::Index k = 0; k < n; ++k)
      if (adjacency_(j, k) != 0 && adjacency_(j, k) != 1)
        throw Error(ErrorCode::ContractViolation, "adjacency entries must be 0 or 1");
  }
}

int SwarmGraph::max_degree() const {
  return size() == 0 ? 0 : degrees().maxCoeff();
}

std::size_t SwarmGraph::edge_count() const {
  return static_cast<std::size_t>(adjacency_.sum() / 2);
}

SwarmGraph build_graph(const Topology& topology, const LinkPredicate& linked) {
  const auto n = static_cast<Eigen::Index>(topology.size());
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = j + 1; k < n; ++k) {
      if (linked(pair_distance(topology, static_cast<std::size_t>(j), static_cast<std::size_t>(k)))) {
        a(j, k) = 1;
        a(k, j) = 1;
      }
    }
  }
  return SwarmGraph(topology, std::move(a));
}

Eigen::MatrixXi laplacian_exact(const SwarmGraph& graph) {
  Eigen::MatrixXi l = -graph.adjacency();
  l.diagonal() = graph.degrees();
  return l;
}

Eigen::MatrixXd laplacian(const SwarmGraph& graph) {
  return laplacian_exact(graph).cast<double>();
}

std::vector<std::vector<int>> clusters(const SwarmGraph& graph) {
  const std::size_t n = graph.size();
  UnionFind uf(n);
  const auto& a = graph.adjacency();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k)
      if (a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k))) uf.unite(j, k);

  std::vector<std::vector<int>> out;
  std::vector<long> slot(n, -1);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t root = uf.find(j);
    if (slot[root] < 0) {
      slot[root] = static_cast<long>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[root])].push_back(graph.topology().indices()[j]);
  }
  return out;
}

int cluster_count(const SwarmGraph& graph) {
  return static_cast<int>(clusters(graph).size());
}

int cluster_count(const Topology& topology, const LinkPredicate& linked) {
  const std::size_t n = topology.size();
  UnionFind uf(n);
  for (std::size_t j = 0; j < n && uf.components() > 1; ++j)
    for (std::size_t k = j + 1; k < n; ++k)
      if (uf.find(j) != uf.find(k) && linked(pair_distance(topology, j, k))) uf.unite(j, k);
  return static_cast<int>(uf.components());
}

bool is_connected(const Topology& topology, const LinkPredicate& linked) {
  return cluster_count(topology, linked) == 1;
}

std::vector<double> jacobi_eigenvalues(const Eigen::MatrixXd& symmetric, double rel_tol, int max_sweeps) {
  const Eigen::Index n = symmetric.rows();
  if (symmetric.cols() != n) throw Error(ErrorCode::ContractViolation, "eigensolver needs a square matrix");
  if (!(symmetric.array() == symmetric.transpose().array()).all())
    throw Error(ErrorCode::ContractViolation, "eigensolver needs a symmetric matrix");

  Eigen::MatrixXd a = symmetric;
  const double scale = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q)
        if (p != q) s += a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= rel_tol * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a(p,q) (Golub & Van Loan, sym.schur2).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
      }
    }
  }

  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) ev[static_cast<std::size_t>(k)] = a(k, k);
  std::sort(ev.begin(), ev.end());
  return ev;
}

int zero_eig_multiplicity(const Eigen::MatrixXd& laplacian, double tol) {
  if (!(tol > 0.0)) throw Error(ErrorCode::ContractViolation, "tolerance must be positive");
  const auto ev = jacobi_eigenvalues(laplacian);
  return static_cast<int>(std::count_if(ev.begin(), ev.end(), [tol](double v) { return std::abs(v) < tol; }));
}

int zero_eig_multiplicity(const Eigen::MatrixXd& laplacian) {
  const double inf_norm = laplacian.rows() == 0 ? 0.0 : laplacian.cwiseAbs().rowwise().sum().maxCoeff();
  return zero_eig_multiplicity(laplacian, 1e-8 * std::max(1.0, inf_norm));
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1), components_(n) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  --components_;
  return true;
}

}  // namespace uavheal
