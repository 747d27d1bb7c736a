#include "uavheal/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uavheal/vrg.hpp"

namespace uavheal {

void GcoConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Domain, "epsilon must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::Domain, "max_iterations must be at least 1");
}

void GcnHyper::validate() const {
  if (layers < 1) throw Error(ErrorCode::Domain, "the network needs at least one layer");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::Domain, "epsilon must be positive");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorCode::Domain, "eta must lie in [0, 1]");
  if (!(tau > 0.0)) throw Error(ErrorCode::Domain, "tau must be positive");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::Domain, "learning rate must be nonnegative");
  if (online_episodes < 1) throw Error(ErrorCode::Domain, "online episodes must be at least 1");
  if (!(coordinate_scale_m > 0.0)) throw Error(ErrorCode::Domain, "coordinate scale must be positive");
  if (gco_max_iterations < 1) throw Error(ErrorCode::Domain, "gco_max_iterations must be at least 1");
}

void GcnParams::validate() const {
  hyper.validate();
  if (static_cast<int>(layers.size()) != hyper.layers)
    throw Error(ErrorCode::ContractViolation, "layer block count differs from Q");
  for (const auto& b : layers)
    if (!b.allFinite()) throw Error(ErrorCode::ContractViolation, "layer weights must be finite");
}

LayerBlocks identity_layers(int count) {
  return LayerBlocks(static_cast<std::size_t>(count), Eigen::Matrix3d::Identity());
}

LayerBlocks random_layers(int count, Rng& rng) {
  LayerBlocks out;
  out.reserve(static_cast<std::size_t>(count));
  for (int q = 0; q < count; ++q) {
    Eigen::Matrix3d b = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) b(r, c) += rng.uniform(-0.3, 0.3);
    out.push_back(b);
  }
  return out;
}

LayerBlocks random_layers_for(int count, std::uint64_t seed, std::size_t n) {
  Rng rng(mix_seed(seed, 0x5EED0000ULL + n));
  return random_layers(count, rng);
}

double infinity_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double step_size(const SwarmGraph& vrg, double epsilon) {
  const int inf_norm = vrg.max_degree();
  if (inf_norm == 0) throw Error(ErrorCode::DegenerateInput, "edgeless virtual graph has no step size");
  return epsilon / inf_norm;
}

Eigen::MatrixXd propagation_matrix(const Eigen::MatrixXd& laplacian, double step) {
  require(laplacian.rows() == laplacian.cols(), "laplacian must be square");
  return Eigen::MatrixXd::Identity(laplacian.rows(), laplacian.cols()) - step * laplacian;
}

Topology gco_step(const Topology& topology, const Eigen::MatrixXd& laplacian_v, double step) {
  require(laplacian_v.rows() == static_cast<Eigen::Index>(topology.size()) &&
              laplacian_v.cols() == laplacian_v.rows(),
          "laplacian dimension does not match topology");
  require(step > 0.0, "step size must be positive");
  Positions next = topology.positions() - step * (laplacian_v * topology.positions());
  return topology.with_positions(std::move(next));
}

namespace {

double spread(const Positions& p) {
  const Eigen::RowVector3d c = p.colwise().mean();
  return (p.rowwise() - c).rowwise().norm().maxCoeff();
}

}  // namespace

double gco_contraction_factor(const SwarmGraph& vrg, double epsilon) {
  if (vrg.size() < 2) throw Error(ErrorCode::DegenerateInput, "contraction factor needs two or more nodes");
  if (cluster_count(vrg) != 1) throw Error(ErrorCode::DisconnectedVrg, "VRG is not connected");
  const double h = step_size(vrg, epsilon);
  const std::vector<double> eig = jacobi_eigenvalues(laplacian(vrg));
  double factor = 0.0;
  for (std::size_t k = 1; k < eig.size(); ++k) factor = std::max(factor, std::abs(1.0 - h * eig[k]));
  return factor;
}

GcoResult gco_iterate(const Topology& topology, const SwarmGraph& vrg, const GcoConfig& config,
                      const LinkPredicate& linked) {
  config.validate();
  require(vrg.size() == topology.size(), "virtual graph does not match topology");
  if (is_connected(topology, linked)) return {topology, 0};
  if (cluster_count(vrg) != 1) throw Error(ErrorCode::DisconnectedVrg, "gco_iterate needs a connected virtual graph");

  const double step = step_size(vrg, config.epsilon);
  const Eigen::MatrixXd l = laplacian(vrg);
  const double initial_spread = spread(topology.positions());
  Positions x = topology.positions();
  for (int k = 1; k <= config.max_iterations; ++k) {
    x = x - step * (l * x);
    if (!x.allFinite() || spread(x) > 1e6 * initial_spread)
      throw Error(ErrorCode::NonConvergence, "graph convolution iterates diverged");
    Topology candidate = topology.with_positions(x);
    if (is_connected(candidate, linked)) return {std::move(candidate), k};
  }
  throw Error(ErrorCode::NonConvergence, "graph convolution did not connect the swarm within max_iterations");
}

ForwardPass gcn_forward(const GcnParams& params, const Topology& topology, const Eigen::MatrixXd& laplacian_v,
                        double step) {
  require(!params.layers.empty(), "network has no layers");
  const auto n = static_cast<Eigen::Index>(topology.size());
  require(laplacian_v.rows() == n && laplacian_v.cols() == n, "laplacian dimension does not match topology");

  ForwardCache cache{topology, topology, Eigen::RowVector3d::Zero(), propagation_matrix(laplacian_v, step),
                     params.layers, {}, {}};
  const Eigen::RowVector3d lowest = topology.positions().colwise().minCoeff();
  cache.shift = (-lowest).cwiseMax(0.0);

  Positions x = topology.positions().rowwise() + cache.shift;
  require((x.array() >= 0.0).all(), "network input must be nonnegative after the shift");
  cache.propagated.reserve(params.layers.size());
  cache.pre_activation.reserve(params.layers.size());
  for (const auto& theta : params.layers) {
    Positions p = cache.propagation * x;
    Positions z = p * theta;
    x = z.cwiseMax(0.0);
    cache.propagated.push_back(std::move(p));
    cache.pre_activation.push_back(std::move(z));
  }
  Topology target = topology.with_positions(x.rowwise() - cache.shift);
  cache.output = target;
  return {std::move(target), std::move(cache)};
}

std::pair<double, std::size_t> max_displacement(const Topology& output, const Topology& input) {
  require(output.indices() == input.indices(), "output and input index sets differ");
  double best = -1.0;
  std::size_t row = 0;
  for (std::size_t j = 0; j < input.size(); ++j) {
    const double d = distance(output.position(j), input.position(j));
    if (d > best) {
      best = d;
      row = j;
    }
  }
  return {best, row};
}

double gcn_loss(const Topology& output, const Topology& input, const LinkPredicate& linked, double tau) {
  const int c = cluster_count(output, linked);
  return tau * (c - 1) + max_displacement(output, input).first;
}

GcnOutput evaluate_output(Topology output, const Topology& input, const LinkPredicate& linked, double tau) {
  GcnOutput out{std::move(output), 0, 0.0, 0.0};
  out.cluster_count = cluster_count(out.target, linked);
  out.max_displacement_m = max_displacement(out.target, input).first;
  out.loss_value = tau * (out.cluster_count - 1) + out.max_displacement_m;
  return out;
}

LayerBlocks gcn_backward(const ForwardCache& cache, const GcnOutput& output, const Topology& input, double /*tau*/) {
  require(cache.output == output.target && cache.input == input, "stale forward cache");
  const std::size_t depth = cache.layers.size();
  const auto n = static_cast<Eigen::Index>(input.size());

  LayerBlocks grad(depth, Eigen::Matrix3d::Zero());
  const auto [disp, row] = max_displacement(output.target, input);
  if (!(disp > 0.0)) return grad;

  Positions upstream = Positions::Zero(n, 3);
  upstream.row(static_cast<Eigen::Index>(row)) =
      (output.target.position(row) - input.position(row)).transpose() / disp;

  for (std::size_t q = depth; q-- > 0;) {
    const Positions& z = cache.pre_activation[q];
    const Positions g = (z.array() > 0.0).select(upstream, 0.0);
    grad[q] = cache.propagated[q].transpose() * g;
    if (q > 0) upstream = cache.propagation.transpose() * (g * cache.layers[q].transpose());
  }
  return grad;
}

GcnProblem prepare_problem(const Topology& input, double eta, double epsilon) {
  const auto vd = virtual_distance(input, eta);
  SwarmGraph vrg = build_vrg(input, vd.d_v_m);
  Eigen::MatrixXd l = laplacian(vrg);
  const double step = step_size(vrg, epsilon);
  return GcnProblem{input, std::move(vrg), std::move(l), step};
}

LossAndGradient loss_and_gradient(const GcnParams& params, const GcnProblem& problem, const LinkPredicate& linked) {
  auto pass = gcn_forward(params, problem.input, problem.laplacian_v, problem.step);
  GcnOutput out = evaluate_output(std::move(pass.target), problem.input, linked, params.hyper.tau);
  LayerBlocks grad = gcn_backward(pass.cache, out, problem.input, params.hyper.tau);
  return {std::move(out), std::move(grad)};
}

LayerBlocks descend(const LayerBlocks& theta, const LayerBlocks& gradient, const GcnHyper& hyper) {
  require(theta.size() == gradient.size(), "gradient depth differs from parameter depth");
  LayerBlocks next = theta;
  const double rate = hyper.learning_rate / hyper.coordinate_scale_m;
  for (std::size_t q = 0; q < next.size(); ++q) next[q] -= rate * gradient[q];
  return next;
}

OnlineResult gcn_train_online(const GcnParams& init, const Topology& topology, const LinkPredicate& linked,
                              int episodes, double learning_rate) {
  init.validate();
  if (episodes < 1) throw Error(ErrorCode::Domain, "online training needs at least one episode");

  OnlineResult result{init, evaluate_output(topology, topology, linked, init.hyper.tau), false, -1, std::nullopt, {}};
  if (result.best.cluster_count == 1) return result;

  GcnParams params = init;
  params.hyper.learning_rate = learning_rate;
  const GcnProblem problem = prepare_problem(topology, params.hyper.eta, params.hyper.epsilon);

  std::optional<GcnOutput> best;
  for (int e = 0; e <= episodes; ++e) {
    auto pass = gcn_forward(params, problem.input, problem.laplacian_v, problem.step);
    GcnOutput out = evaluate_output(std::move(pass.target), problem.input, linked, params.hyper.tau);
    if (!std::isfinite(out.loss_value) || !out.target.positions().allFinite())
      throw TrainingDiverged("online loss became non-finite", params.layers);
    result.loss_trace.push_back(out.loss_value);

    if (out.cluster_count == 1 && (!best || out.max_displacement_m < best->max_displacement_m)) {
      result.params = params;
      result.best_episode = e;
      best = out;
    }
    if (e == episodes) break;

    const LayerBlocks grad = gcn_backward(pass.cache, out, problem.input, params.hyper.tau);
    LayerBlocks next = descend(params.layers, grad, params.hyper);
    for (const auto& b : next)
      if (!b.allFinite()) throw TrainingDiverged("online gradient step produced non-finite weights", params.layers);
    params.layers = std::move(next);
  }

  if (best) {
    result.best = std::move(*best);
    return result;
  }

  // No episode produced a connected output: fall back to the plain contraction.
  result.params = params;
  const GcoConfig gco{params.hyper.epsilon, params.hyper.gco_max_iterations};
  GcoResult g = gco_iterate(problem.input, problem.vrg, gco, linked);
  result.best = evaluate_output(std::move(g.topology), problem.input, linked, params.hyper.tau);
  result.fallback = true;
  result.k_star = g.k_star;
  return result;
}

OnlineResult gcn_train_online(const GcnParams& init, const Topology& topology, const LinkPredicate& linked) {
  return gcn_train_online(init, topology, linked, init.hyper.online_episodes, init.hyper.learning_rate);
}

}  // namespace uavheal
