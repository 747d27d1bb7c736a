#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "uavheal/errors.hpp"
#include "uavheal/rng.hpp"
#include "uavheal/swarm_graph.hpp"

namespace uavheal {

struct GcoConfig {
  double epsilon = 1.0;  // H = epsilon / ||A_v||_inf; contraction guaranteed for epsilon <= 1
  int max_iterations = 10000;

  void validate() const;
};

struct GcnHyper {
  int layers = 8;                  // Q
  double epsilon = 1.0;            // epsilon*
  double eta = 0.3;                // eta*
  double tau = 100.0;              // Lagrange multiplier, meters per surplus cluster
  double learning_rate = 0.01;     // alpha_meta, shared by online and meta updates
  int online_episodes = 50;        // M
  double coordinate_scale_m = 1000.0;  // gradient steps descend the loss measured in this unit
  int gco_max_iterations = 10000;

  void validate() const;
};

using LayerBlocks = std::vector<Eigen::Matrix3d>;

struct GcnParams {
  LayerBlocks layers;
  GcnHyper hyper;

  void validate() const;
};

LayerBlocks identity_layers(int count);

// Identity plus U[-0.3, 0.3] per entry.
LayerBlocks random_layers(int count, Rng& rng);

// Deterministic random initialisation for a swarm of n nodes, shared by every
// caller that needs a non-meta start for the same (seed, n).
LayerBlocks random_layers_for(int count, std::uint64_t seed, std::size_t n);

// Max absolute row sum.
double infinity_norm(const Eigen::MatrixXd& m);

// H = epsilon / ||A_v||_inf
double step_size(const SwarmGraph& vrg, double epsilon);

// I - H L
Eigen::MatrixXd propagation_matrix(const Eigen::MatrixXd& laplacian, double step);

// X <- (I - H L_v) X
Topology gco_step(const Topology& topology, const Eigen::MatrixXd& laplacian_v, double step);

// max |1 - H lambda| over the nonzero Laplacian eigenvalues of a connected
// VRG: the per-step factor on deviations from the centroid. Above 1 the
// iterates grow without bound.
double gco_contraction_factor(const SwarmGraph& vrg, double epsilon);

struct GcoResult {
  Topology topology;
  int k_star = 0;
};

// Applies gco_step until the graph under `linked` is connected. Throws
// NonConvergence when max_iterations pass or the iterates blow up.
GcoResult gco_iterate(const Topology& topology, const SwarmGraph& vrg, const GcoConfig& config,
                      const LinkPredicate& linked);

struct ForwardCache {
  Topology input;
  Topology output;
  Eigen::RowVector3d shift;        // added to coordinates before the first layer
  Eigen::MatrixXd propagation;     // I - H L_v
  LayerBlocks layers;              // weights used for this pass
  std::vector<Positions> propagated;  // (I - H L_v) X^{q-1}
  std::vector<Positions> pre_activation;  // Z^q
};

struct ForwardPass {
  Topology target;
  ForwardCache cache;
};

// X^q = ReLU((I - H L_v) X^{q-1} Theta^q), with the input translated so every
// coordinate is nonnegative and the output translated back.
ForwardPass gcn_forward(const GcnParams& params, const Topology& topology, const Eigen::MatrixXd& laplacian_v,
                        double step);

struct GcnOutput {
  Topology target;
  int cluster_count = 0;
  double max_displacement_m = 0.0;
  double loss_value = 0.0;
};

// max_i ||out_i - in_i||_2 and the row attaining it (lowest row on ties).
std::pair<double, std::size_t> max_displacement(const Topology& output, const Topology& input);

// tau (C - 1) + max displacement
double gcn_loss(const Topology& output, const Topology& input, const LinkPredicate& linked, double tau);

GcnOutput evaluate_output(Topology output, const Topology& input, const LinkPredicate& linked, double tau);

// Gradient of the loss (meters) with respect to every Theta^q. The cluster
// penalty is piecewise constant in Theta and contributes nothing.
LayerBlocks gcn_backward(const ForwardCache& cache, const GcnOutput& output, const Topology& input, double tau);

// Input prepared for the network: its VRG, Laplacian and step size.
struct GcnProblem {
  Topology input;
  SwarmGraph vrg;
  Eigen::MatrixXd laplacian_v;
  double step = 0.0;
};

GcnProblem prepare_problem(const Topology& input, double eta, double epsilon);

struct LossAndGradient {
  GcnOutput output;
  LayerBlocks gradient;
};

LossAndGradient loss_and_gradient(const GcnParams& params, const GcnProblem& problem, const LinkPredicate& linked);

// theta - lr * grad / coordinate_scale
LayerBlocks descend(const LayerBlocks& theta, const LayerBlocks& gradient, const GcnHyper& hyper);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, LayerBlocks last_finite)
      : Error(ErrorCode::TrainingDiverged, what), last_finite_(std::move(last_finite)) {}
  const LayerBlocks& last_finite() const { return last_finite_; }

 private:
  LayerBlocks last_finite_;
};

struct OnlineResult {
  GcnParams params;
  GcnOutput best;
  bool fallback = false;        // best came from gco_iterate, not the network
  int best_episode = -1;        // -1 when the input was already connected or on fallback
  std::optional<int> k_star;    // set on fallback
  std::vector<double> loss_trace;  // loss before each of the M updates, then after the last
};

OnlineResult gcn_train_online(const GcnParams& init, const Topology& topology, const LinkPredicate& linked,
                              int episodes, double learning_rate);

// Uses init.hyper.online_episodes and init.hyper.learning_rate.
OnlineResult gcn_train_online(const GcnParams& init, const Topology& topology, const LinkPredicate& linked);

}  // namespace uavheal
