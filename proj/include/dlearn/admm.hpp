#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dlearn/graph.hpp"

namespace dlearn {

/// Strong convexity (m_f) and gradient Lipschitz (M_f) constants.
struct CostRegularity {
  double strong_convexity = 0.0;
  double lipschitz = 0.0;
};

/// f(s) = 0.5 s^T Q s - b^T s + constant.
struct QuadraticForm {
  Matrix hessian;
  Vector linear;
  double constant = 0.0;
};

/// Data a node needs for its local primal update:
///   argmin_s f_i(s) + v^T s + c * sum_j || s - (s_i + s_j)/2 ||^2
/// `anchor_sum` is sum_j (s_i + s_j)/2 over the received neighbor values.
struct LocalSubproblem {
  Vector multiplier;
  Vector anchor_sum;
  double penalty = 1.0;
  std::size_t degree = 0;
  /// Current local estimate, usable as a warm start.
  Vector current;
};

/// Gradient of the smooth part of the local subproblem objective, given the gradient of f_i.
Vector subproblem_gradient(const Vector& cost_gradient, const LocalSubproblem& sub,
                           const Vector& s);

/// Per-node cost f_i known only to node i.
class LocalCost {
 public:
  virtual ~LocalCost() = default;

  virtual std::size_t dimension() const = 0;
  virtual double evaluate(const Vector& s) const = 0;
  /// Empty when f_i is not differentiable.
  virtual std::optional<Vector> gradient(const Vector& /*s*/) const { return std::nullopt; }
  virtual Vector solve_local(const LocalSubproblem& sub) = 0;

  virtual std::optional<CostRegularity> regularity() const { return std::nullopt; }
  /// Smooth quadratic part, when f_i = quadratic + l1_weight() * ||s||_1.
  virtual std::optional<QuadraticForm> quadratic_form() const { return std::nullopt; }
  virtual double l1_weight() const { return 0.0; }
};

struct NodeState {
  Vector s;
  Vector v;  // aggregated multiplier v_i = 2 sum_e vbar_e
};

struct LinkNoise {
  enum class Kind { none, awgn };
  Kind kind = Kind::none;
  double variance = 0.0;
  std::uint64_t seed = 0;

  bool active() const { return kind == Kind::awgn && variance > 0.0; }

  static LinkNoise none() { return {}; }
  static LinkNoise awgn(double variance, std::uint64_t seed) {
    return {Kind::awgn, variance, seed};
  }
};

/// Additive Gaussian corruption of values received over links.
/// One stream per receiving node, consumed in neighbor order, so results do
/// not depend on the order nodes are processed in.
class LinkChannel {
 public:
  LinkChannel(const NetworkGraph& graph, LinkNoise noise);

  /// received(:, e) = sent(:, destination(e)) + noise seen by source(e).
  Matrix transmit(const Matrix& sent);
  /// received(:, e) = per_edge(:, reverse of e) + noise seen by source(e).
  Matrix transmit_edges(const Matrix& per_edge);
  const LinkNoise& noise() const { return noise_; }

 private:
  void corrupt(Matrix& received);

  const NetworkGraph* graph_;
  LinkNoise noise_;
  std::vector<std::mt19937_64> streams_;
};

struct AdmmSettings {
  double penalty = 1.0;
  LinkNoise noise{};
  bool track_edge_multipliers = false;
};

/// Synchronous in-network ADMM. All node states and multipliers start at zero.
///
/// One step(): every node solves its local subproblem from the previous
/// snapshot, estimates are exchanged once (possibly corrupted), and the same
/// received values drive the multiplier update and the next primal update.
class ConsensusAdmm {
 public:
  ConsensusAdmm(const NetworkGraph& graph, std::vector<LocalCost*> costs, AdmmSettings settings);

  void step();

  std::size_t iteration() const { return iteration_; }
  std::size_t dimension() const { return p_; }
  const NetworkGraph& graph() const { return *graph_; }
  const AdmmSettings& settings() const { return settings_; }

  /// p x n matrix; column i is s_i.
  const Matrix& estimates() const { return s_; }
  /// p x n matrix; column i is v_i.
  const Matrix& multipliers() const { return v_; }
  /// p x L matrix of per-edge multipliers; empty unless tracking is on.
  const Matrix& edge_multipliers() const { return vbar_; }
  std::vector<NodeState> states() const;

  double objective() const;

 private:
  const NetworkGraph* graph_;
  std::vector<LocalCost*> costs_;
  AdmmSettings settings_;
  std::size_t p_;
  std::size_t iteration_ = 0;
  Matrix s_;
  Matrix v_;
  Matrix vbar_;
  Matrix received_;  // p x L, value of s_j as heard by i on edge (i, j)
  LinkChannel channel_;
};

struct TraceRecord {
  std::size_t iteration = 0;
  double consensus_error = 0.0;
  double objective = 0.0;
  double distance_to_reference = 0.0;  // NaN without a reference
};

struct Snapshot {
  Matrix estimates;         // p x n
  Matrix edge_multipliers;  // p x L
};

struct RunTrace {
  double penalty = 0.0;
  std::uint64_t seed = 0;
  std::string graph_id;
  std::vector<TraceRecord> records;  // iterations + 1 entries, k = 0 included
  std::vector<Snapshot> snapshots;   // filled when requested
  std::vector<NodeState> final_states;
  Matrix final_estimates;
};

struct RunOptions {
  double penalty = 1.0;
  std::size_t iterations = 100;
  LinkNoise noise{};
  bool track_edge_multipliers = false;
  bool keep_snapshots = false;
  std::optional<Vector> reference;
  std::string graph_id;
};

/// Throws ParameterError if c <= 0, GraphError if the graph is disconnected,
/// NodeSolveError if a local solve fails.
RunTrace admm_run(const NetworkGraph& graph, const std::vector<LocalCost*>& costs,
                  const RunOptions& options);

/// max over edges of ||s_i - s_j||.
double consensus_error(const NetworkGraph& graph, const Matrix& estimates);
double consensus_error(const NetworkGraph& graph, const std::vector<NodeState>& states);

/// max_i ||s_i - reference||.
double max_distance(const Matrix& estimates, const Vector& reference);

/// vbar_e += (c/2)(s_i - s_j_received) for every directed edge e = (i, j).
void edge_multiplier_step(const NetworkGraph& graph, const Matrix& estimates,
                          const Matrix& received, double penalty, Matrix& edge_multipliers);
/// Noise-free variant: received values equal the neighbors' estimates.
void edge_multiplier_step(const NetworkGraph& graph, const Matrix& estimates, double penalty,
                          Matrix& edge_multipliers);

/// v_i = 2 * sum over edges leaving i of vbar_e.
Matrix aggregate_edge_multipliers(const NetworkGraph& graph, const Matrix& edge_multipliers);

struct OracleOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 200000;
};

/// Minimizer of sum_i f_i. Closed form for quadratic costs, accelerated
/// proximal gradient for quadratic + l1 costs, gradient descent with
/// backtracking for other differentiable costs. Throws ConvergenceError on
/// budget exhaustion and ParameterError when no route applies.
Vector centralized_oracle(const std::vector<const LocalCost*>& costs,
                          const OracleOptions& options = {});
Vector centralized_oracle(const std::vector<LocalCost*>& costs, const OracleOptions& options = {});

}  // namespace dlearn
