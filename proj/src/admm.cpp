#include "dlearn/admm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dlearn/errors.hpp"
#include "dlearn/prox.hpp"

namespace dlearn {

Vector subproblem_gradient(const Vector& cost_gradient, const LocalSubproblem& sub,
                           const Vector& s) {
  return cost_gradient + sub.multiplier +
         2.0 * sub.penalty * (static_cast<double>(sub.degree) * s - sub.anchor_sum);
}

LinkChannel::LinkChannel(const NetworkGraph& graph, LinkNoise noise)
    : graph_(&graph), noise_(noise) {
  if (noise_.variance < 0.0) throw ParameterError("link noise variance must be >= 0");
  if (noise_.active()) {
    streams_.reserve(graph.node_count());
    for (std::size_t i = 0; i < graph.node_count(); ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(noise_.seed),
                        static_cast<std::uint32_t>(noise_.seed >> 32),
                        static_cast<std::uint32_t>(i), 0x5eedu};
      streams_.emplace_back(seq);
    }
  }
}

Matrix LinkChannel::transmit(const Matrix& sent) {
  const auto& dir = graph_->directed_edges();
  Matrix received(sent.rows(), static_cast<Eigen::Index>(dir.size()));
  for (std::size_t e = 0; e < dir.size(); ++e) {
    received.col(static_cast<Eigen::Index>(e)) = sent.col(static_cast<Eigen::Index>(dir[e].destination));
  }
  corrupt(received);
  return received;
}

Matrix LinkChannel::transmit_edges(const Matrix& per_edge) {
  const auto& dir = graph_->directed_edges();
  Matrix received(per_edge.rows(), static_cast<Eigen::Index>(dir.size()));
  for (std::size_t e = 0; e < dir.size(); ++e) {
    const auto back = graph_->directed_index(dir[e].destination, dir[e].source);
    received.col(static_cast<Eigen::Index>(e)) = per_edge.col(static_cast<Eigen::Index>(back));
  }
  corrupt(received);
  return received;
}

void LinkChannel::corrupt(Matrix& received) {
  if (!noise_.active()) return;
  const double sd = std::sqrt(noise_.variance);
  std::size_t e = 0;
  for (std::size_t i = 0; i < graph_->node_count(); ++i) {
    std::normal_distribution<double> gauss(0.0, sd);
    auto& rng = streams_[i];
    for (std::size_t k = 0; k < graph_->degree(i); ++k, ++e) {
      for (Eigen::Index r = 0; r < received.rows(); ++r) {
        received(r, static_cast<Eigen::Index>(e)) += gauss(rng);
      }
    }
  }
}

ConsensusAdmm::ConsensusAdmm(const NetworkGraph& graph, std::vector<LocalCost*> costs,
                             AdmmSettings settings)
    : graph_(&graph),
      costs_(std::move(costs)),
      settings_(settings),
      p_(0),
      channel_(graph, settings.noise) {
  if (!(settings_.penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  if (costs_.size() != graph.node_count()) {
    throw ParameterError("expected one local cost per node");
  }
  if (costs_.empty()) throw ParameterError("empty network");
  p_ = costs_.front()->dimension();
  for (const auto* cost : costs_) {
    if (cost == nullptr || cost->dimension() != p_) {
      throw ParameterError("all local costs must share the same dimension");
    }
  }
  const auto n = static_cast<Eigen::Index>(graph.node_count());
  const auto L = static_cast<Eigen::Index>(graph.directed_edge_count());
  const auto p = static_cast<Eigen::Index>(p_);
  s_ = Matrix::Zero(p, n);
  v_ = Matrix::Zero(p, n);
  received_ = Matrix::Zero(p, L);
  if (settings_.track_edge_multipliers) vbar_ = Matrix::Zero(p, L);
}

void ConsensusAdmm::step() {
  const std::size_t n = graph_->node_count();
  const double c = settings_.penalty;
  Matrix next(s_.rows(), s_.cols());

  std::size_t e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    LocalSubproblem sub;
    sub.multiplier = v_.col(col);
    sub.anchor_sum = Vector::Zero(s_.rows());
    sub.penalty = c;
    sub.degree = graph_->degree(i);
    sub.current = s_.col(col);
    for (std::size_t k = 0; k < sub.degree; ++k, ++e) {
      sub.anchor_sum += 0.5 * (s_.col(col) + received_.col(static_cast<Eigen::Index>(e)));
    }
    try {
      next.col(col) = costs_[i]->solve_local(sub);
    } catch (const std::exception& ex) {
      throw NodeSolveError(i, iteration_ + 1, ex.what());
    }
    if (!next.col(col).allFinite()) {
      throw NodeSolveError(i, iteration_ + 1, "local solve returned a non-finite estimate");
    }
  }
  s_ = std::move(next);
  received_ = channel_.transmit(s_);

  e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < graph_->degree(i); ++k, ++e) {
      const auto ec = static_cast<Eigen::Index>(e);
      Vector diff = s_.col(col) - received_.col(ec);
      v_.col(col) += c * diff;
      if (settings_.track_edge_multipliers) vbar_.col(ec) += (0.5 * c) * diff;
    }
  }
  ++iteration_;
}

std::vector<NodeState> ConsensusAdmm::states() const {
  std::vector<NodeState> out(graph_->node_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].s = s_.col(static_cast<Eigen::Index>(i));
    out[i].v = v_.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

double ConsensusAdmm::objective() const {
  double total = 0.0;
  for (std::size_t i = 0; i < costs_.size(); ++i) {
    total += costs_[i]->evaluate(s_.col(static_cast<Eigen::Index>(i)));
  }
  return total;
}

double consensus_error(const NetworkGraph& graph, const Matrix& estimates) {
  double worst = 0.0;
  for (const auto& [a, b] : graph.edges()) {
    worst = std::max(worst, (estimates.col(static_cast<Eigen::Index>(a)) -
                             estimates.col(static_cast<Eigen::Index>(b)))
                                .norm());
  }
  return worst;
}

double consensus_error(const NetworkGraph& graph, const std::vector<NodeState>& states) {
  if (states.empty()) return 0.0;
  Matrix est(states.front().s.size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) est.col(static_cast<Eigen::Index>(i)) = states[i].s;
  return consensus_error(graph, est);
}

double max_distance(const Matrix& estimates, const Vector& reference) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < estimates.cols(); ++i) {
    worst = std::max(worst, (estimates.col(i) - reference).norm());
  }
  return worst;
}

void edge_multiplier_step(const NetworkGraph& graph, const Matrix& estimates,
                          const Matrix& received, double penalty, Matrix& edge_multipliers) {
  const auto& dir = graph.directed_edges();
  for (std::size_t e = 0; e < dir.size(); ++e) {
    const auto ec = static_cast<Eigen::Index>(e);
    edge_multipliers.col(ec) +=
        (0.5 * penalty) * (estimates.col(static_cast<Eigen::Index>(dir[e].source)) - received.col(ec));
  }
}

void edge_multiplier_step(const NetworkGraph& graph, const Matrix& estimates, double penalty,
                          Matrix& edge_multipliers) {
  const auto& dir = graph.directed_edges();
  Matrix received(estimates.rows(), static_cast<Eigen::Index>(dir.size()));
  for (std::size_t e = 0; e < dir.size(); ++e) {
    received.col(static_cast<Eigen::Index>(e)) = estimates.col(static_cast<Eigen::Index>(dir[e].destination));
  }
  edge_multiplier_step(graph, estimates, received, penalty, edge_multipliers);
}

Matrix aggregate_edge_multipliers(const NetworkGraph& graph, const Matrix& edge_multipliers) {
  Matrix v = Matrix::Zero(edge_multipliers.rows(), static_cast<Eigen::Index>(graph.node_count()));
  const auto& dir = graph.directed_edges();
  for (std::size_t e = 0; e < dir.size(); ++e) {
    v.col(static_cast<Eigen::Index>(dir[e].source)) += 2.0 * edge_multipliers.col(static_cast<Eigen::Index>(e));
  }
  return v;
}

RunTrace admm_run(const NetworkGraph& graph, const std::vector<LocalCost*>& costs,
                  const RunOptions& options) {
  if (!(options.penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  if (!graph.connected()) throw GraphError("ADMM requires a connected graph");

  AdmmSettings settings;
  settings.penalty = options.penalty;
  settings.noise = options.noise;
  settings.track_edge_multipliers = options.track_edge_multipliers || options.keep_snapshots;
  ConsensusAdmm engine(graph, costs, settings);

  RunTrace trace;
  trace.penalty = options.penalty;
  trace.seed = options.noise.seed;
  trace.graph_id = options.graph_id;
  trace.records.reserve(options.iterations + 1);

  auto record = [&] {
    TraceRecord rec;
    rec.iteration = engine.iteration();
    rec.consensus_error = consensus_error(graph, engine.estimates());
    rec.objective = engine.objective();
    rec.distance_to_reference = options.reference
                                    ? max_distance(engine.estimates(), *options.reference)
                                    : std::numeric_limits<double>::quiet_NaN();
    trace.records.push_back(rec);
    if (options.keep_snapshots) {
      trace.snapshots.push_back({engine.estimates(), engine.edge_multipliers()});
    }
  };

  record();
  for (std::size_t k = 0; k < options.iterations; ++k) {
    engine.step();
    record();
  }
  trace.final_states = engine.states();
  trace.final_estimates = engine.estimates();
  return trace;
}

namespace {

Vector oracle_quadratic(const std::vector<const LocalCost*>& costs) {
  const std::size_t p = costs.front()->dimension();
  Matrix Q = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Vector b = Vector::Zero(static_cast<Eigen::Index>(p));
  for (const auto* cost : costs) {
    auto form = cost->quadratic_form();
    Q += form->hessian;
    b += form->linear;
  }
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  return Q.completeOrthogonalDecomposition().solve(b);
}

Vector oracle_composite(const std::vector<const LocalCost*>& costs, const OracleOptions& opt) {
  const std::size_t p = costs.front()->dimension();
  Matrix Q = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Vector b = Vector::Zero(static_cast<Eigen::Index>(p));
  double weight = 0.0;
  for (const auto* cost : costs) {
    auto form = cost->quadratic_form();
    Q += form->hessian;
    b += form->linear;
    weight += cost->l1_weight();
  }
  ProxGradientResult res = minimize_quadratic_l1(Q, b, weight, Vector::Zero(static_cast<Eigen::Index>(p)),
                                                 opt.tolerance, opt.max_iterations);
  if (!res.converged) {
    throw ConvergenceError("centralized proximal gradient did not converge", res.residual);
  }
  return res.solution;
}

Vector oracle_smooth(const std::vector<const LocalCost*>& costs, const OracleOptions& opt) {
  const auto p = static_cast<Eigen::Index>(costs.front()->dimension());
  auto value = [&](const Vector& s) {
    double f = 0.0;
    for (const auto* cost : costs) f += cost->evaluate(s);
    return f;
  };
  auto grad = [&](const Vector& s) {
    Vector g = Vector::Zero(p);
    for (const auto* cost : costs) g += *cost->gradient(s);
    return g;
  };

  Vector s = Vector::Zero(p);
  Vector g = grad(s);
  double f = value(s);
  double step = 1.0;
  const double scale = std::max(1.0, g.norm());
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    if (g.norm() <= opt.tolerance * scale) return s;
    // Armijo backtracking from a Barzilai-Borwein trial step.
    double t = step;
    Vector trial;
    double ft = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      trial = s - t * g;
      ft = value(trial);
      if (ft <= f - 1e-4 * t * g.squaredNorm()) break;
      t *= 0.5;
    }
    Vector g_next = grad(trial);
    Vector ds = trial - s;
    Vector dg = g_next - g;
    double curv = ds.dot(dg);
    step = curv > 0.0 ? ds.squaredNorm() / curv : 2.0 * t;
    s = std::move(trial);
    g = std::move(g_next);
    f = ft;
  }
  throw ConvergenceError("centralized gradient descent did not converge", g.norm());
}

}  // namespace

Vector centralized_oracle(const std::vector<const LocalCost*>& costs,
                          const OracleOptions& options) {
  if (costs.empty()) throw ParameterError("centralized_oracle needs at least one cost");
  const std::size_t p = costs.front()->dimension();
  bool all_quadratic = true;
  bool any_l1 = false;
  bool all_smooth = true;
  const Vector probe = Vector::Zero(static_cast<Eigen::Index>(p));
  for (const auto* cost : costs) {
    if (cost->dimension() != p) throw ParameterError("cost dimensions differ");
    if (!cost->quadratic_form()) all_quadratic = false;
    if (cost->l1_weight() > 0.0) any_l1 = true;
    if (!cost->gradient(probe)) all_smooth = false;
  }
  if (all_quadratic && !any_l1) return oracle_quadratic(costs);
  if (all_quadratic) return oracle_composite(costs, options);
  if (all_smooth) return oracle_smooth(costs, options);
  throw ParameterError("no centralized route for these costs");
}

Vector centralized_oracle(const std::vector<LocalCost*>& costs, const OracleOptions& options) {
  const bool single_nonsmooth = costs.size() == 1 && !costs.front()->quadratic_form() &&
                                !costs.front()->gradient(Vector::Zero(static_cast<Eigen::Index>(costs.front()->dimension())));
  if (single_nonsmooth) {
    // proximal point iterations through the cost's own local solver
    LocalCost& f = *costs.front();
    const auto p = static_cast<Eigen::Index>(f.dimension());
    LocalSubproblem sub{Vector::Zero(p), Vector::Zero(p), 1.0, 1, Vector::Zero(p)};
    double moved = 0.0;
    for (std::size_t k = 0; k < options.max_iterations; ++k) {
      Vector next = f.solve_local(sub);
      moved = (next - sub.current).norm();
      sub.current = next;
      sub.anchor_sum = next;
      if (moved <= options.tolerance * std::max(1.0, next.norm())) return next;
    }
    throw ConvergenceError("proximal point oracle did not converge", moved);
  }
  return centralized_oracle(std::vector<const LocalCost*>(costs.begin(), costs.end()), options);
}

}  // namespace dlearn
