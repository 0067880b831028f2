#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlearn/admm.hpp"

namespace dlearn {

struct RateCertificate {
  double m_f = 0.0;
  double M_f = 0.0;
  double gamma_o = 0.0;
  double Gamma_u = 0.0;
  double penalty = 0.0;
  double mu = 0.0;
  double delta = 0.0;

  /// Predicted bound on the per-step H-norm ratio, 1 / (1 + delta).
  double ratio() const { return 1.0 / (1.0 + delta); }
};

/// min{(mu - 1) gamma_o / (mu Gamma_u), 2 c m gamma_o / (c^2 Gamma_u gamma_o + mu M^2)}.
double contraction_delta(const CostRegularity& reg, const GraphAlgebra& algebra, double penalty,
                         double mu);

struct OptimalPenalty {
  double c_star = 0.0;
  double mu_star = 0.0;
  double delta_star = 0.0;
};

/// Penalty and free constant maximizing contraction_delta, with the closed-form delta.
OptimalPenalty optimal_c_delta(const CostRegularity& reg, const GraphAlgebra& algebra);

/// Certificate at penalty c using the best mu for that c (found by a 1-D search);
/// empty when the costs lack strong convexity or Lipschitz gradients.
std::optional<RateCertificate> certify_rate(const std::vector<const LocalCost*>& costs,
                                            const NetworkGraph& graph, double penalty);

/// ceil(log(eps / D0) / log(1 / sqrt(1 + delta))).
std::size_t predicted_iterations(double delta, double epsilon, double initial_distance);

/// Fixed point u* = [s*; vbar*] of the noise-free iteration for differentiable
/// costs: every s_i = s* and vbar* is the least-norm solution of E_o' vbar = -grad f(s*).
struct PrimalDualPoint {
  Vector s;     // np, node-major
  Vector vbar;  // Lp, edge-major
};
PrimalDualPoint reference_point(const NetworkGraph& graph, const std::vector<const LocalCost*>& costs,
                                const Vector& optimum);
/// Stacks a snapshot into u = [s; vbar].
PrimalDualPoint stack_snapshot(const Snapshot& snapshot);

/// ||u - w||^2_H with H = blkdiag((c/2) L_u (x) I_p, (1/c) I_Lp).
double hnorm_squared(const GraphAlgebra& algebra, double penalty, const PrimalDualPoint& u,
                     const PrimalDualPoint& w);

struct HNormRecord {
  std::size_t k = 0;
  double distance = 0.0;  // ||u(k) - u*||_H^2
  double step = 0.0;      // ||u(k+1) - u(k)||_H^2, NaN at the final k
  bool s1 = true;         // distance(k+1) <= distance(k) - step(k)
  bool s2 = true;         // step(k+1) <= step(k)
  bool s3 = true;         // step(k) <= distance(0) / (k + 1)
  bool contraction = true;
};

struct HNormReport {
  std::vector<HNormRecord> records;
  double slack = 0.0;
  std::optional<double> delta;  // set when the contraction check ran
  std::optional<std::size_t> first_violation;
  std::string violation;  // which inequality failed first
  double worst_ratio = 0.0;  // max distance(k+1)/distance(k) over informative steps

  bool passed() const { return !first_violation.has_value(); }
};

/// Checks the three H-norm inequalities at every k with slack 1e-9 * distance(0),
/// plus distance(k+1) <= (1/(1+delta) + 1e-6) distance(k) when delta is given.
/// ParameterError when the trace carries no edge multipliers.
HNormReport hnorm_verify(const RunTrace& trace, const GraphAlgebra& algebra,
                         const PrimalDualPoint& reference, std::optional<double> delta = std::nullopt);

struct RLinearReport {
  bool certified = false;
  std::string reason;
  bool bound_holds = true;
  std::optional<std::size_t> first_violation;
  double empirical_rate = 0.0;  // fitted slope of log ||s(k) - s*||
  double predicted_rate = 0.0;  // 0.5 log(1 / (1 + delta))
};

/// ||s(k+1) - s*||^2 <= ||u(k) - u*||^2_H / m_f at every k, and the fitted decay
/// rate of the primal distance. Declines when m_f <= 0.
RLinearReport rlinear_verify(const RunTrace& trace, const GraphAlgebra& algebra,
                             const CostRegularity& reg, const PrimalDualPoint& reference,
                             double delta);

/// First k with max_i ||s_i(k) - ref|| <= tolerance * max(1, ||ref||); nullopt past max_iterations.
std::optional<std::size_t> iterations_to_tolerance(const NetworkGraph& graph,
                                                   const std::vector<LocalCost*>& costs, double penalty,
                                                   const Vector& reference, double tolerance,
                                                   std::size_t max_iterations);

}  // namespace dlearn
