#include "dlearn/rate.hpp"

#include <cmath>
#include <limits>

#include "dlearn/costs.hpp"
#include "dlearn/errors.hpp"

namespace dlearn {

namespace {

void check_regularity(const CostRegularity& reg) {
  if (!(reg.strong_convexity > 0.0) || !(reg.lipschitz >= reg.strong_convexity)) {
    throw ParameterError("need M_f >= m_f > 0");
  }
}

}  // namespace

double contraction_delta(const CostRegularity& reg, const GraphAlgebra& algebra, double penalty,
                         double mu) {
  if (!(mu > 1.0)) throw ParameterError("mu must be > 1");
  if (!(penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  check_regularity(reg);
  const double g = algebra.gamma_o;
  const double G = algebra.Gamma_u;
  const double m = reg.strong_convexity;
  const double M = reg.lipschitz;
  const double first = (mu - 1.0) * g / (mu * G);
  const double second = 2.0 * penalty * m * g / (penalty * penalty * G * g + mu * M * M);
  return std::min(first, second);
}

OptimalPenalty optimal_c_delta(const CostRegularity& reg, const GraphAlgebra& algebra) {
  check_regularity(reg);
  const double kappa = reg.strong_convexity / reg.lipschitz;
  const double spread = algebra.Gamma_u / algebra.gamma_o;
  const double x = kappa * std::sqrt(spread);
  const double inv_sqrt_mu = std::sqrt(0.25 * x * x + 1.0) - 0.5 * x;

  OptimalPenalty out;
  out.mu_star = 1.0 / (inv_sqrt_mu * inv_sqrt_mu);
  out.c_star = reg.lipschitz * std::sqrt(out.mu_star / (algebra.Gamma_u * algebra.gamma_o));
  out.delta_star = kappa * (std::sqrt(0.25 * kappa * kappa + algebra.gamma_o / algebra.Gamma_u) - 0.5 * kappa);
  return out;
}

std::optional<RateCertificate> certify_rate(const std::vector<const LocalCost*>& costs,
                                            const NetworkGraph& graph, double penalty) {
  if (!(penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  CostRegularity reg{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto* c : costs) {
    auto r = c->regularity();
    if (!r) return std::nullopt;
    reg.strong_convexity = std::min(reg.strong_convexity, r->strong_convexity);
    reg.lipschitz = std::max(reg.lipschitz, r->lipschitz);
  }
  if (costs.empty() || !(reg.strong_convexity > 0.0)) return std::nullopt;
  const GraphAlgebra alg = compute_algebra(graph);

  // first branch rises and second falls in mu; the best mu is where they meet
  auto gap = [&](double mu) {
    const double g = alg.gamma_o, G = alg.Gamma_u;
    const double m = reg.strong_convexity, M = reg.lipschitz;
    return (mu - 1.0) * g / (mu * G) - 2.0 * penalty * m * g / (penalty * penalty * G * g + mu * M * M);
  };
  double lo = 1.0, hi = 2.0;
  while (gap(hi) < 0.0 && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  RateCertificate cert;
  cert.m_f = reg.strong_convexity;
  cert.M_f = reg.lipschitz;
  cert.gamma_o = alg.gamma_o;
  cert.Gamma_u = alg.Gamma_u;
  cert.penalty = penalty;
  cert.mu = hi;
  cert.delta = contraction_delta(reg, alg, penalty, hi);
  return cert;
}

std::size_t predicted_iterations(double delta, double epsilon, double initial_distance) {
  if (!(delta > 0.0) || !(epsilon > 0.0)) throw ParameterError("delta and epsilon must be > 0");
  if (initial_distance <= epsilon) return 0;
  const double k = std::log(epsilon / initial_distance) / std::log(1.0 / std::sqrt(1.0 + delta));
  return static_cast<std::size_t>(std::ceil(k));
}

PrimalDualPoint reference_point(const NetworkGraph& graph, const std::vector<const LocalCost*>& costs,
                                const Vector& optimum) {
  const std::size_t n = graph.node_count();
  if (costs.size() != n) throw ParameterError("need one cost per node");
  const auto p = optimum.size();
  const GraphAlgebra alg = compute_algebra(graph);

  Vector grad(p * static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto g = costs[i]->gradient(optimum);
    if (!g) throw ParameterError("reference point needs differentiable costs");
    grad.segment(static_cast<Eigen::Index>(i) * p, p) = *g;
  }
  const Matrix EoT = expand_blocks(alg.oriented.transpose(), static_cast<std::size_t>(p));
  PrimalDualPoint u;
  u.s = optimum.replicate(static_cast<Eigen::Index>(n), 1);
  u.vbar = EoT.completeOrthogonalDecomposition().solve(Vector(-grad));
  return u;
}

PrimalDualPoint stack_snapshot(const Snapshot& snapshot) {
  if (snapshot.edge_multipliers.size() == 0) {
    throw ParameterError("snapshot carries no edge multipliers; enable tracking");
  }
  return {Eigen::Map<const Vector>(snapshot.estimates.data(), snapshot.estimates.size()),
          Eigen::Map<const Vector>(snapshot.edge_multipliers.data(), snapshot.edge_multipliers.size())};
}

double hnorm_squared(const GraphAlgebra& algebra, double penalty, const PrimalDualPoint& u,
                     const PrimalDualPoint& w) {
  const Eigen::Index n = algebra.laplacian_unoriented.rows();
  const Eigen::Index p = u.s.size() / n;
  const Matrix ds = Eigen::Map<const Matrix>(Vector(u.s - w.s).data(), p, n);
  // (s - w)'(L_u (x) I)(s - w) = trace(ds L_u ds')
  const double primal = (ds * algebra.laplacian_unoriented).cwiseProduct(ds).sum();
  return 0.5 * penalty * primal + (u.vbar - w.vbar).squaredNorm() / penalty;
}

HNormReport hnorm_verify(const RunTrace& trace, const GraphAlgebra& algebra,
                         const PrimalDualPoint& reference, std::optional<double> delta) {
  if (trace.snapshots.size() < 2) throw ParameterError("trace has no snapshots to verify");
  const double c = trace.penalty;
  std::vector<PrimalDualPoint> u;
  u.reserve(trace.snapshots.size());
  for (const auto& snap : trace.snapshots) u.push_back(stack_snapshot(snap));

  const std::size_t K = u.size();
  HNormReport rep;
  rep.delta = delta;
  rep.records.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    rep.records[k].k = k;
    rep.records[k].distance = hnorm_squared(algebra, c, u[k], reference);
    rep.records[k].step = k + 1 < K ? hnorm_squared(algebra, c, u[k + 1], u[k])
                                    : std::numeric_limits<double>::quiet_NaN();
  }
  const double d0 = rep.records.front().distance;
  rep.slack = 1e-9 * d0;

  auto flag = [&](std::size_t k, const char* what) {
    if (!rep.first_violation) {
      rep.first_violation = k;
      rep.violation = what;
    }
  };
  for (std::size_t k = 0; k + 1 < K; ++k) {
    auto& r = rep.records[k];
    const auto& nx = rep.records[k + 1];
    r.s1 = nx.distance <= r.distance - r.step + rep.slack;
    if (!r.s1) flag(k, "S1");
    if (k + 2 < K) {
      r.s2 = nx.step <= r.step + rep.slack;
      if (!r.s2) flag(k, "S2");
    }
    r.s3 = r.step <= d0 / static_cast<double>(k + 1) + rep.slack;
    if (!r.s3) flag(k, "S3");
    if (delta) {
      r.contraction = nx.distance <= (1.0 / (1.0 + *delta) + 1e-6) * r.distance + rep.slack;
      if (!r.contraction) flag(k, "contraction");
      if (r.distance > 1e-10 * d0) rep.worst_ratio = std::max(rep.worst_ratio, nx.distance / r.distance);
    }
  }
  return rep;
}

RLinearReport rlinear_verify(const RunTrace& trace, const GraphAlgebra& algebra,
                             const CostRegularity& reg, const PrimalDualPoint& reference,
                             double delta) {
  RLinearReport rep;
  if (!(reg.strong_convexity > 0.0) || !(reg.lipschitz >= reg.strong_convexity)) {
    rep.reason = "costs are not strongly convex with Lipschitz gradients";
    return rep;
  }
  if (trace.snapshots.size() < 2) throw ParameterError("trace has no snapshots to verify");
  rep.certified = true;
  rep.predicted_rate = 0.5 * std::log(1.0 / (1.0 + delta));

  const double c = trace.penalty;
  const std::size_t K = trace.snapshots.size();
  const double d0 = hnorm_squared(algebra, c, stack_snapshot(trace.snapshots.front()), reference);
  std::vector<double> ks, logs;
  const double floor = 1e-12 * std::max(1.0, reference.s.norm());
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const PrimalDualPoint uk = stack_snapshot(trace.snapshots[k]);
    const double hk = hnorm_squared(algebra, c, uk, reference);
    const PrimalDualPoint next = stack_snapshot(trace.snapshots[k + 1]);
    const double primal = (next.s - reference.s).squaredNorm();
    if (primal > hk / reg.strong_convexity + 1e-9 * d0 / reg.strong_convexity) {
      rep.bound_holds = false;
      if (!rep.first_violation) rep.first_violation = k;
    }
    const double dist = std::sqrt(primal);
    if (dist > floor) {
      ks.push_back(static_cast<double>(k + 1));
      logs.push_back(std::log(dist));
    }
  }
  if (ks.size() >= 2) {
    double mk = 0.0, ml = 0.0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      mk += ks[j];
      ml += logs[j];
    }
    mk /= static_cast<double>(ks.size());
    ml /= static_cast<double>(ks.size());
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      num += (ks[j] - mk) * (logs[j] - ml);
      den += (ks[j] - mk) * (ks[j] - mk);
    }
    rep.empirical_rate = den > 0.0 ? num / den : 0.0;
  }
  return rep;
}

std::optional<std::size_t> iterations_to_tolerance(const NetworkGraph& graph,
                                                   const std::vector<LocalCost*>& costs, double penalty,
                                                   const Vector& reference, double tolerance,
                                                   std::size_t max_iterations) {
  AdmmSettings settings;
  settings.penalty = penalty;
  ConsensusAdmm engine(graph, costs, settings);
  const double target = tolerance * std::max(1.0, reference.norm());
  if (max_distance(engine.estimates(), reference) <= target) return 0;
  for (std::size_t k = 1; k <= max_iterations; ++k) {
    engine.step();
    if (max_distance(engine.estimates(), reference) <= target) return k;
  }
  return std::nullopt;
}

}  // namespace dlearn
