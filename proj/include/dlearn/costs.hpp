#pragma once

#include <map>
#include <optional>
#include <utility>

#include "dlearn/admm.hpp"

namespace dlearn {

/// f(s) = 0.5 s'Qs - b's + constant + l1 * ||s||_1.
///
/// With l1 = 0 the local subproblem is a single linear solve; the factorization
/// is cached per (c, degree). Otherwise an inner FISTA loop is warm-started
/// from the node's current estimate.
class QuadraticCost : public LocalCost {
 public:
  QuadraticCost(Matrix hessian, Vector linear, double constant = 0.0, double l1 = 0.0);

  std::size_t dimension() const override { return static_cast<std::size_t>(b_.size()); }
  double evaluate(const Vector& s) const override;
  std::optional<Vector> gradient(const Vector& s) const override;
  Vector solve_local(const LocalSubproblem& sub) override;

  std::optional<CostRegularity> regularity() const override;
  std::optional<QuadraticForm> quadratic_form() const override;
  double l1_weight() const override { return l1_; }

  /// Replaces b and the constant; the Hessian (and cached factors) stay.
  void set_linear(Vector linear, double constant);

  /// Inner-loop controls for the l1 case.
  void set_inner_limits(double tolerance, std::size_t max_iterations);
  std::size_t last_inner_iterations() const { return last_inner_; }

 private:
  Matrix Q_;
  Vector b_;
  double constant_;
  double l1_;
  double inner_tol_ = 1e-10;
  std::size_t inner_max_ = 500;
  std::size_t last_inner_ = 0;
  std::map<std::pair<double, std::size_t>, Eigen::LDLT<Matrix>> factor_cache_;
  std::map<std::pair<double, std::size_t>, double> lipschitz_cache_;
};

/// f(s) = 0.5 ||s - y||^2, whose network-wide minimizer is the sample mean.
QuadraticCost make_average_cost(const Vector& y);

/// Extreme Hessian eigenvalues across quadratic costs: (min lambda_min, max lambda_max).
CostRegularity quadratic_regularity(const std::vector<const LocalCost*>& costs);

}  // namespace dlearn
