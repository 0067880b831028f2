#include "dlearn/costs.hpp"

#include <algorithm>
#include <limits>

#include "dlearn/errors.hpp"
#include "dlearn/prox.hpp"

namespace dlearn {

QuadraticCost::QuadraticCost(Matrix hessian, Vector linear, double constant, double l1)
    : Q_(std::move(hessian)), b_(std::move(linear)), constant_(constant), l1_(l1) {
  if (Q_.rows() != Q_.cols() || Q_.rows() != b_.size()) {
    throw ParameterError("quadratic cost dimensions do not match");
  }
  if (l1_ < 0.0) throw ParameterError("l1 weight must be >= 0");
  if (!Q_.isApprox(Q_.transpose(), 1e-12)) throw ParameterError("quadratic cost Hessian must be symmetric");
}

double QuadraticCost::evaluate(const Vector& s) const {
  return 0.5 * s.dot(Q_ * s) - b_.dot(s) + constant_ + l1_ * s.lpNorm<1>();
}

std::optional<Vector> QuadraticCost::gradient(const Vector& s) const {
  if (l1_ > 0.0) return std::nullopt;
  return Vector(Q_ * s - b_);
}

Vector QuadraticCost::solve_local(const LocalSubproblem& sub) {
  const double shift = 2.0 * sub.penalty * static_cast<double>(sub.degree);
  const Vector rhs = b_ - sub.multiplier + 2.0 * sub.penalty * sub.anchor_sum;
  const auto key = std::make_pair(sub.penalty, sub.degree);
  const auto p = Q_.rows();

  if (l1_ == 0.0) {
    auto it = factor_cache_.find(key);
    if (it == factor_cache_.end()) {
      Matrix A = Q_ + shift * Matrix::Identity(p, p);
      it = factor_cache_.emplace(key, Eigen::LDLT<Matrix>(A)).first;
      if (it->second.info() != Eigen::Success || !it->second.isPositive()) {
        factor_cache_.erase(it);
        throw DataError("local quadratic subproblem is not positive definite");
      }
    }
    return it->second.solve(rhs);
  }

  Matrix A = Q_ + shift * Matrix::Identity(p, p);
  auto lit = lipschitz_cache_.find(key);
  if (lit == lipschitz_cache_.end()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
    lit = lipschitz_cache_.emplace(key, es.eigenvalues().maxCoeff()).first;
  }
  const Vector start = sub.current.size() == p ? sub.current : Vector::Zero(p);
  ProxGradientResult res =
      minimize_quadratic_l1(A, rhs, l1_, start, inner_tol_, inner_max_, lit->second);
  last_inner_ = res.iterations;
  if (!res.converged) throw ConvergenceError("local l1 subproblem did not converge", res.residual);
  return res.solution;
}

std::optional<CostRegularity> QuadraticCost::regularity() const {
  if (l1_ > 0.0) return std::nullopt;
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q_, Eigen::EigenvaluesOnly);
  CostRegularity reg;
  reg.strong_convexity = std::max(0.0, es.eigenvalues().minCoeff());
  reg.lipschitz = es.eigenvalues().maxCoeff();
  return reg;
}

std::optional<QuadraticForm> QuadraticCost::quadratic_form() const {
  return QuadraticForm{Q_, b_, constant_};
}

void QuadraticCost::set_linear(Vector linear, double constant) {
  if (linear.size() != b_.size()) throw ParameterError("linear term dimension mismatch");
  b_ = std::move(linear);
  constant_ = constant;
}

void QuadraticCost::set_inner_limits(double tolerance, std::size_t max_iterations) {
  if (!(tolerance > 0.0) || max_iterations == 0) throw ParameterError("invalid inner limits");
  inner_tol_ = tolerance;
  inner_max_ = max_iterations;
}

QuadraticCost make_average_cost(const Vector& y) {
  const auto p = y.size();
  return QuadraticCost(Matrix::Identity(p, p), y, 0.5 * y.squaredNorm());
}

CostRegularity quadratic_regularity(const std::vector<const LocalCost*>& costs) {
  if (costs.empty()) throw ParameterError("no costs supplied");
  CostRegularity reg{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto* cost : costs) {
    auto r = cost->regularity();
    if (!r) throw ParameterError("cost does not expose regularity constants");
    reg.strong_convexity = std::min(reg.strong_convexity, r->strong_convexity);
    reg.lipschitz = std::max(reg.lipschitz, r->lipschitz);
  }
  return reg;
}

}  // namespace dlearn
