#pragma once

#include <cstddef>

#include "dlearn/graph.hpp"

namespace dlearn {

/// sign(a) * max(|a| - tau, 0).
double soft_threshold(double a, double tau);
Vector soft_threshold(const Vector& a, double tau);
Matrix soft_threshold(const Matrix& a, double tau);

/// Singular-value soft-thresholding; the prox of tau * nuclear norm.
Matrix singular_value_threshold(const Matrix& m, double tau);

struct ProxGradientResult {
  Vector solution;
  std::size_t iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// min 0.5 x'Qx - b'x + weight * ||x||_1 by FISTA with adaptive restart.
/// Stops when the gradient-mapping norm drops below tol * max(1, ||b||).
ProxGradientResult minimize_quadratic_l1(const Matrix& Q, const Vector& b, double weight,
                                         const Vector& start, double tolerance,
                                         std::size_t max_iterations);

/// Same, with a precomputed step bound (largest eigenvalue of Q).
ProxGradientResult minimize_quadratic_l1(const Matrix& Q, const Vector& b, double weight,
                                         const Vector& start, double tolerance,
                                         std::size_t max_iterations, double lipschitz);

}  // namespace dlearn
