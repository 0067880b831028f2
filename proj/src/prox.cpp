#include "dlearn/prox.hpp"

#include <cmath>

#include "dlearn/errors.hpp"

namespace dlearn {

double soft_threshold(double a, double tau) {
  if (a > tau) return a - tau;
  if (a < -tau) return a + tau;
  return 0.0;
}

Vector soft_threshold(const Vector& a, double tau) {
  return a.unaryExpr([tau](double x) { return soft_threshold(x, tau); });
}

Matrix soft_threshold(const Matrix& a, double tau) {
  return a.unaryExpr([tau](double x) { return soft_threshold(x, tau); });
}

Matrix singular_value_threshold(const Matrix& m, double tau) {
  if (m.size() == 0) return m;
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sigma = svd.singularValues();
  for (Eigen::Index k = 0; k < sigma.size(); ++k) sigma(k) = std::max(sigma(k) - tau, 0.0);
  return svd.matrixU() * sigma.asDiagonal() * svd.matrixV().transpose();
}

ProxGradientResult minimize_quadratic_l1(const Matrix& Q, const Vector& b, double weight,
                                         const Vector& start, double tolerance,
                                         std::size_t max_iterations) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
  return minimize_quadratic_l1(Q, b, weight, start, tolerance, max_iterations,
                               es.eigenvalues().maxCoeff());
}

ProxGradientResult minimize_quadratic_l1(const Matrix& Q, const Vector& b, double weight,
                                         const Vector& start, double tolerance,
                                         std::size_t max_iterations, double lipschitz) {
  if (weight < 0.0) throw ParameterError("l1 weight must be >= 0");
  if (!(lipschitz > 0.0)) throw ParameterError("quadratic part must have a positive curvature");
  const double step = 1.0 / lipschitz;
  const double scale = std::max(1.0, b.norm());

  auto objective = [&](const Vector& x) {
    return 0.5 * x.dot(Q * x) - b.dot(x) + weight * x.lpNorm<1>();
  };

  ProxGradientResult out;
  Vector x = start;
  Vector y = x;
  double t = 1.0;
  double fx = objective(x);
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    Vector grad_y = Q * y - b;
    Vector x_next = soft_threshold(Vector(y - step * grad_y), step * weight);
    double f_next = objective(x_next);
    if (f_next > fx) {
      // restart from the last iterate with a plain proximal step
      t = 1.0;
      Vector grad_x = Q * x - b;
      x_next = soft_threshold(Vector(x - step * grad_x), step * weight);
      f_next = objective(x_next);
    }

    Vector grad_n = Q * x_next - b;
    Vector mapped = soft_threshold(Vector(x_next - step * grad_n), step * weight);
    double residual = (x_next - mapped).norm() * lipschitz;

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = std::move(x_next);
    fx = f_next;
    t = t_next;

    out.iterations = it;
    out.residual = residual;
    if (residual <= tolerance * scale) {
      out.converged = true;
      break;
    }
  }
  out.solution = std::move(x);
  return out;
}

}  // namespace dlearn
