#pragma once

#include <memory>
#include <random>
#include <vector>

#include "dlearn/costs.hpp"

namespace testing_helpers {

using dlearn::Matrix;
using dlearn::QuadraticCost;
using dlearn::Vector;

inline Vector gaussian_vector(std::size_t p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(static_cast<Eigen::Index>(p));
  for (auto& x : v) x = g(rng);
  return v;
}

/// SPD Hessian with eigenvalues in [lo, hi].
inline Matrix random_spd(std::size_t p, double lo, double hi, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Vector eig(static_cast<Eigen::Index>(p));
  for (auto& e : eig) e = u(rng);
  eig(0) = lo;
  if (p > 1) eig(1) = hi;
  Matrix m = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

struct CostSet {
  std::vector<std::unique_ptr<dlearn::LocalCost>> owned;
  std::vector<dlearn::LocalCost*> ptrs;
  std::vector<const dlearn::LocalCost*> cptrs;

  void add(std::unique_ptr<dlearn::LocalCost> c) {
    ptrs.push_back(c.get());
    cptrs.push_back(c.get());
    owned.push_back(std::move(c));
  }
};

inline CostSet random_quadratics(std::size_t n, std::size_t p, double lo, double hi, std::mt19937_64& rng) {
  CostSet set;
  for (std::size_t i = 0; i < n; ++i) {
    set.add(std::make_unique<QuadraticCost>(random_spd(p, lo, hi, rng), gaussian_vector(p, rng)));
  }
  return set;
}

}  // namespace testing_helpers
