#include <doctest.h>

#include <cmath>
#include <random>

#include "dlearn/admm.hpp"
#include "dlearn/costs.hpp"
#include "dlearn/errors.hpp"
#include "dlearn/learners.hpp"
#include "helpers.hpp"

using namespace dlearn;
using testing_helpers::CostSet;

namespace {

CostSet scalar_averages(const std::vector<double>& a) {
  CostSet set;
  for (double x : a) set.add(std::make_unique<QuadraticCost>(make_average_cost(Vector::Constant(1, x))));
  return set;
}

/// Cost without a closed-form route, to exercise the generic paths.
class QuarticCost : public LocalCost {
 public:
  explicit QuarticCost(double a) : a_(a) {}
  std::size_t dimension() const override { return 1; }
  double evaluate(const Vector& s) const override {
    const double d = s(0) - a_;
    return 0.25 * d * d * d * d + 0.5 * d * d;
  }
  std::optional<Vector> gradient(const Vector& s) const override {
    const double d = s(0) - a_;
    return Vector::Constant(1, d * d * d + d);
  }
  Vector solve_local(const LocalSubproblem& sub) override {
    // Newton on the scalar subproblem
    double s = sub.current.size() ? sub.current(0) : 0.0;
    const double c = sub.penalty, d = static_cast<double>(sub.degree);
    for (int it = 0; it < 100; ++it) {
      const double e = s - a_;
      const double g = e * e * e + e + sub.multiplier(0) + 2.0 * c * (d * s - sub.anchor_sum(0));
      const double h = 3.0 * e * e + 1.0 + 2.0 * c * d;
      s -= g / h;
      if (std::abs(g) < 1e-14) break;
    }
    return Vector::Constant(1, s);
  }

 private:
  double a_;
};

}  // namespace

TEST_CASE("single node reduces to local minimization") {
  auto g = build_graph(1, {});
  Matrix Q(2, 2);
  Q << 2, 0.5, 0.5, 1;
  Vector b(2);
  b << 1, -1;
  QuadraticCost f(Q, b);
  std::vector<LocalCost*> costs{&f};
  RunOptions opt;
  opt.iterations = 3;
  auto trace = admm_run(g, costs, opt);
  Vector expect = Q.ldlt().solve(b);
  CHECK((trace.final_estimates.col(0) - expect).norm() <= 1e-12);
  CHECK(trace.records.size() == 4);
}

TEST_CASE("K3 averaging reaches the mean") {
  auto g = complete_graph(3);
  auto set = scalar_averages({1.0, 4.0, -2.0});
  RunOptions opt;
  opt.iterations = 200;
  opt.reference = Vector::Constant(1, 1.0);
  auto trace = admm_run(g, set.ptrs, opt);
  CHECK(trace.records.back().consensus_error < 1e-8);
  CHECK(trace.records.back().distance_to_reference < 1e-8);
  CHECK(trace.records.size() == 201);
}

TEST_CASE("K3 averaging with noisy links stays bounded") {
  auto g = complete_graph(3);
  auto set = scalar_averages({1.0, 4.0, -2.0});
  RunOptions opt;
  opt.iterations = 10000;
  opt.penalty = 1.0;
  opt.noise = LinkNoise::awgn(1e-2, 5);
  opt.reference = Vector::Constant(1, 1.0);
  auto trace = admm_run(g, set.ptrs, opt);
  double worst = 0.0;
  for (const auto& r : trace.records) {
    REQUIRE(std::isfinite(r.distance_to_reference));
    worst = std::max(worst, r.distance_to_reference);
  }
  CHECK(worst < 10.0);
}

TEST_CASE("admm_run argument checks") {
  auto set = scalar_averages({1.0, 2.0});
  RunOptions opt;
  opt.penalty = 0.0;
  CHECK_THROWS_AS(admm_run(path_graph(2), set.ptrs, opt), ParameterError);
  opt.penalty = 1.0;
  CHECK_THROWS_AS(admm_run(build_graph(2, {}), set.ptrs, opt), GraphError);
}

TEST_CASE("local solve failures name the node and iteration") {
  class Broken : public QuarticCost {
   public:
    using QuarticCost::QuarticCost;
    Vector solve_local(const LocalSubproblem&) override { return Vector::Constant(1, std::nan("")); }
  };
  QuarticCost ok(0.0);
  Broken bad(1.0);
  std::vector<LocalCost*> costs{&ok, &bad};
  RunOptions opt;
  opt.iterations = 5;
  try {
    admm_run(path_graph(2), costs, opt);
    FAIL("expected NodeSolveError");
  } catch (const NodeSolveError& e) {
    CHECK(e.node() == 1);
    CHECK(e.iteration() == 1);
  }
}

TEST_CASE("consensus_error examples") {
  Matrix s = Matrix::Constant(2, 3, 0.7);
  CHECK(consensus_error(complete_graph(3), s) == 0.0);
  Matrix two(1, 2);
  two << 0, 1;
  CHECK(consensus_error(path_graph(2), two) == 1.0);
  Matrix k3(1, 3);
  k3 << 0, 1, 2;
  CHECK(consensus_error(complete_graph(3), k3) == 2.0);
}

TEST_CASE("edge_multiplier_step examples") {
  auto g = path_graph(2);
  Matrix s(1, 2);
  s << 1, 0;
  Matrix vbar = Matrix::Zero(1, 2);
  edge_multiplier_step(g, s, 2.0, vbar);
  CHECK(vbar(0, 0) == 1.0);
  CHECK(vbar(0, 1) == -1.0);

  Matrix agreed = Matrix::Constant(1, 2, 3.0);
  Matrix before = vbar;
  edge_multiplier_step(g, agreed, 2.0, vbar);
  CHECK(vbar == before);

  auto k3 = complete_graph(3);
  Matrix s3(2, 3);
  s3 << 1, -2, 0.5, 3, 0, 1;
  Matrix vb = Matrix::Zero(2, 6);
  edge_multiplier_step(k3, s3, 0.7, vb);
  Matrix v = aggregate_edge_multipliers(k3, vb);
  for (std::size_t i = 0; i < 3; ++i) {
    Vector inc = Vector::Zero(2);
    for (std::size_t j : k3.neighbors(i)) inc += 0.7 * (s3.col(i) - s3.col(j));
    CHECK((v.col(i) - inc).norm() <= 1e-15);
  }
}

TEST_CASE("centralized_oracle examples") {
  auto set = scalar_averages({1.0, 2.0, 6.0});
  CHECK(centralized_oracle(set.cptrs)(0) == doctest::Approx(3.0));

  std::vector<QuarticCost> quartic{QuarticCost(1.0), QuarticCost(-1.0)};
  std::vector<const LocalCost*> qc{&quartic[0], &quartic[1]};
  CHECK(std::abs(centralized_oracle(qc)(0)) <= 1e-9);

  SUBCASE("single hinge cost matches a grid search") {
    SvmLocalData d;
    d.X.resize(1, 4);
    d.X << -2, -1, 1, 3;
    d.y.resize(4);
    d.y << -1, -1, 1, 1;
    d.C = 1.0;
    SvmCost cost(d, 1);
    std::vector<LocalCost*> costs{&cost};
    Vector sol = centralized_oracle(costs);
    double best = std::numeric_limits<double>::infinity();
    for (int i = -400; i <= 400; ++i)
      for (int j = -400; j <= 400; ++j) {
        Vector sb(2);
        sb << i * 0.005, j * 0.005;
        best = std::min(best, cost.evaluate(sb));
      }
    CHECK(cost.evaluate(sol) <= best + 1e-4);
    CHECK(cost.evaluate(sol) >= best - 1e-4);
  }
}

TEST_CASE("property: engine invariants on random quadratic scenarios") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 3 + rng() % 10;
    const std::size_t p = 1 + rng() % 4;
    auto g = connected_random_geometric(n, 0.6, rng());
    auto set = testing_helpers::random_quadratics(n, p, 0.5, 3.0, rng);
    const Vector oracle = centralized_oracle(set.cptrs);

    RunOptions opt;
    opt.penalty = 0.3 + std::uniform_real_distribution<double>(0, 2)(rng);
    opt.iterations = 3000;
    opt.track_edge_multipliers = true;
    opt.keep_snapshots = true;
    opt.reference = oracle;
    auto trace = admm_run(g, set.ptrs, opt);
    CHECK(trace.records.back().distance_to_reference < 1e-6);
    CHECK(trace.records.back().consensus_error < 1e-6);

    ConsensusAdmm engine(g, set.ptrs, {opt.penalty, {}, true});
    for (int k = 0; k < 30; ++k) {
      engine.step();
      Matrix agg = aggregate_edge_multipliers(g, engine.edge_multipliers());
      const double scale = std::max(1.0, engine.multipliers().cwiseAbs().maxCoeff());
      CHECK((agg - engine.multipliers()).cwiseAbs().maxCoeff() <= 1e-14 * scale);
      CHECK(engine.multipliers().rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
  }
}

TEST_CASE("property: local solves are stationary for the subproblem") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 1 + rng() % 5;
    Matrix Q = testing_helpers::random_spd(p, 0.1, 5.0, rng);
    Vector b = testing_helpers::gaussian_vector(p, rng);
    const double l1 = (trial % 2) ? 0.3 : 0.0;
    QuadraticCost f(Q, b, 0.0, l1);
    LocalSubproblem sub{testing_helpers::gaussian_vector(p, rng), testing_helpers::gaussian_vector(p, rng), 0.8,
                        1 + rng() % 4, Vector::Zero(static_cast<Eigen::Index>(p))};
    Vector s = f.solve_local(sub);
    Vector grad = subproblem_gradient(Vector(Q * s - b), sub, s);
    if (l1 == 0.0) {
      CHECK(grad.norm() <= 1e-10 * std::max(1.0, b.norm() + sub.multiplier.norm() + sub.anchor_sum.norm()));
    } else {
      // subgradient of l1 * ||s||_1 must cancel the smooth gradient
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) != 0.0) CHECK(std::abs(grad(k) + l1 * (s(k) > 0 ? 1 : -1)) <= 1e-8);
        else CHECK(std::abs(grad(k)) <= l1 + 1e-8);
      }
    }
  }
  QuarticCost q(2.0);
  LocalSubproblem sub{Vector::Constant(1, 0.4), Vector::Constant(1, 1.5), 1.2, 2, Vector::Zero(1)};
  Vector s = q.solve_local(sub);
  CHECK(subproblem_gradient(*q.gradient(s), sub, s).norm() <= 1e-10);
}

TEST_CASE("property: runs are deterministic") {
  auto g = connected_random_geometric(8, 0.6, 3);
  std::mt19937_64 rng(1);
  auto set = testing_helpers::random_quadratics(8, 2, 0.5, 2.0, rng);
  RunOptions opt;
  opt.iterations = 200;
  opt.noise = LinkNoise::awgn(1e-2, 99);
  auto a = admm_run(g, set.ptrs, opt);
  auto b = admm_run(g, set.ptrs, opt);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].consensus_error == b.records[k].consensus_error);
    CHECK(a.records[k].objective == b.records[k].objective);
  }
  CHECK(a.final_estimates == b.final_estimates);
}

TEST_CASE("property: zero-variance noise behaves like no noise") {
  auto g = ring_graph(6);
  std::mt19937_64 rng(4);
  auto set = testing_helpers::random_quadratics(6, 3, 0.5, 2.0, rng);
  RunOptions opt;
  opt.iterations = 50;
  auto clean = admm_run(g, set.ptrs, opt);
  opt.noise = LinkNoise::awgn(0.0, 123);
  auto zero = admm_run(g, set.ptrs, opt);
  CHECK(clean.final_estimates == zero.final_estimates);
}
