#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dlearn/errors.hpp"
#include "dlearn/graph.hpp"

using namespace dlearn;

TEST_CASE("build_graph on the smallest connected graph") {
  auto g = build_graph(2, {{0, 1}});
  CHECK(g.neighbors(0) == std::vector<std::size_t>{1});
  CHECK(g.neighbors(1) == std::vector<std::size_t>{0});
  CHECK(g.directed_edge_count() == 2);
}

TEST_CASE("build_graph on a triangle") {
  auto g = build_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.degree(i) == 2);
  CHECK(g.directed_edge_count() == 6);
}

TEST_CASE("build_graph rejects bad input") {
  CHECK_THROWS_AS(build_graph(3, {{0, 0}}), GraphError);
  CHECK_THROWS_AS(build_graph(3, {{0, 1}, {1, 0}}), GraphError);
  CHECK_THROWS_AS(build_graph(3, {{0, 3}}), GraphError);
}

TEST_CASE("directed edges are lexicographic and symmetric") {
  auto g = build_graph(4, {{2, 1}, {0, 3}, {1, 0}});
  const auto& d = g.directed_edges();
  for (std::size_t e = 1; e < d.size(); ++e) {
    CHECK(std::make_pair(d[e - 1].source, d[e - 1].destination) <
          std::make_pair(d[e].source, d[e].destination));
  }
  for (const auto& e : d) CHECK_NOTHROW(g.directed_index(e.destination, e.source));
  CHECK(g.directed_index(1, 2) == 3);
}

TEST_CASE("random_geometric") {
  SUBCASE("radius covering the square is connected") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto g = random_geometric(2, std::sqrt(2.0), seed);
      CHECK(g.connected());
      CHECK(g.edge_count() == 1);
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    auto a = connected_random_geometric(20, 0.5, 7);
    auto b = connected_random_geometric(20, 0.5, 7);
    CHECK(a.edges() == b.edges());
    CHECK(a.connected());
  }
  SUBCASE("tiny radius is reported as disconnected") {
    CHECK_THROWS_AS(random_geometric(20, 0.01, 7), GraphError);
  }
  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(random_geometric(1, 0.5, 0), ParameterError);
    CHECK_THROWS_AS(random_geometric(5, 0.0, 0), ParameterError);
    CHECK_THROWS_AS(random_geometric(5, 1.5, 0), ParameterError);
  }
}

TEST_CASE("compute_algebra on small graphs") {
  auto p2 = compute_algebra(path_graph(2));
  CHECK(p2.gamma_o == doctest::Approx(2.0));
  CHECK(p2.Gamma_u == doctest::Approx(2.0));

  auto k3 = compute_algebra(complete_graph(3));
  CHECK(k3.gamma_o == doctest::Approx(3.0));
  CHECK(k3.Gamma_u == doctest::Approx(4.0));

  CHECK_THROWS_AS(compute_algebra(build_graph(4, {{0, 1}, {2, 3}})), GraphError);
}

TEST_CASE("is_connected") {
  CHECK(is_connected(complete_graph(3)));
  CHECK_FALSE(is_connected(build_graph(2, {})));
  CHECK_FALSE(is_connected(build_graph(4, {{0, 1}, {2, 3}})));
}

TEST_CASE("edge list round trip and diagnostics") {
  auto g = ring_graph(5);
  std::stringstream ss;
  write_edge_list(ss, g);
  auto h = read_edge_list(ss);
  CHECK(h.node_count() == 5);
  CHECK(h.edges() == g.edges());

  std::istringstream bad("n=3\n0 1\n1 x\n");
  try {
    read_edge_list(bad);
    FAIL("expected GraphError");
  } catch (const GraphError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream no_header("0 1\n");
  CHECK_THROWS_AS(read_edge_list(no_header), GraphError);
}

TEST_CASE("property: algebra identities on random connected graphs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng() % 49;
    const double radius = 0.3 + 0.7 * std::uniform_real_distribution<double>(0, 1)(rng);
    auto g = connected_random_geometric(n, std::min(radius, std::sqrt(2.0)), rng());
    auto alg = compute_algebra(g);

    // D = (L_o + L_u) / 2 entrywise, and D is the degree matrix
    CHECK((alg.degree - 0.5 * (alg.laplacian_oriented + alg.laplacian_unoriented)).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t i = 0; i < n; ++i) CHECK(alg.degree(i, i) == static_cast<double>(g.degree(i)));

    // each row of A_s and A_d has exactly one unit entry
    for (Eigen::Index e = 0; e < alg.source.rows(); ++e) {
      CHECK(alg.source.row(e).sum() == 1.0);
      CHECK(alg.source.row(e).cwiseAbs().maxCoeff() == 1.0);
      CHECK(alg.destination.row(e).sum() == 1.0);
      CHECK(alg.destination.row(e).cwiseAbs().maxCoeff() == 1.0);
    }

    Matrix EoEo = alg.oriented.transpose() * alg.oriented;
    Matrix EuEu = alg.unoriented.transpose() * alg.unoriented;
    CHECK((EoEo - EoEo.transpose()).norm() == 0.0);
    CHECK((EuEu - EuEu.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eo(EoEo), eu(EuEu);
    CHECK(eo.eigenvalues().minCoeff() >= -1e-10);
    CHECK(eu.eigenvalues().minCoeff() >= -1e-10);

    // brute force: second smallest eigenvalue of the Laplacian of a connected graph
    Eigen::SelfAdjointEigenSolver<Matrix> lo(alg.laplacian_oriented);
    CHECK(std::abs(lo.eigenvalues()(0)) <= 1e-9);
    CHECK(alg.gamma_o == doctest::Approx(lo.eigenvalues()(1)).epsilon(1e-9));
    CHECK(alg.Gamma_u >= alg.gamma_o);
    CHECK(alg.gamma_o > 0.0);

    // nullspace of L_o is the consensus direction
    Vector ones = Vector::Ones(static_cast<Eigen::Index>(n));
    CHECK((alg.laplacian_oriented * ones).norm() <= 1e-12);
  }
}

TEST_CASE("expand_blocks is the Kronecker product with the identity") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  Matrix k = expand_blocks(m, 3);
  CHECK(k.rows() == 6);
  CHECK(k(0, 0) == 1.0);
  CHECK(k(1, 4) == 2.0);
  CHECK(k(5, 2) == 3.0);
  CHECK(k(0, 1) == 0.0);
}
