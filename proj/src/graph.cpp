#include "dlearn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <random>
#include <sstream>
#include <tuple>
#include <string>

#include "dlearn/errors.hpp"

namespace dlearn {

NetworkGraph::NetworkGraph(std::size_t node_count,
                           std::vector<std::pair<std::size_t, std::size_t>> edges)
    : n_(node_count), neighbors_(node_count) {
  for (auto& [a, b] : edges) {
    if (a >= n_ || b >= n_) {
      throw GraphError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                       ") out of range for n=" + std::to_string(n_));
    }
    if (a == b) throw GraphError("self-loop at node " + std::to_string(a));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  auto dup = std::adjacent_find(edges.begin(), edges.end());
  if (dup != edges.end()) {
    throw GraphError("duplicate edge (" + std::to_string(dup->first) + "," +
                     std::to_string(dup->second) + ")");
  }
  edges_ = std::move(edges);

  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  directed_.reserve(2 * edges_.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j : neighbors_[i]) directed_.push_back({i, j});
  }
}

std::size_t NetworkGraph::directed_index(std::size_t i, std::size_t j) const {
  auto it = std::lower_bound(directed_.begin(), directed_.end(), DirectedEdge{i, j},
                             [](const DirectedEdge& x, const DirectedEdge& y) {
                               return std::tie(x.source, x.destination) <
                                      std::tie(y.source, y.destination);
                             });
  if (it == directed_.end() || it->source != i || it->destination != j) {
    throw GraphError("no edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  return static_cast<std::size_t>(it - directed_.begin());
}

bool NetworkGraph::connected() const {
  if (n_ == 0) return false;
  std::vector<bool> seen(n_, false);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    std::size_t u = frontier.front();
    frontier.pop();
    for (std::size_t v : neighbors_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n_;
}

NetworkGraph build_graph(std::size_t node_count,
                         std::vector<std::pair<std::size_t, std::size_t>> edges) {
  return NetworkGraph(node_count, std::move(edges));
}

bool is_connected(const NetworkGraph& graph) { return graph.connected(); }

NetworkGraph random_geometric(std::size_t node_count, double radius, std::uint64_t seed) {
  if (node_count < 2) throw ParameterError("random_geometric needs n >= 2");
  if (!(radius > 0.0) || radius > std::sqrt(2.0) + 1e-15) {
    throw ParameterError("random_geometric radius must lie in (0, sqrt(2)]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, double>> pos(node_count);
  for (auto& [x, y] : pos) {
    x = unit(rng);
    y = unit(rng);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < node_count; ++i) {
    for (std::size_t j = i + 1; j < node_count; ++j) {
      double dx = pos[i].first - pos[j].first;
      double dy = pos[i].second - pos[j].second;
      if (std::hypot(dx, dy) <= radius) edges.emplace_back(i, j);
    }
  }
  NetworkGraph g(node_count, std::move(edges));
  if (!g.connected()) {
    throw GraphError("random geometric graph (n=" + std::to_string(node_count) +
                     ", seed=" + std::to_string(seed) + ") is disconnected");
  }
  return g;
}

NetworkGraph connected_random_geometric(std::size_t node_count, double radius,
                                        std::uint64_t seed, std::size_t max_attempts) {
  for (std::size_t a = 0; a < max_attempts; ++a) {
    try {
      return random_geometric(node_count, radius, seed + a);
    } catch (const GraphError&) {
    }
  }
  throw GraphError("no connected random geometric graph after " +
                   std::to_string(max_attempts) + " attempts");
}

NetworkGraph complete_graph(std::size_t node_count) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < node_count; ++i)
    for (std::size_t j = i + 1; j < node_count; ++j) edges.emplace_back(i, j);
  return NetworkGraph(node_count, std::move(edges));
}

NetworkGraph path_graph(std::size_t node_count) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i + 1 < node_count; ++i) edges.emplace_back(i, i + 1);
  return NetworkGraph(node_count, std::move(edges));
}

NetworkGraph ring_graph(std::size_t node_count) {
  if (node_count < 3) return path_graph(node_count);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < node_count; ++i) edges.emplace_back(i, (i + 1) % node_count);
  return NetworkGraph(node_count, std::move(edges));
}

GraphAlgebra compute_algebra(const NetworkGraph& graph) {
  if (!graph.connected()) throw GraphError("graph algebra requires a connected graph");
  const std::size_t n = graph.node_count();
  const std::size_t L = graph.directed_edge_count();
  if (L == 0) throw GraphError("graph algebra requires at least one edge");

  GraphAlgebra alg;
  alg.source = Matrix::Zero(L, n);
  alg.destination = Matrix::Zero(L, n);
  for (std::size_t e = 0; e < L; ++e) {
    const auto& de = graph.directed_edges()[e];
    alg.source(e, de.source) = 1.0;
    alg.destination(e, de.destination) = 1.0;
  }
  alg.oriented = alg.source - alg.destination;
  alg.unoriented = alg.source + alg.destination;
  alg.laplacian_oriented = 0.5 * alg.oriented.transpose() * alg.oriented;
  alg.laplacian_unoriented = 0.5 * alg.unoriented.transpose() * alg.unoriented;
  alg.degree = 0.5 * (alg.laplacian_oriented + alg.laplacian_unoriented);

  Eigen::SelfAdjointEigenSolver<Matrix> eu(alg.laplacian_unoriented, Eigen::EigenvaluesOnly);
  alg.Gamma_u = eu.eigenvalues().maxCoeff();

  Eigen::SelfAdjointEigenSolver<Matrix> eo(alg.laplacian_oriented, Eigen::EigenvaluesOnly);
  const double zero_tol = 1e-8 * alg.Gamma_u;
  alg.gamma_o = 0.0;
  for (Eigen::Index k = 0; k < eo.eigenvalues().size(); ++k) {
    if (eo.eigenvalues()(k) > zero_tol) {
      alg.gamma_o = eo.eigenvalues()(k);
      break;
    }
  }
  if (alg.gamma_o <= 0.0) throw GraphError("oriented Laplacian has no nonzero eigenvalue");
  return alg;
}

Matrix expand_blocks(const Matrix& m, std::size_t block) {
  if (block == 1) return m;
  const auto p = static_cast<Eigen::Index>(block);
  Matrix out = Matrix::Zero(m.rows() * p, m.cols() * p);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m(r, c) != 0.0) out.block(r * p, c * p, p, p).diagonal().setConstant(m(r, c));
  return out;
}

NetworkGraph read_edge_list(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  long long n = -1;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (n < 0) {
      if (first.rfind("n=", 0) != 0) {
        throw GraphError("line " + std::to_string(line_no) + ": expected header n=<count>");
      }
      try {
        n = std::stoll(first.substr(2));
      } catch (const std::exception&) {
        throw GraphError("line " + std::to_string(line_no) + ": bad node count");
      }
      if (n < 0) throw GraphError("line " + std::to_string(line_no) + ": negative node count");
      continue;
    }
    long long a = 0, b = 0;
    std::istringstream pair_stream(line);
    std::string extra;
    if (!(pair_stream >> a >> b) || (pair_stream >> extra) || a < 0 || b < 0) {
      throw GraphError("line " + std::to_string(line_no) + ": expected 'i j'");
    }
    edges.emplace_back(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  if (n < 0) throw GraphError("missing header n=<count>");
  return NetworkGraph(static_cast<std::size_t>(n), std::move(edges));
}

void write_edge_list(std::ostream& out, const NetworkGraph& graph) {
  out << "n=" << graph.node_count() << '\n';
  for (const auto& [a, b] : graph.edges()) out << a << ' ' << b << '\n';
}

}  // namespace dlearn
