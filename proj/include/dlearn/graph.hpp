#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dlearn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered (source, destination) pair; every undirected link appears twice.
struct DirectedEdge {
  std::size_t source;
  std::size_t destination;
};

/// Undirected, simple communication graph.
///
/// Undirected edges are normalized to (min, max) and kept sorted. The directed
/// view enumerates all ordered pairs (i, j) in lexicographic order, which fixes
/// the row order of the incidence matrices and of the per-edge multipliers.
class NetworkGraph {
 public:
  /// Throws GraphError on self-loops, duplicate edges or out-of-range indices.
  NetworkGraph(std::size_t node_count, std::vector<std::pair<std::size_t, std::size_t>> edges);

  std::size_t node_count() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  /// L, the number of directed edges.
  std::size_t directed_edge_count() const { return directed_.size(); }

  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<DirectedEdge>& directed_edges() const { return directed_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_[i]; }
  std::size_t degree(std::size_t i) const { return neighbors_[i].size(); }

  /// Index into directed_edges() of (i, j); throws GraphError when absent.
  std::size_t directed_index(std::size_t i, std::size_t j) const;

  bool connected() const;

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<DirectedEdge> directed_;
};

NetworkGraph build_graph(std::size_t node_count,
                         std::vector<std::pair<std::size_t, std::size_t>> edges);

bool is_connected(const NetworkGraph& graph);

/// Nodes uniform in the unit square, linked when within `radius`.
/// Throws GraphError if the sample is disconnected.
NetworkGraph random_geometric(std::size_t node_count, double radius, std::uint64_t seed);

/// Resamples with seed, seed+1, ... until a connected graph appears.
NetworkGraph connected_random_geometric(std::size_t node_count, double radius, std::uint64_t seed,
                                        std::size_t max_attempts = 1000);

NetworkGraph complete_graph(std::size_t node_count);
NetworkGraph path_graph(std::size_t node_count);
NetworkGraph ring_graph(std::size_t node_count);

/// Incidence and Laplacian matrices at scalar (p = 1) granularity.
struct GraphAlgebra {
  Matrix source;       // A_s, L x n
  Matrix destination;  // A_d, L x n
  Matrix oriented;     // E_o = A_s - A_d
  Matrix unoriented;   // E_u = A_s + A_d
  Matrix laplacian_oriented;    // L_o = E_o^T E_o / 2
  Matrix laplacian_unoriented;  // L_u = E_u^T E_u / 2
  Matrix degree;                // D = (L_o + L_u) / 2
  double gamma_o = 0.0;  // smallest nonzero eigenvalue of L_o
  double Gamma_u = 0.0;  // largest eigenvalue of L_u
};

/// Throws GraphError for disconnected graphs (gamma_o would vanish).
GraphAlgebra compute_algebra(const NetworkGraph& graph);

/// Kronecker expansion M (x) I_p.
Matrix expand_blocks(const Matrix& m, std::size_t block);

/// Edge-list text format: header "n=<count>" then one "i j" pair per line.
/// '#' starts a comment.
NetworkGraph read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const NetworkGraph& graph);

}  // namespace dlearn
