#pragma once

#include <cstdint>
#include <vector>

#include "dlearn/admm.hpp"

namespace dlearn {

// ---- linear SVM ----

struct SvmLocalData {
  Matrix X;  // p x m_i, one example per column
  Vector y;  // labels in {-1, +1}
  double C = 1.0;
};

/// Weights s and bias b, packed as sbar = [s; b].
struct SvmModel {
  Vector s;
  double b = 0.0;

  Vector packed() const;
  static SvmModel unpack(const Vector& sbar);
  double discriminant(const Vector& x) const { return x.dot(s) + b; }
};

/// Sum of C * max(0, 1 - y (s'x + b)) over the examples.
double hinge_loss(const SvmLocalData& data, const Vector& sbar);

/// 0.5 ||s||^2 + sum over nodes of the hinge terms.
double svm_objective(const std::vector<SvmLocalData>& data, const Vector& sbar);

struct SvmLocalSolveOptions {
  double tolerance = 1e-10;
  std::size_t max_passes = 5000;
};

/// Local subproblem for f_i(sbar) = ||s||^2 / (2n) + C sum hinge, i.e.
///   argmin f_i(sbar) + v'sbar + c sum_j ||sbar - (sbar_i + sbar_j)/2||^2,
/// solved by dual coordinate descent. `alpha` carries the box-constrained
/// dual variables between calls and is resized as needed. Needs degree >= 1.
Vector dsvm_local_solve(const SvmLocalData& data, std::size_t node_count,
                        const LocalSubproblem& sub, std::vector<double>& alpha,
                        const SvmLocalSolveOptions& options = {});

class SvmCost : public LocalCost {
 public:
  SvmCost(SvmLocalData data, std::size_t node_count);

  std::size_t dimension() const override { return static_cast<std::size_t>(data_.X.rows()) + 1; }
  double evaluate(const Vector& sbar) const override;
  Vector solve_local(const LocalSubproblem& sub) override;

  const SvmLocalData& data() const { return data_; }

 private:
  SvmLocalData data_;
  std::size_t n_;
  std::vector<double> alpha_;
};

/// Pooled soft-margin SVM, min 0.5||s||^2 + sum C_l hinge_l, by SMO.
SvmModel svm_centralized(const std::vector<SvmLocalData>& data, double tolerance = 1e-10,
                         std::size_t max_iterations = 1000000);

struct DsvmResult {
  std::vector<SvmModel> models;  // per node
  RunTrace trace;
};

DsvmResult dsvm_run(const NetworkGraph& graph, const std::vector<SvmLocalData>& data,
                    double penalty, std::size_t iterations,
                    const std::optional<Vector>& reference = std::nullopt);

// ---- hard K-means ----

struct ClusterStatistics {
  Matrix sums;    // p x K
  Vector counts;  // K
};

/// Index of the nearest centroid (lowest index on ties).
std::size_t nearest_centroid(const Matrix& centroids, const Vector& x);
std::vector<std::size_t> assign_clusters(const Matrix& centroids, const Matrix& observations);
ClusterStatistics cluster_statistics(const Matrix& observations,
                                     const std::vector<std::size_t>& assignment, std::size_t K);
double sum_squared_error(const Matrix& centroids, const Matrix& observations,
                         const std::vector<std::size_t>& assignment);

/// K distinct pooled observations picked by a seeded shuffle.
Matrix kmeans_initial_centroids(const Matrix& pooled, std::size_t K, std::uint64_t seed);

/// Pools per-node observation blocks in node order.
Matrix pool_observations(const std::vector<Matrix>& data);

struct LloydResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> sse;  // after each iteration
  std::size_t iterations = 0;
};

/// Centralized Lloyd iterations. Empty clusters are reseeded from the
/// observation farthest from its assigned centroid.
LloydResult lloyd_kmeans(const Matrix& pooled, Matrix initial_centroids, std::size_t max_iterations);

struct DkmeansOptions {
  std::size_t K = 2;
  double penalty = 10.0;  // eta
  std::size_t macro_iterations = 50;
  std::size_t inner_iterations = 50;
  std::uint64_t seed = 0;
};

struct DkmeansMacroRecord {
  std::size_t iteration = 0;
  double sse = 0.0;                 // every observation scored against its own node's centroids
  double consensus_error = 0.0;     // on the averaged cluster statistics
  std::size_t reassigned = 0;
};

struct DkmeansResult {
  std::vector<Matrix> centroids;                       // per node, p x K
  std::vector<std::vector<std::size_t>> assignments;   // per node, per observation
  std::vector<DkmeansMacroRecord> history;
  Matrix initial_centroids;
};

/// Alternates local hard assignment with ADMM averaging of per-cluster
/// [sums; counts]. ADMM states carry over between macro steps.
DkmeansResult dkmeans_run(const NetworkGraph& graph, const std::vector<Matrix>& data,
                          const DkmeansOptions& options);
DkmeansResult dkmeans_run(const NetworkGraph& graph, const std::vector<Matrix>& data,
                          const DkmeansOptions& options, const Matrix& initial_centroids);

}  // namespace dlearn
