#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "dlearn/graph.hpp"

namespace dlearn {

/// Link loads Y (L x T) observed on the mask, routing matrix R (L x F).
/// Links are the directed router pairs in lexicographic order, so link l is
/// owned by the source router of directed edge l.
struct TrafficInstance {
  Matrix Y;
  Matrix mask;  // L x T, 1 = observed
  Matrix R;     // L x F, 0/1
  std::size_t routers = 0;
  std::vector<std::pair<std::size_t, std::size_t>> router_edges;
  std::vector<std::size_t> link_owner;
  // ground truth, when synthetic
  Matrix X_true;
  Matrix A_true;

  std::size_t links() const { return static_cast<std::size_t>(Y.rows()); }
  std::size_t flows() const { return static_cast<std::size_t>(R.cols()); }
  std::size_t horizon() const { return static_cast<std::size_t>(Y.cols()); }
};

NetworkGraph router_graph(const TrafficInstance& instance);

struct SynthOptions {
  std::size_t routers = 6;
  std::size_t router_edges = 7;  // ring plus seeded chords
  std::size_t horizon = 50;      // T
  std::size_t rank = 2;
  double anomaly_density = 0.01;
  double anomaly_amplitude = 1.0;
  double noise_sigma = 0.0;
  double missing_fraction = 0.0;
  bool self_flows = false;
  std::uint64_t seed = 0;
};

/// Routers on a ring plus random chords; links are the directed router pairs,
/// flows are ordered router pairs routed on BFS shortest paths. Z = U V with
/// smooth sinusoidal temporal factors; A sparse with +-amplitude entries;
/// Y = R Z + R A + noise.
TrafficInstance synth_traffic(const SynthOptions& options);

struct AnomalySolution {
  Matrix X;
  Matrix A;
  Matrix P;  // factorized form only
  Matrix Q;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<double> objective_history;  // centralized solver only
};

/// ||P_Omega(Y - X - R A)||_F^2 + lambda_nuc ||X||_* + lambda_1 ||A||_1.
double convex_objective(const TrafficInstance& instance, const Matrix& X, const Matrix& A,
                        double lambda_nuc, double lambda_1);
/// ||P_Omega(Y - P Q' - R A)||_F^2 + lambda_nuc/2 (||P||^2 + ||Q||^2) + lambda_1 ||A||_1.
double factorized_objective(const TrafficInstance& instance, const Matrix& P, const Matrix& Q,
                            const Matrix& A, double lambda_nuc, double lambda_1);

struct CentralizedOptions {
  std::size_t max_iterations = 20000;
  double tolerance = 1e-8;
};

/// Accelerated proximal gradient with monotone restart.
AnomalySolution solve_centralized(const TrafficInstance& instance, double lambda_nuc, double lambda_1,
                                  const CentralizedOptions& options = {});

/// Largest violation of the subgradient optimality conditions of the convex
/// problem at (X, A), relative to max(lambda_nuc, lambda_1).
double convex_optimality_gap(const TrafficInstance& instance, const Matrix& X, const Matrix& A,
                             double lambda_nuc, double lambda_1);

struct DecentralizedOptions {
  std::size_t rank = 4;  // rho
  double penalty = 1.0;
  std::size_t iterations = 2000;
  std::size_t inner_iterations = 200;
  double inner_tolerance = 1e-10;
  std::size_t divergence_window = 100;
  /// Relative increase below which a step does not count as a rise.
  double rise_tolerance = 1e-6;
  std::uint64_t seed = 0;
};

struct DecentralizedRecord {
  std::size_t iteration = 0;
  double objective = 0.0;  // factorized objective summed over local copies
  double consensus_q = 0.0;
  double consensus_a = 0.0;
};

struct DecentralizedResult {
  std::vector<Matrix> P;  // per router, rows of its links
  std::vector<Matrix> Q;  // per router copy
  std::vector<Matrix> A;  // per router copy
  std::vector<DecentralizedRecord> history;
  /// Stacked P, averaged Q and A.
  AnomalySolution consensus;
};

/// ADMM on the per-router factorized problem; routers exchange only (Q_i, A_i).
/// ConvergenceError after `divergence_window` consecutive objective increases.
DecentralizedResult solve_factorized_decentralized(const TrafficInstance& instance, double lambda_nuc,
                                                   double lambda_1, const DecentralizedOptions& options);

struct Certificate {
  bool holds = false;
  double residual_norm = 0.0;  // spectral norm of P_Omega(Y - X - R A)
  double threshold = 0.0;
};

/// Global-optimality test for a stationary point of the factorized problem:
/// ||P_Omega(Y - P Q' - R A)||_2 <= (lambda_nuc / 2)(1 + tolerance).
Certificate optimality_certificate(const TrafficInstance& instance, const AnomalySolution& solution,
                                   double lambda_nuc, double tolerance = 1e-4);

struct RocPoint {
  double threshold = 0.0;
  double pfa = 0.0;
  double pd = 0.0;
};

/// |A_hat| >= tau declares an anomaly. DataError when the truth has no
/// anomalies (pd undefined) or no normal entries (pfa undefined).
std::vector<RocPoint> roc_curve(const Matrix& A_hat, const Matrix& A_true,
                                const std::vector<double>& thresholds);
/// Every distinct |A_hat| value plus +infinity, descending.
std::vector<double> roc_thresholds(const Matrix& A_hat);
/// Trapezoid area under the curve closed with (0,0) and (1,1).
double roc_auc(std::vector<RocPoint> curve);

/// Least-squares baseline: the least-norm A explaining the observed loads by R A
/// alone, to be thresholded.
Matrix least_squares_baseline(const TrafficInstance& instance);

/// Subspace baseline: rank-r SVD fit of the observed loads, then the least-norm
/// anomaly map explaining the residual.
Matrix subspace_baseline(const TrafficInstance& instance, std::size_t rank);

/// count values log-spaced on [lo, hi].
std::vector<double> lambda_grid(double lo, double hi, std::size_t count);

/// Y as CSV with blank cells for missing entries; R as a 0/1 CSV.
void write_loads_csv(std::ostream& out, const TrafficInstance& instance);
void write_routing_csv(std::ostream& out, const Matrix& R);
void read_loads_csv(std::istream& in, Matrix& Y, Matrix& mask);
Matrix read_routing_csv(std::istream& in);

}  // namespace dlearn
