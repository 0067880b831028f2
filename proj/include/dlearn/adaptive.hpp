#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "dlearn/admm.hpp"

namespace dlearn {

struct AdaptiveNodeState {
  Vector s;
  Vector v;
  Matrix Phi_inv;  // RLS only
  Vector psi;      // RLS only

  static AdaptiveNodeState lms(std::size_t p);
  /// Phi_inv(0) = delta * I, psi(0) = 0.
  static AdaptiveNodeState rls(std::size_t p, double delta);
};

/// Regression data of one time instant: y_i(t) and h_i(t) for every node.
struct StreamSample {
  std::size_t t = 0;
  Vector y;  // n
  Matrix H;  // p x n, column i is h_i(t)
};

/// Pull-based sample source.
class SampleStream {
 public:
  virtual ~SampleStream() = default;
  virtual std::size_t node_count() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual StreamSample next() = 0;
  /// Parameter the samples were generated from, at the last emitted t.
  virtual Vector truth() const = 0;
};

/// v += c sum_j (s - s_j); s += mu [h e - v - c sum_j (s - s_j)], e = 2 (y - h's).
void dlms_step(AdaptiveNodeState& state, double y, const Vector& h,
               const std::vector<Vector>& neighbor_estimates, double mu, double penalty);

/// v += c sum_j (s - s_j); Phi_inv by the rank-one inverse update; psi = gamma psi + h y;
/// s = Phi_inv psi - 0.5 Phi_inv v. DataError when Phi_inv stops being positive definite.
void drls_step(AdaptiveNodeState& state, double y, const Vector& h,
               const std::vector<Vector>& neighbor_estimates, double gamma, double penalty);

/// (gamma Phi + h h')^{-1} from Phi^{-1}.
Matrix rank_one_inverse_update(const Matrix& Phi_inv, const Vector& h, double gamma);

enum class AdaptiveAlgorithm { dlms, drls, llms };

struct AdaptiveOptions {
  AdaptiveAlgorithm algorithm = AdaptiveAlgorithm::dlms;
  double mu = 0.05;
  double penalty = 1.0;
  double gamma = 1.0;
  double delta = 100.0;
  std::size_t steps = 1000;
  LinkNoise noise{};
  /// Nodes also send their per-link multipliers and form
  /// v_i = sum_j (w_ij - w_ji). Same iterates on ideal links; under link noise
  /// the network-wide multiplier sum no longer drifts as a random walk.
  bool exchange_multipliers = false;
  /// How often Phi_inv is checked by Cholesky (0 disables).
  std::size_t check_every = 100;
};

/// Index 0 of `estimates` and `truth` is the state before the first sample;
/// sample t (1-based) is stored at regressors[t-1], observations[t-1].
struct AdaptiveTrace {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<Matrix> estimates;     // steps + 1 entries, p x n
  std::vector<Vector> truth;         // steps + 1 entries
  std::vector<Matrix> regressors;    // steps entries, p x n
  std::vector<Vector> observations;  // steps entries, n
  std::vector<double> global_mse;    // (1/n) sum (y_i(t) - h_i(t)'s_i(t-1))^2
};

AdaptiveTrace adaptive_run(const NetworkGraph& graph, SampleStream& stream,
                           const AdaptiveOptions& options);

struct TrackingMetrics {
  Matrix emse;  // steps x n
  Matrix msd;   // steps x n
  Vector global_mse;
};

/// Single-run metrics; average several with average_metrics for expectations.
TrackingMetrics tracking_metrics(const AdaptiveTrace& trace);

/// Mean of the estimates stored at indices [from, end), for one node or,
/// when `node` is empty, averaged over the network.
Vector averaged_estimate(const AdaptiveTrace& trace, std::size_t from,
                         std::optional<std::size_t> node = std::nullopt);
TrackingMetrics average_metrics(const std::vector<TrackingMetrics>& runs);

// ---- scenario generators ----

struct TrackingScenario {
  std::size_t n = 20;
  std::size_t p = 4;
  double theta_scale = 1.0 - 1e-4;
  double theta_min = 0.0;
  double theta_max = 1.0;
  double driving_variance = 1e-4;
  double observation_variance = 1e-3;
  double initial_scale = 1.0;
  std::uint64_t seed = 0;
};

/// s0(t) = Theta s0(t-1) + zeta(t), Theta = scale * diag(U[theta_min, theta_max]); h_i(t) ~ N(0, I);
/// y_i(t) = h_i(t)'s0(t) + noise.
class TrackingStream : public SampleStream {
 public:
  explicit TrackingStream(const TrackingScenario& scenario);
  std::size_t node_count() const override { return sc_.n; }
  std::size_t dimension() const override { return sc_.p; }
  StreamSample next() override;
  Vector truth() const override { return s0_; }
  const Vector& theta() const { return theta_; }

 private:
  TrackingScenario sc_;
  std::mt19937_64 rng_;
  Vector theta_;
  Vector s0_;
  std::size_t t_ = 0;
};

struct ArScenario {
  Vector alpha;                       // theta(t) = -sum alpha_tau theta(t - tau) + w(t)
  std::vector<Vector> channels;       // FIR taps per node
  double driving_variance = 1.0;
  double sensing_variance = 0.1;
  std::size_t burn_in = 500;
  std::uint64_t seed = 0;
};

/// Throws ParameterError unless every root of 1 + sum alpha_tau z^-tau lies inside the unit circle.
void check_ar_stable(const Vector& alpha);

/// Source through per-node FIR channels plus sensing noise; regressors are
/// the node's own past observations h_i(t) = -[y_i(t-1) ... y_i(t-p)].
class ArStream : public SampleStream {
 public:
  explicit ArStream(ArScenario scenario);
  std::size_t node_count() const override { return sc_.channels.size(); }
  std::size_t dimension() const override { return static_cast<std::size_t>(sc_.alpha.size()); }
  StreamSample next() override;
  Vector truth() const override { return sc_.alpha; }

 private:
  double advance();
  ArScenario sc_;
  std::mt19937_64 rng_;
  std::vector<double> source_;               // recent theta, newest first
  std::vector<std::vector<double>> past_y_;  // per node, newest first
  std::size_t t_ = 0;
};

/// AR(2) source with poles 0.9 e^{+-i pi/2}; nodes listed in `nulled` see the
/// channel 1 + z^-2 (zero at pi/2), the rest [1, u] with u ~ U[-0.2, 0.2].
ArScenario spectrum_scenario(std::size_t n, const std::vector<std::size_t>& nulled, std::uint64_t seed);

/// 1 / |1 + sum alpha_tau e^{-i w tau}|^2.
double ar_psd(const Vector& alpha, double omega);
/// Location of the largest value of ar_psd on an even grid over [0, pi].
double ar_psd_peak(const Vector& alpha, std::size_t grid_points = 4097);

}  // namespace dlearn
