#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <vector>

#include "dlearn/admm.hpp"
#include "dlearn/costs.hpp"

namespace dlearn {

// ---- D-BLUE and averaging ----

struct BlueLocalData {
  Vector y;      // m_i observations
  Matrix H;      // m_i x p
  Matrix Sigma;  // m_i x m_i, positive definite
};

/// 0.5 || Sigma^{-1/2} (y - H s) ||^2 as a quadratic cost. DataError if Sigma is not PD.
QuadraticCost make_blue_cost(const BlueLocalData& data);

/// (sum H'S^-1 H)^{-1} sum H'S^-1 y.
Vector blue_centralized(const std::vector<BlueLocalData>& data);

/// One closed-form local update of node i given the neighbors' latest estimates.
Vector dblue_local_update(const BlueLocalData& data, const NodeState& state,
                          const std::vector<Vector>& neighbor_estimates, double penalty);

/// ADMM averaging of the columns of `values` (p x n). The trace carries the
/// distance to the sample mean.
RunTrace daverage_run(const NetworkGraph& graph, const Matrix& values, double penalty,
                      std::size_t iterations, LinkNoise noise = {});

// ---- decoding ----

/// Conditional density of a received sample given the transmitted bit.
class BitChannel {
 public:
  virtual ~BitChannel() = default;
  virtual double density(double y, int bit) const = 0;
  /// Log-density; defaults to log(density).
  virtual double log_density(double y, int bit) const;
};

/// BPSK over AWGN: bit 0 -> +1, bit 1 -> -1.
class AwgnBpskChannel : public BitChannel {
 public:
  explicit AwgnBpskChannel(double variance);
  double density(double y, int bit) const override;
  double log_density(double y, int bit) const override;
  double variance() const { return variance_; }
  /// Noisy channel output for one bit.
  double transmit(int bit, std::mt19937_64& rng) const;

 private:
  double variance_;
};

/// Binary symmetric channel with crossover probability eps; y in {0, 1}.
class BinarySymmetricChannel : public BitChannel {
 public:
  explicit BinarySymmetricChannel(double crossover);
  double density(double y, int bit) const override;

 private:
  double eps_;
};

/// Arbitrary per-bit densities.
class DensityChannel : public BitChannel {
 public:
  explicit DensityChannel(std::function<double(double, int)> density);
  double density(double y, int bit) const override;

 private:
  std::function<double(double, int)> density_;
};

/// gamma_l = log p(y_l | 0) - log p(y_l | 1). DataError on zero density.
Vector llr_compute(const BitChannel& channel, const Vector& received);

/// Rows are codewords with entries in {0, 1}.
using Codebook = Matrix;

/// argmin_c sum_l gamma_l c_l; ties go to the lowest row index.
std::size_t ml_decode(const Vector& mean_llr, const Codebook& codebook);

/// Random linear code: messages 0..size-1 (k bits each) times a seeded
/// random k x length generator over GF(2).
Codebook random_linear_codebook(std::size_t message_bits, std::size_t length, std::size_t size,
                                std::uint64_t seed);

/// One binary string per line; blank lines and '#' comments ignored.
Codebook read_codebook(std::istream& in);
void write_codebook(std::ostream& out, const Codebook& codebook);

struct DecodeTrial {
  std::size_t transmitted = 0;
  std::size_t centralized = 0;
  std::vector<std::size_t> decentralized;  // per node
  std::size_t centralized_bit_errors = 0;
};

/// Every node observes the same codeword through its own AWGN channel.
/// Centralized decision uses the summed LLRs; node decisions use the ADMM
/// average after `iterations` steps.
DecodeTrial decode_trial(const NetworkGraph& graph, const Codebook& codebook,
                         double noise_variance, double penalty, std::size_t iterations,
                         std::mt19937_64& rng);

// ---- demodulation ----

struct DemodLocalStats {
  Vector r;  // H'y
  Matrix R;  // H'H
};

DemodLocalStats demod_local_stats(const Matrix& H, const Vector& y);

/// argmax over alphabet^N of 2 r's - s'Rs by enumeration; ties go to the
/// lexicographically smallest vector. ParameterError beyond `cap` candidates.
Vector ml_demodulate(const Vector& mean_r, const Matrix& mean_R, const std::vector<double>& alphabet,
                     std::size_t cap = 65536);

// ---- Lasso ----

/// Rows of R_i and y_i owned by node i. `observed` (optional) masks rows.
struct LassoLocalData {
  Matrix R;
  Vector y;
  std::vector<bool> observed;
};

/// ||P(y_i - R_i a)||^2 + (lambda/n) ||a||_1.
QuadraticCost make_lasso_cost(const LassoLocalData& data, double lambda, std::size_t node_count);

/// Minimizer of ||P(y - R a)||^2 + lambda ||a||_1 over the pooled data.
Vector lasso_centralized(const std::vector<LassoLocalData>& data, double lambda);

RunTrace dlasso_run(const NetworkGraph& graph, const std::vector<LassoLocalData>& data,
                    double lambda, double penalty, std::size_t iterations);

}  // namespace dlearn
