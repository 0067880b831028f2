#include "dlearn/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "dlearn/errors.hpp"

namespace dlearn {

namespace {

struct Whitened {
  Matrix W;  // L^{-1} H
  Vector z;  // L^{-1} y
};

Whitened whiten(const BlueLocalData& data) {
  if (data.H.rows() != data.y.size() || data.Sigma.rows() != data.y.size() ||
      data.Sigma.cols() != data.y.size()) {
    throw DataError("BLUE data dimensions do not match");
  }
  Eigen::LLT<Matrix> llt(data.Sigma);
  if (llt.info() != Eigen::Success) throw DataError("observation covariance is not positive definite");
  Whitened w;
  w.W = llt.matrixL().solve(data.H);
  w.z = llt.matrixL().solve(data.y);
  return w;
}

}  // namespace

QuadraticCost make_blue_cost(const BlueLocalData& data) {
  Whitened w = whiten(data);
  return QuadraticCost(w.W.transpose() * w.W, w.W.transpose() * w.z, 0.5 * w.z.squaredNorm());
}

Vector blue_centralized(const std::vector<BlueLocalData>& data) {
  if (data.empty()) throw ParameterError("no BLUE data");
  const auto p = data.front().H.cols();
  Matrix Q = Matrix::Zero(p, p);
  Vector b = Vector::Zero(p);
  for (const auto& d : data) {
    Whitened w = whiten(d);
    Q += w.W.transpose() * w.W;
    b += w.W.transpose() * w.z;
  }
  Eigen::LLT<Matrix> llt(Q);
  if (llt.info() != Eigen::Success) throw DataError("pooled BLUE normal matrix is singular");
  return llt.solve(b);
}

Vector dblue_local_update(const BlueLocalData& data, const NodeState& state,
                          const std::vector<Vector>& neighbor_estimates, double penalty) {
  if (!(penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  Whitened w = whiten(data);
  const auto p = data.H.cols();
  const double d = static_cast<double>(neighbor_estimates.size());
  Vector anchor = Vector::Zero(p);
  for (const auto& sj : neighbor_estimates) anchor += 0.5 * (state.s + sj);
  Matrix A = w.W.transpose() * w.W + 2.0 * penalty * d * Matrix::Identity(p, p);
  Vector rhs = w.W.transpose() * w.z - state.v + 2.0 * penalty * anchor;
  return A.ldlt().solve(rhs);
}

RunTrace daverage_run(const NetworkGraph& graph, const Matrix& values, double penalty,
                      std::size_t iterations, LinkNoise noise) {
  if (values.cols() != static_cast<Eigen::Index>(graph.node_count())) {
    throw ParameterError("need one value column per node");
  }
  std::vector<QuadraticCost> owned;
  owned.reserve(graph.node_count());
  for (Eigen::Index i = 0; i < values.cols(); ++i) owned.push_back(make_average_cost(values.col(i)));
  std::vector<LocalCost*> costs;
  for (auto& c : owned) costs.push_back(&c);

  RunOptions opt;
  opt.penalty = penalty;
  opt.iterations = iterations;
  opt.noise = noise;
  opt.reference = Vector(values.rowwise().mean());
  opt.graph_id = "average";
  return admm_run(graph, costs, opt);
}

double BitChannel::log_density(double y, int bit) const {
  const double d = density(y, bit);
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw DataError("channel density is zero or invalid at y=" + std::to_string(y));
  }
  return std::log(d);
}

AwgnBpskChannel::AwgnBpskChannel(double variance) : variance_(variance) {
  if (!(variance > 0.0)) throw ParameterError("AWGN variance must be > 0");
}

double AwgnBpskChannel::density(double y, int bit) const {
  return std::exp(log_density(y, bit));
}

double AwgnBpskChannel::log_density(double y, int bit) const {
  const double x = bit == 0 ? 1.0 : -1.0;
  const double r = y - x;
  return -0.5 * r * r / variance_ - 0.5 * std::log(2.0 * std::numbers::pi * variance_);
}

double AwgnBpskChannel::transmit(int bit, std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance_));
  return (bit == 0 ? 1.0 : -1.0) + gauss(rng);
}

BinarySymmetricChannel::BinarySymmetricChannel(double crossover) : eps_(crossover) {
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw ParameterError("crossover must lie in [0, 1]");
}

double BinarySymmetricChannel::density(double y, int bit) const {
  const int received = y >= 0.5 ? 1 : 0;
  return received == bit ? 1.0 - eps_ : eps_;
}

DensityChannel::DensityChannel(std::function<double(double, int)> density)
    : density_(std::move(density)) {
  if (!density_) throw ParameterError("empty density function");
}

double DensityChannel::density(double y, int bit) const { return density_(y, bit); }

Vector llr_compute(const BitChannel& channel, const Vector& received) {
  Vector gamma(received.size());
  for (Eigen::Index l = 0; l < received.size(); ++l) {
    gamma(l) = channel.log_density(received(l), 0) - channel.log_density(received(l), 1);
    if (!std::isfinite(gamma(l))) throw DataError("non-finite LLR at position " + std::to_string(l));
  }
  return gamma;
}

std::size_t ml_decode(const Vector& mean_llr, const Codebook& codebook) {
  if (codebook.rows() == 0) throw ParameterError("empty codebook");
  if (codebook.cols() != mean_llr.size()) throw ParameterError("codeword length mismatch");
  Vector scores = codebook * mean_llr;
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores(k) < scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(k);
  }
  return best;
}

Codebook random_linear_codebook(std::size_t message_bits, std::size_t length, std::size_t size,
                                std::uint64_t seed) {
  if (message_bits == 0 || message_bits >= 63 || length == 0) {
    throw ParameterError("invalid code dimensions");
  }
  if (size == 0 || size > (std::size_t{1} << message_bits)) {
    throw ParameterError("codebook size must lie in [1, 2^k]");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::vector<int>> G(message_bits, std::vector<int>(length));
    for (auto& row : G)
      for (auto& g : row) g = coin(rng) ? 1 : 0;

    Codebook C(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(length));
    std::set<std::string> seen;
    bool distinct = true;
    for (std::size_t m = 0; m < size && distinct; ++m) {
      std::string key(length, '0');
      for (std::size_t l = 0; l < length; ++l) {
        int bit = 0;
        for (std::size_t j = 0; j < message_bits; ++j) bit ^= static_cast<int>((m >> j) & 1U) & G[j][l];
        C(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(l)) = bit;
        key[l] = static_cast<char>('0' + bit);
      }
      distinct = seen.insert(key).second;
    }
    if (distinct) return C;
  }
  throw DataError("could not draw a generator with distinct codewords");
}

Codebook read_codebook(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string w = line.substr(first, last - first + 1);
    if (w.find_first_not_of("01") != std::string::npos) {
      throw DataError("codebook line " + std::to_string(line_no) + ": expected a binary string");
    }
    if (!words.empty() && w.size() != words.front().size()) {
      throw DataError("codebook line " + std::to_string(line_no) + ": length differs from first codeword");
    }
    words.push_back(std::move(w));
  }
  if (words.empty()) throw DataError("codebook is empty");
  Codebook C(static_cast<Eigen::Index>(words.size()), static_cast<Eigen::Index>(words.front().size()));
  for (std::size_t k = 0; k < words.size(); ++k)
    for (std::size_t l = 0; l < words[k].size(); ++l)
      C(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = words[k][l] == '1' ? 1.0 : 0.0;
  return C;
}

void write_codebook(std::ostream& out, const Codebook& codebook) {
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    for (Eigen::Index l = 0; l < codebook.cols(); ++l) out << (codebook(k, l) != 0.0 ? '1' : '0');
    out << '\n';
  }
}

DecodeTrial decode_trial(const NetworkGraph& graph, const Codebook& codebook,
                         double noise_variance, double penalty, std::size_t iterations,
                         std::mt19937_64& rng) {
  const std::size_t n = graph.node_count();
  const auto p = codebook.cols();
  AwgnBpskChannel channel(noise_variance);
  std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(codebook.rows()) - 1);

  DecodeTrial trial;
  trial.transmitted = pick(rng);
  Matrix llrs(p, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Vector y(p);
    for (Eigen::Index l = 0; l < p; ++l) {
      y(l) = channel.transmit(static_cast<int>(codebook(static_cast<Eigen::Index>(trial.transmitted), l)), rng);
    }
    llrs.col(static_cast<Eigen::Index>(i)) = llr_compute(channel, y);
  }
  trial.centralized = ml_decode(llrs.rowwise().sum(), codebook);
  trial.centralized_bit_errors = static_cast<std::size_t>(
      (codebook.row(static_cast<Eigen::Index>(trial.centralized)) -
       codebook.row(static_cast<Eigen::Index>(trial.transmitted)))
          .cwiseAbs()
          .sum());

  RunTrace trace = daverage_run(graph, llrs, penalty, iterations);
  trial.decentralized.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    trial.decentralized[i] = ml_decode(trace.final_estimates.col(static_cast<Eigen::Index>(i)), codebook);
  }
  return trial;
}

DemodLocalStats demod_local_stats(const Matrix& H, const Vector& y) {
  if (H.rows() != y.size()) throw DataError("demodulation data dimensions do not match");
  return {H.transpose() * y, H.transpose() * H};
}

Vector ml_demodulate(const Vector& mean_r, const Matrix& mean_R, const std::vector<double>& alphabet,
                     std::size_t cap) {
  const auto N = mean_r.size();
  if (mean_R.rows() != N || mean_R.cols() != N) throw ParameterError("mean_R must be N x N");
  if (alphabet.empty()) throw ParameterError("empty alphabet");
  std::vector<double> symbols(alphabet);
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());

  const double A = static_cast<double>(symbols.size());
  if (std::pow(A, static_cast<double>(N)) > static_cast<double>(cap)) {
    throw ParameterError("search space |A|^N exceeds the enumeration cap; reduce the block length");
  }

  std::vector<std::size_t> digits(static_cast<std::size_t>(N), 0);
  Vector s(N);
  Vector best;
  double best_score = -std::numeric_limits<double>::infinity();
  while (true) {
    for (Eigen::Index k = 0; k < N; ++k) s(k) = symbols[digits[static_cast<std::size_t>(k)]];
    const double score = 2.0 * mean_r.dot(s) - s.dot(mean_R * s);
    // lexicographic enumeration: keep the first maximizer
    if (score > best_score) {
      best_score = score;
      best = s;
    }
    Eigen::Index pos = N - 1;
    while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == symbols.size()) {
      digits[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return best;
}

namespace {

void observed_rows(const LassoLocalData& data, Matrix& R, Vector& y) {
  if (data.R.rows() != data.y.size()) throw DataError("Lasso data dimensions do not match");
  if (data.observed.empty()) {
    R = data.R;
    y = data.y;
    return;
  }
  if (data.observed.size() != static_cast<std::size_t>(data.y.size())) {
    throw DataError("observation mask length does not match the data");
  }
  std::vector<Eigen::Index> keep;
  for (std::size_t r = 0; r < data.observed.size(); ++r)
    if (data.observed[r]) keep.push_back(static_cast<Eigen::Index>(r));
  R.resize(static_cast<Eigen::Index>(keep.size()), data.R.cols());
  y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    R.row(static_cast<Eigen::Index>(k)) = data.R.row(keep[k]);
    y(static_cast<Eigen::Index>(k)) = data.y(keep[k]);
  }
}

}  // namespace

QuadraticCost make_lasso_cost(const LassoLocalData& data, double lambda, std::size_t node_count) {
  if (lambda < 0.0) throw ParameterError("lambda must be >= 0");
  if (node_count == 0) throw ParameterError("node count must be positive");
  Matrix R;
  Vector y;
  observed_rows(data, R, y);
  return QuadraticCost(2.0 * R.transpose() * R, 2.0 * R.transpose() * y, y.squaredNorm(),
                       lambda / static_cast<double>(node_count));
}

Vector lasso_centralized(const std::vector<LassoLocalData>& data, double lambda) {
  if (data.empty()) throw ParameterError("no Lasso data");
  std::vector<QuadraticCost> owned;
  for (const auto& d : data) owned.push_back(make_lasso_cost(d, lambda, data.size()));
  std::vector<const LocalCost*> costs;
  for (const auto& c : owned) costs.push_back(&c);
  return centralized_oracle(costs);
}

RunTrace dlasso_run(const NetworkGraph& graph, const std::vector<LassoLocalData>& data,
                    double lambda, double penalty, std::size_t iterations) {
  if (data.size() != graph.node_count()) throw ParameterError("need one data block per node");
  std::vector<QuadraticCost> owned;
  owned.reserve(data.size());
  for (const auto& d : data) owned.push_back(make_lasso_cost(d, lambda, data.size()));
  std::vector<LocalCost*> costs;
  for (auto& c : owned) costs.push_back(&c);

  RunOptions opt;
  opt.penalty = penalty;
  opt.iterations = iterations;
  opt.reference = lasso_centralized(data, lambda);
  opt.graph_id = "lasso";
  return admm_run(graph, costs, opt);
}

}  // namespace dlearn
