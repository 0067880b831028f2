#include "dlearn/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "dlearn/errors.hpp"

namespace dlearn {

AdaptiveNodeState AdaptiveNodeState::lms(std::size_t p) {
  const auto d = static_cast<Eigen::Index>(p);
  return {Vector::Zero(d), Vector::Zero(d), Matrix(), Vector()};
}

AdaptiveNodeState AdaptiveNodeState::rls(std::size_t p, double delta) {
  if (!(delta > 0.0)) throw ParameterError("RLS initialization delta must be > 0");
  const auto d = static_cast<Eigen::Index>(p);
  return {Vector::Zero(d), Vector::Zero(d), delta * Matrix::Identity(d, d), Vector::Zero(d)};
}

namespace {

Vector disagreement(const Vector& s, const std::vector<Vector>& neighbors) {
  Vector sum = Vector::Zero(s.size());
  for (const auto& sj : neighbors) sum += s - sj;
  return sum;
}

}  // namespace

void dlms_step(AdaptiveNodeState& state, double y, const Vector& h,
               const std::vector<Vector>& neighbor_estimates, double mu, double penalty) {
  if (!(mu > 0.0)) throw ParameterError("LMS step size must be > 0");
  if (penalty < 0.0 || (!neighbor_estimates.empty() && !(penalty > 0.0))) {
    throw ParameterError("ADMM penalty c must be > 0");
  }
  const Vector dis = disagreement(state.s, neighbor_estimates);
  state.v += penalty * dis;
  const double e = 2.0 * (y - h.dot(state.s));
  state.s += mu * (h * e - state.v - penalty * dis);
}

Matrix rank_one_inverse_update(const Matrix& Phi_inv, const Vector& h, double gamma) {
  const Vector g = Phi_inv * h;
  const double denom = gamma + h.dot(g);
  if (!(denom > 0.0)) throw DataError("rank-one update denominator is not positive");
  Matrix out = (Phi_inv - (g * g.transpose()) / denom) / gamma;
  return 0.5 * (out + out.transpose());
}

void drls_step(AdaptiveNodeState& state, double y, const Vector& h,
               const std::vector<Vector>& neighbor_estimates, double gamma, double penalty) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("forgetting factor must lie in (0, 1]");
  if (penalty < 0.0 || (!neighbor_estimates.empty() && !(penalty > 0.0))) {
    throw ParameterError("ADMM penalty c must be > 0");
  }
  if (state.Phi_inv.rows() != state.s.size()) throw ParameterError("RLS state not initialized");
  state.v += penalty * disagreement(state.s, neighbor_estimates);
  state.Phi_inv = rank_one_inverse_update(state.Phi_inv, h, gamma);
  state.psi = gamma * state.psi + h * y;
  state.s = state.Phi_inv * (state.psi - 0.5 * state.v);
}

AdaptiveTrace adaptive_run(const NetworkGraph& graph, SampleStream& stream,
                           const AdaptiveOptions& options) {
  const std::size_t n = graph.node_count();
  const std::size_t p = stream.dimension();
  if (stream.node_count() != n) throw ParameterError("stream and graph disagree on node count");
  const bool cooperative = options.algorithm != AdaptiveAlgorithm::llms;
  if (cooperative && !graph.connected()) throw GraphError("decentralized filters need a connected graph");

  std::vector<AdaptiveNodeState> states;
  for (std::size_t i = 0; i < n; ++i) {
    states.push_back(options.algorithm == AdaptiveAlgorithm::drls ? AdaptiveNodeState::rls(p, options.delta)
                                                                  : AdaptiveNodeState::lms(p));
  }
  LinkChannel channel(graph, cooperative ? options.noise : LinkNoise::none());

  AdaptiveTrace trace;
  trace.n = n;
  trace.p = p;
  trace.estimates.reserve(options.steps + 1);
  trace.truth.reserve(options.steps + 1);
  trace.estimates.push_back(Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n)));
  trace.truth.push_back(stream.truth());

  Matrix S = trace.estimates.front();
  const bool exchange = cooperative && options.exchange_multipliers;
  const auto& dir = graph.directed_edges();
  // w(:, e) for e = (i, j) is node i's half of the multiplier on that link
  Matrix W = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(exchange ? dir.size() : 0));
  std::vector<Vector> nb;
  for (std::size_t t = 1; t <= options.steps; ++t) {
    StreamSample sample = stream.next();
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      const double r = sample.y(col) - sample.H.col(col).dot(S.col(col));
      mse += r * r;
    }
    trace.global_mse.push_back(mse / static_cast<double>(n));

    const Matrix received = cooperative ? channel.transmit(S) : Matrix();
    const Matrix heard_w = exchange ? channel.transmit_edges(W) : Matrix();
    std::size_t e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      nb.clear();
      const std::size_t first = e;
      if (cooperative) {
        for (std::size_t k = 0; k < graph.degree(i); ++k, ++e) nb.push_back(received.col(static_cast<Eigen::Index>(e)));
      }
      if (exchange) {
        states[i].v.setZero();
        for (std::size_t f = first; f < e; ++f) {
          const auto fe = static_cast<Eigen::Index>(f);
          states[i].v += W.col(fe) - heard_w.col(fe);
          W.col(fe) += 0.5 * options.penalty * (S.col(col) - received.col(fe));
        }
      }
      switch (options.algorithm) {
        case AdaptiveAlgorithm::dlms:
        case AdaptiveAlgorithm::llms:
          dlms_step(states[i], sample.y(col), sample.H.col(col), nb, options.mu,
                    cooperative ? options.penalty : 0.0);
          break;
        case AdaptiveAlgorithm::drls:
          drls_step(states[i], sample.y(col), sample.H.col(col), nb, options.gamma, options.penalty);
          if (options.check_every > 0 && t % options.check_every == 0) {
            Eigen::LLT<Matrix> llt(states[i].Phi_inv);
            if (llt.info() != Eigen::Success) {
              throw DataError("inverse Grammian lost positive definiteness at node " + std::to_string(i) +
                              ", t=" + std::to_string(t) + "; re-factorize or raise delta");
            }
          }
          break;
      }
      S.col(col) = states[i].s;
    }
    if (!S.allFinite()) throw ConvergenceError("adaptive filter diverged at t=" + std::to_string(t), 0.0);
    trace.estimates.push_back(S);
    trace.truth.push_back(stream.truth());
    trace.regressors.push_back(std::move(sample.H));
    trace.observations.push_back(std::move(sample.y));
  }
  return trace;
}

Vector averaged_estimate(const AdaptiveTrace& trace, std::size_t from, std::optional<std::size_t> node) {
  if (from >= trace.estimates.size()) throw ParameterError("averaging window is empty");
  if (node && *node >= trace.n) throw ParameterError("node index out of range");
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(trace.p));
  for (std::size_t t = from; t < trace.estimates.size(); ++t) {
    const Matrix& S = trace.estimates[t];
    sum += node ? Vector(S.col(static_cast<Eigen::Index>(*node))) : Vector(S.rowwise().mean());
  }
  return sum / static_cast<double>(trace.estimates.size() - from);
}

TrackingMetrics tracking_metrics(const AdaptiveTrace& trace) {
  const std::size_t steps = trace.regressors.size();
  if (trace.estimates.size() != steps + 1 || trace.truth.size() != steps + 1 ||
      trace.global_mse.size() != steps) {
    throw DataError("trace and truth lengths do not line up");
  }
  TrackingMetrics m;
  const auto T = static_cast<Eigen::Index>(steps);
  const auto n = static_cast<Eigen::Index>(trace.n);
  m.emse.resize(T, n);
  m.msd.resize(T, n);
  m.global_mse = Eigen::Map<const Vector>(trace.global_mse.data(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Matrix& prev = trace.estimates[static_cast<std::size_t>(t)];
    const Matrix& cur = trace.estimates[static_cast<std::size_t>(t) + 1];
    const Vector& truth_prev = trace.truth[static_cast<std::size_t>(t)];
    const Vector& truth_cur = trace.truth[static_cast<std::size_t>(t) + 1];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = trace.regressors[static_cast<std::size_t>(t)].col(i).dot(prev.col(i) - truth_prev);
      m.emse(t, i) = a * a;
      m.msd(t, i) = (cur.col(i) - truth_cur).squaredNorm();
    }
  }
  return m;
}

TrackingMetrics average_metrics(const std::vector<TrackingMetrics>& runs) {
  if (runs.empty()) throw ParameterError("no runs to average");
  TrackingMetrics out = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].msd.rows() != out.msd.rows() || runs[r].msd.cols() != out.msd.cols()) {
      throw DataError("runs differ in length");
    }
    out.emse += runs[r].emse;
    out.msd += runs[r].msd;
    out.global_mse += runs[r].global_mse;
  }
  const double k = static_cast<double>(runs.size());
  out.emse /= k;
  out.msd /= k;
  out.global_mse /= k;
  return out;
}

TrackingStream::TrackingStream(const TrackingScenario& scenario) : sc_(scenario), rng_(scenario.seed) {
  if (sc_.n == 0 || sc_.p == 0) throw ParameterError("tracking scenario needs n, p >= 1");
  if (sc_.driving_variance < 0.0 || sc_.observation_variance < 0.0) {
    throw ParameterError("variances must be >= 0");
  }
  const auto p = static_cast<Eigen::Index>(sc_.p);
  if (!(sc_.theta_min <= sc_.theta_max)) throw ParameterError("theta range is empty");
  std::uniform_real_distribution<double> unit(sc_.theta_min, sc_.theta_max);
  std::normal_distribution<double> gauss(0.0, 1.0);
  theta_.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) theta_(k) = sc_.theta_scale * unit(rng_);
  s0_.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) s0_(k) = sc_.initial_scale * gauss(rng_);
}

StreamSample TrackingStream::next() {
  const auto p = static_cast<Eigen::Index>(sc_.p);
  const auto n = static_cast<Eigen::Index>(sc_.n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd_zeta = std::sqrt(sc_.driving_variance);
  const double sd_obs = std::sqrt(sc_.observation_variance);
  for (Eigen::Index k = 0; k < p; ++k) s0_(k) = theta_(k) * s0_(k) + sd_zeta * gauss(rng_);

  StreamSample out;
  out.t = ++t_;
  out.H.resize(p, n);
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) out.H(k, i) = gauss(rng_);
    out.y(i) = out.H.col(i).dot(s0_) + sd_obs * gauss(rng_);
  }
  return out;
}

void check_ar_stable(const Vector& alpha) {
  const auto p = alpha.size();
  if (p == 0) throw ParameterError("AR order must be >= 1");
  Matrix companion = Matrix::Zero(p, p);
  companion.row(0) = -alpha.transpose();
  for (Eigen::Index k = 1; k < p; ++k) companion(k, k - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(companion, false);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (std::abs(es.eigenvalues()(k)) >= 1.0) throw ParameterError("AR polynomial is not stable");
  }
}

ArStream::ArStream(ArScenario scenario) : sc_(std::move(scenario)), rng_(sc_.seed) {
  check_ar_stable(sc_.alpha);
  if (sc_.channels.empty()) throw ParameterError("AR scenario needs at least one node");
  std::size_t taps = static_cast<std::size_t>(sc_.alpha.size());
  for (const auto& c : sc_.channels) {
    if (c.size() == 0) throw ParameterError("channel needs at least one tap");
    taps = std::max(taps, static_cast<std::size_t>(c.size()));
  }
  if (sc_.driving_variance < 0.0 || sc_.sensing_variance < 0.0) throw ParameterError("variances must be >= 0");
  source_.assign(taps, 0.0);
  past_y_.assign(sc_.channels.size(), std::vector<double>(static_cast<std::size_t>(sc_.alpha.size()), 0.0));
  for (std::size_t k = 0; k < sc_.burn_in; ++k) advance();
}

double ArStream::advance() {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double theta = std::sqrt(sc_.driving_variance) * gauss(rng_);
  for (Eigen::Index k = 0; k < sc_.alpha.size(); ++k) theta -= sc_.alpha(k) * source_[static_cast<std::size_t>(k)];
  source_.pop_back();
  source_.insert(source_.begin(), theta);

  const double sd = std::sqrt(sc_.sensing_variance);
  for (std::size_t i = 0; i < sc_.channels.size(); ++i) {
    double y = sd * gauss(rng_);
    const Vector& c = sc_.channels[i];
    for (Eigen::Index l = 0; l < c.size(); ++l) y += c(l) * source_[static_cast<std::size_t>(l)];
    auto& hist = past_y_[i];
    hist.pop_back();
    hist.insert(hist.begin(), y);
  }
  return theta;
}

StreamSample ArStream::next() {
  const auto n = static_cast<Eigen::Index>(sc_.channels.size());
  const auto p = sc_.alpha.size();
  StreamSample out;
  out.t = ++t_;
  out.H.resize(p, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < p; ++k) out.H(k, i) = -past_y_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  advance();
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.y(i) = past_y_[static_cast<std::size_t>(i)].front();
  return out;
}

ArScenario spectrum_scenario(std::size_t n, const std::vector<std::size_t>& nulled, std::uint64_t seed) {
  ArScenario sc;
  sc.alpha = Vector(2);
  sc.alpha << 0.0, 0.81;
  sc.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> tap(-0.2, 0.2);
  for (std::size_t i = 0; i < n; ++i) {
    Vector c;
    if (std::find(nulled.begin(), nulled.end(), i) != nulled.end()) {
      c = Vector(3);
      c << 1.0, 0.0, 1.0;
    } else {
      c = Vector(2);
      c << 1.0, tap(rng);
    }
    sc.channels.push_back(c);
  }
  return sc;
}

double ar_psd(const Vector& alpha, double omega) {
  std::complex<double> a(1.0, 0.0);
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    a += alpha(k) * std::polar(1.0, -omega * static_cast<double>(k + 1));
  }
  return 1.0 / std::norm(a);
}

double ar_psd_peak(const Vector& alpha, std::size_t grid_points) {
  if (grid_points < 2) throw ParameterError("PSD grid needs at least two points");
  double best_w = 0.0;
  double best = -1.0;
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double w = std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    const double v = ar_psd(alpha, w);
    if (v > best) {
      best = v;
      best_w = w;
    }
  }
  return best_w;
}

}  // namespace dlearn
