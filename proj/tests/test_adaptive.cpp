#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>

#include "dlearn/adaptive.hpp"
#include "dlearn/errors.hpp"
#include "helpers.hpp"

using namespace dlearn;

namespace {

/// Fixed parameter observed through Gaussian regressors, or a random walk when walk_variance > 0.
class StaticStream : public SampleStream {
 public:
  StaticStream(std::size_t n, Vector s0, double noise_sd, std::uint64_t seed, double walk_variance = 0.0)
      : n_(n), s0_(std::move(s0)), sd_(noise_sd), walk_(walk_variance), rng_(seed) {}
  std::size_t node_count() const override { return n_; }
  std::size_t dimension() const override { return static_cast<std::size_t>(s0_.size()); }
  StreamSample next() override {
    std::normal_distribution<double> g(0.0, 1.0);
    if (walk_ > 0.0)
      for (auto& x : s0_) x += std::sqrt(walk_) * g(rng_);
    StreamSample out;
    out.t = ++t_;
    out.H.resize(s0_.size(), static_cast<Eigen::Index>(n_));
    out.y.resize(static_cast<Eigen::Index>(n_));
    for (Eigen::Index i = 0; i < out.H.cols(); ++i) {
      for (Eigen::Index k = 0; k < out.H.rows(); ++k) out.H(k, i) = g(rng_);
      out.y(i) = out.H.col(i).dot(s0_) + sd_ * g(rng_);
    }
    return out;
  }
  Vector truth() const override { return s0_; }

 private:
  std::size_t n_;
  Vector s0_;
  double sd_, walk_;
  std::mt19937_64 rng_;
  std::size_t t_ = 0;
};

}  // namespace

TEST_CASE("dlms fixed point") {
  auto st = AdaptiveNodeState::lms(2);
  st.s << 0.5, -1.0;
  Vector h(2);
  h << 0.3, 0.7;
  const double y = h.dot(st.s);
  dlms_step(st, y, h, {st.s, st.s}, 0.1, 1.0);
  CHECK(st.s(0) == 0.5);
  CHECK(st.s(1) == -1.0);
  CHECK(st.v.norm() == 0.0);
}

TEST_CASE("single-node scalar LMS") {
  auto st = AdaptiveNodeState::lms(1);
  const Vector h = Vector::Ones(1);
  double ref = 0.0;
  for (int t = 0; t < 200; ++t) {
    dlms_step(st, 3.0, h, {}, 0.1, 0.0);
    ref = ref + 2.0 * 0.1 * (3.0 - ref);
    CHECK(st.s(0) == doctest::Approx(ref).epsilon(1e-14));
  }
  CHECK(st.s(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(dlms_step(st, 1.0, h, {}, 0.0, 0.0), ParameterError);
}

TEST_CASE("dlms with a tiny step lags a slowly drifting parameter") {
  auto g = connected_random_geometric(20, 0.4, 3);
  auto run = [&](double mu) {
    TrackingScenario sc;
    sc.seed = 5;
    sc.theta_min = 1.0;
    sc.theta_max = 1.0;
    TrackingStream stream(sc);
    AdaptiveOptions o;
    o.algorithm = AdaptiveAlgorithm::dlms;
    o.mu = mu;
    o.penalty = 0.2;
    o.steps = 4000;
    o.noise = LinkNoise::awgn(1e-2, 9);
    o.exchange_multipliers = true;
    return tracking_metrics(adaptive_run(g, stream, o));
  };
  auto fast = run(5e-2);
  auto slow = run(5e-4);
  const double fast_msd = fast.msd.bottomRows(2000).mean();
  const double slow_msd = slow.msd.bottomRows(2000).mean();
  CHECK(std::isfinite(fast_msd));
  CHECK(fast.msd.maxCoeff() < 100.0);
  CHECK(slow_msd > 5.0 * fast_msd);
}

TEST_CASE("multiplier exchange changes nothing on ideal links") {
  auto g = connected_random_geometric(12, 0.5, 4);
  for (auto alg : {AdaptiveAlgorithm::dlms, AdaptiveAlgorithm::drls}) {
    auto run = [&](bool exchange) {
      TrackingScenario sc;
      sc.n = 12;
      sc.seed = 8;
      TrackingStream stream(sc);
      AdaptiveOptions o;
      o.algorithm = alg;
      o.penalty = 0.3;
      o.steps = 300;
      o.exchange_multipliers = exchange;
      return adaptive_run(g, stream, o);
    };
    auto a = run(false);
    auto b = run(true);
    const double scale = std::max(1.0, a.estimates.back().cwiseAbs().maxCoeff());
    CHECK((a.estimates.back() - b.estimates.back()).cwiseAbs().maxCoeff() < 1e-8 * scale);
  }
}

TEST_CASE("under link noise exchanged multipliers keep the deviation stationary") {
  auto g = connected_random_geometric(20, 0.4, 3);
  auto windows = [&](bool exchange) {
    TrackingScenario sc;
    sc.seed = 5;
    TrackingStream stream(sc);
    AdaptiveOptions o;
    o.penalty = 0.2;
    o.steps = 6000;
    o.noise = LinkNoise::awgn(1e-2, 9);
    o.exchange_multipliers = exchange;
    auto m = tracking_metrics(adaptive_run(g, stream, o));
    return std::pair{m.msd.middleRows(1000, 1000).mean(), m.msd.bottomRows(1000).mean()};
  };
  auto [early, late] = windows(true);
  CHECK(late < 1.5 * early);
  // aggregated multipliers integrate the link noise
  auto [early_plain, late_plain] = windows(false);
  CHECK(early_plain > 5.0 * early);
  CHECK(late_plain > 5.0 * late);
}

TEST_CASE("property: rank-one inverse update matches direct inversion") {
  std::mt19937_64 rng(1);
  Matrix Phi = testing_helpers::random_spd(4, 0.5, 3.0, rng);
  Matrix Phi_inv = Phi.inverse();
  for (int t = 0; t < 200; ++t) {
    Vector h = testing_helpers::gaussian_vector(4, rng);
    const double gamma = 0.9 + 0.1 * (t % 2);
    Phi = gamma * Phi + h * h.transpose();
    Phi_inv = rank_one_inverse_update(Phi_inv, h, gamma);
    CHECK((Phi_inv - Phi.inverse()).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, Phi.inverse().cwiseAbs().maxCoeff()));
    CHECK((Phi_inv - Phi_inv.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("drls argument checks") {
  auto st = AdaptiveNodeState::rls(2, 100.0);
  CHECK_THROWS_AS(drls_step(st, 1.0, Vector::Ones(2), {}, 0.0, 0.0), ParameterError);
  CHECK_THROWS_AS(drls_step(st, 1.0, Vector::Ones(2), {}, 1.5, 0.0), ParameterError);
  auto lms = AdaptiveNodeState::lms(2);
  CHECK_THROWS_AS(drls_step(lms, 1.0, Vector::Ones(2), {}, 1.0, 0.0), ParameterError);
}

TEST_CASE("AR stream with a trivial channel recovers the coefficients by least squares") {
  ArScenario sc;
  sc.alpha = Vector(2);
  sc.alpha << -0.5, 0.3;
  sc.channels = {Vector::Ones(1)};
  sc.sensing_variance = 0.0;
  sc.seed = 4;
  ArStream stream(sc);
  Matrix G = Matrix::Zero(2, 2);
  Vector r = Vector::Zero(2);
  for (int t = 0; t < 2000000; ++t) {
    auto s = stream.next();
    G += s.H.col(0) * s.H.col(0).transpose();
    r += s.H.col(0) * s.y(0);
  }
  Vector fit = G.ldlt().solve(r);
  CHECK((fit - sc.alpha).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("unstable AR models are rejected") {
  Vector a(1);
  a << -1.2;
  CHECK_THROWS_AS(check_ar_stable(a), ParameterError);
  ArScenario sc;
  sc.alpha = a;
  sc.channels = {Vector::Ones(1)};
  CHECK_THROWS_AS(ArStream{sc}, ParameterError);
  Vector ok(2);
  ok << 0.0, 0.81;
  CHECK_NOTHROW(check_ar_stable(ok));
}

TEST_CASE("AR power spectrum peaks at pi/2 for the sensing source") {
  Vector a(2);
  a << 0.0, 0.81;
  CHECK(std::abs(ar_psd_peak(a) - std::numbers::pi / 2) <= 1e-3);
  CHECK(ar_psd(a, std::numbers::pi / 2) == doctest::Approx(1.0 / (0.19 * 0.19)));
}

TEST_CASE("cooperation recovers the spectral peak a nulled sensor misses") {
  const std::size_t n = 20;
  auto g = connected_random_geometric(n, 0.4, 3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    AdaptiveOptions o;
    o.mu = 0.005;
    o.penalty = 0.1;
    o.steps = 10000;
    ArStream coop_stream(spectrum_scenario(n, {0, 1}, seed));
    auto coop = adaptive_run(g, coop_stream, o);
    o.algorithm = AdaptiveAlgorithm::llms;
    ArStream local_stream(spectrum_scenario(n, {0, 1}, seed));
    auto local = adaptive_run(g, local_stream, o);
    const double half_pi = std::numbers::pi / 2;
    CHECK(std::abs(ar_psd_peak(averaged_estimate(coop, 5000)) - half_pi) <= 0.05);
    CHECK(std::abs(ar_psd_peak(averaged_estimate(local, 5000, 0)) - half_pi) > 0.2);
  }
}

TEST_CASE("tracking metrics examples") {
  SUBCASE("perfect tracking gives zero error") {
    AdaptiveTrace tr;
    tr.n = 2;
    tr.p = 1;
    for (int t = 0; t <= 5; ++t) {
      tr.truth.push_back(Vector::Constant(1, t * 0.1));
      tr.estimates.push_back(Matrix::Constant(1, 2, t * 0.1));
    }
    for (int t = 0; t < 5; ++t) {
      tr.regressors.push_back(Matrix::Ones(1, 2));
      tr.observations.push_back(Vector::Zero(2));
      tr.global_mse.push_back(0.0);
    }
    auto m = tracking_metrics(tr);
    CHECK(m.emse.cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.msd.cwiseAbs().maxCoeff() == 0.0);
    tr.global_mse.pop_back();
    CHECK_THROWS_AS(tracking_metrics(tr), DataError);
  }

  SUBCASE("a frozen estimate against a random walk drifts linearly") {
    const double q = 1e-2;
    std::vector<TrackingMetrics> runs;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      StaticStream stream(1, Vector::Zero(3), 0.0, seed, q);
      AdaptiveTrace tr;
      tr.n = 1;
      tr.p = 3;
      tr.estimates.push_back(Matrix::Zero(3, 1));
      tr.truth.push_back(stream.truth());
      for (int t = 0; t < 400; ++t) {
        auto s = stream.next();
        tr.estimates.push_back(Matrix::Zero(3, 1));
        tr.truth.push_back(stream.truth());
        tr.regressors.push_back(s.H);
        tr.observations.push_back(s.y);
        tr.global_mse.push_back(s.y.squaredNorm());
      }
      runs.push_back(tracking_metrics(tr));
    }
    auto avg = average_metrics(runs);
    for (int t : {99, 199, 399}) {
      const double expect = (t + 1) * 3 * q;
      CHECK(avg.msd(t, 0) == doctest::Approx(expect).epsilon(0.2));
    }
  }

  SUBCASE("noise-free static data drives the error to zero") {
    StaticStream stream(4, Vector::Constant(3, 0.7), 0.0, 1);
    AdaptiveOptions o;
    o.mu = 0.05;
    o.penalty = 0.5;
    o.steps = 3000;
    auto m = tracking_metrics(adaptive_run(ring_graph(4), stream, o));
    CHECK(m.global_mse.tail(100).maxCoeff() <= 1e-12);
  }
}

TEST_CASE("property: dlms is unbiased for a static parameter") {
  Vector s0(4);
  s0 << 1.0, -0.5, 0.25, 2.0;
  auto g = connected_random_geometric(6, 0.6, 1);
  const int runs = 100;
  Matrix finals(4, runs);
  for (int r = 0; r < runs; ++r) {
    StaticStream stream(6, s0, 0.3, 1000 + static_cast<std::uint64_t>(r));
    AdaptiveOptions o;
    o.mu = 0.01;
    o.penalty = 0.5;
    o.steps = 1500;
    auto tr = adaptive_run(g, stream, o);
    finals.col(r) = tr.estimates.back().rowwise().mean();
  }
  const Vector mean = finals.rowwise().mean();
  for (Eigen::Index k = 0; k < 4; ++k) {
    const double var = (finals.row(k).array() - mean(k)).square().sum() / (runs - 1);
    const double se = std::sqrt(var / runs);
    CHECK(std::abs(mean(k) - s0(k)) <= 2.0 * se + 1e-12);
  }
}

TEST_CASE("property: single-node drls with gamma = 1 is batch ridge least squares") {
  std::mt19937_64 rng(12);
  const double delta = 100.0;
  auto st = AdaptiveNodeState::rls(3, delta);
  Matrix G = Matrix::Identity(3, 3) / delta;
  Vector r = Vector::Zero(3);
  for (int t = 0; t < 300; ++t) {
    Vector h = testing_helpers::gaussian_vector(3, rng);
    const double y = std::normal_distribution<double>(0, 2)(rng);
    drls_step(st, y, h, {}, 1.0, 0.0);
    G += h * h.transpose();
    r += h * y;
    Vector batch = G.ldlt().solve(r);
    CHECK((st.s - batch).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, batch.cwiseAbs().maxCoeff()));
    CHECK((st.Phi_inv - G.inverse()).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, G.inverse().cwiseAbs().maxCoeff()));
    CHECK((st.Phi_inv - st.Phi_inv.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("property: drls beats dlms in steady state on the AR scenario") {
  const std::size_t n = 10;
  auto g = connected_random_geometric(n, 0.5, 2);
  auto run = [&](AdaptiveAlgorithm alg) {
    std::vector<TrackingMetrics> all;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ArStream stream(spectrum_scenario(n, {0, 1}, seed));
      AdaptiveOptions o;
      o.algorithm = alg;
      o.mu = 0.005;
      o.penalty = alg == AdaptiveAlgorithm::drls ? 1e-3 : 0.05;
      o.steps = 4000;
      all.push_back(tracking_metrics(adaptive_run(g, stream, o)));
    }
    return average_metrics(all).global_mse.tail(1000).mean();
  };
  CHECK(run(AdaptiveAlgorithm::drls) <= run(AdaptiveAlgorithm::dlms));
}
