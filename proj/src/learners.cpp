#include "dlearn/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dlearn/costs.hpp"
#include "dlearn/errors.hpp"

namespace dlearn {

Vector SvmModel::packed() const {
  Vector out(s.size() + 1);
  out << s, b;
  return out;
}

SvmModel SvmModel::unpack(const Vector& sbar) {
  if (sbar.size() < 1) throw ParameterError("packed SVM model is empty");
  return {sbar.head(sbar.size() - 1), sbar(sbar.size() - 1)};
}

namespace {

void check_svm_data(const SvmLocalData& d) {
  if (d.X.cols() != d.y.size()) throw DataError("SVM examples and labels differ in count");
  if (d.X.cols() == 0) throw DataError("every node needs at least one SVM example");
  if (d.C < 0.0) throw ParameterError("SVM weight C must be >= 0");
  for (Eigen::Index l = 0; l < d.y.size(); ++l) {
    if (d.y(l) != 1.0 && d.y(l) != -1.0) throw DataError("SVM labels must be -1 or +1");
  }
}

}  // namespace

double hinge_loss(const SvmLocalData& data, const Vector& sbar) {
  const auto p = data.X.rows();
  Vector margins = (data.X.transpose() * sbar.head(p)).array() + sbar(p);
  double total = 0.0;
  for (Eigen::Index l = 0; l < margins.size(); ++l) total += std::max(0.0, 1.0 - data.y(l) * margins(l));
  return data.C * total;
}

double svm_objective(const std::vector<SvmLocalData>& data, const Vector& sbar) {
  const auto p = sbar.size() - 1;
  double total = 0.5 * sbar.head(p).squaredNorm();
  for (const auto& d : data) total += hinge_loss(d, sbar);
  return total;
}

Vector dsvm_local_solve(const SvmLocalData& data, std::size_t node_count,
                        const LocalSubproblem& sub, std::vector<double>& alpha,
                        const SvmLocalSolveOptions& options) {
  if (!(sub.penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  if (sub.degree == 0) throw ParameterError("dual local solve needs at least one neighbor");
  const auto p = data.X.rows();
  const auto m = data.X.cols();
  const double shift = 2.0 * sub.penalty * static_cast<double>(sub.degree);

  Vector pinv(p + 1);
  pinv.head(p).setConstant(1.0 / (1.0 / static_cast<double>(node_count) + shift));
  pinv(p) = 1.0 / shift;
  const Vector q = sub.multiplier - 2.0 * sub.penalty * sub.anchor_sum;

  if (alpha.size() != static_cast<std::size_t>(m)) alpha.assign(static_cast<std::size_t>(m), 0.0);
  for (auto& a : alpha) a = std::clamp(a, 0.0, data.C);

  // sbar = P^{-1} (sum_l alpha_l y_l a_l - q), a_l = [x_l; 1]
  Vector z = -q;
  for (Eigen::Index l = 0; l < m; ++l) {
    const double w = alpha[static_cast<std::size_t>(l)] * data.y(l);
    if (w != 0.0) {
      z.head(p) += w * data.X.col(l);
      z(p) += w;
    }
  }
  Vector sbar = pinv.cwiseProduct(z);

  Vector diag(m);
  for (Eigen::Index l = 0; l < m; ++l) {
    diag(l) = data.X.col(l).cwiseAbs2().dot(pinv.head(p)) + pinv(p);
  }

  for (std::size_t pass = 0; pass < options.max_passes; ++pass) {
    double worst = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) {
      double& a = alpha[static_cast<std::size_t>(l)];
      const double yl = data.y(l);
      const double g = yl * (data.X.col(l).dot(sbar.head(p)) + sbar(p)) - 1.0;
      double pg = g;
      if (a <= 0.0) pg = std::min(pg, 0.0);
      if (a >= data.C) pg = std::max(pg, 0.0);
      worst = std::max(worst, std::abs(pg));
      if (pg == 0.0) continue;
      const double next = std::clamp(a - g / diag(l), 0.0, data.C);
      const double delta = (next - a) * yl;
      if (delta != 0.0) {
        sbar.head(p) += delta * pinv.head(p).cwiseProduct(data.X.col(l));
        sbar(p) += delta * pinv(p);
      }
      a = next;
    }
    if (worst <= options.tolerance) return sbar;
  }
  throw ConvergenceError("SVM local dual coordinate descent stalled", 0.0);
}

namespace {

struct SmoProblem {
  Matrix X;       // p x N
  Vector y;
  Vector C;       // per example
};

SvmModel smo_solve(const SmoProblem& prob, double tolerance, std::size_t max_iterations) {
  const auto N = prob.X.cols();
  const Matrix K = prob.X.transpose() * prob.X;
  const Vector& y = prob.y;
  const double tau = 1e-12;

  Vector alpha = Vector::Zero(N);
  Vector G = Vector::Constant(N, -1.0);
  auto upper = [&](Eigen::Index t) { return alpha(t) >= prob.C(t); };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < N; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -G(t) >= gmax) { gmax = -G(t); i = t; }
      } else {
        if (!lower(t) && G(t) >= gmax) { gmax = G(t); i = t; }
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < N && i >= 0; ++t) {
      double grad_diff = 0.0;
      double quad = 0.0;
      if (y(t) > 0) {
        if (lower(t)) continue;
        grad_diff = gmax + G(t);
        gmax2 = std::max(gmax2, G(t));
        quad = K(i, i) + K(t, t) - 2.0 * y(i) * K(i, t);
      } else {
        if (upper(t)) continue;
        grad_diff = gmax - G(t);
        gmax2 = std::max(gmax2, -G(t));
        quad = K(i, i) + K(t, t) + 2.0 * y(i) * K(i, t);
      }
      if (grad_diff > 0.0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : tau);
        if (obj <= best) { best = obj; j = t; }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tolerance) break;

    const double Qij = y(i) * y(j) * K(i, j);
    const double Ci = prob.C(i), Cj = prob.C(j);
    const double old_i = alpha(i), old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = K(i, i) + K(j, j) + 2.0 * Qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = -diff; }
      if (diff > Ci - Cj) {
        if (alpha(i) > Ci) { alpha(i) = Ci; alpha(j) = Ci - diff; }
      } else if (alpha(j) > Cj) { alpha(j) = Cj; alpha(i) = Cj + diff; }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * Qij;
      if (quad <= 0.0) quad = tau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > Ci) {
        if (alpha(i) > Ci) { alpha(i) = Ci; alpha(j) = sum - Ci; }
      } else if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = sum; }
      if (sum > Cj) {
        if (alpha(j) > Cj) { alpha(j) = Cj; alpha(i) = sum - Cj; }
      } else if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = sum; }
    }
    const double di = (alpha(i) - old_i) * y(i);
    const double dj = (alpha(j) - old_j) * y(j);
    G += (y.array() * (di * K.col(i) + dj * K.col(j)).array()).matrix();
  }
  if (it == max_iterations) throw ConvergenceError("SMO did not converge", 0.0);

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (Eigen::Index t = 0; t < N; ++t) {
    const double yG = y(t) * G(t);
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else {
      ++free_count;
      free_sum += yG;
    }
  }
  double rho = 0.0;
  if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
  else if (std::isfinite(ub)) rho = ub;
  else if (std::isfinite(lb)) rho = lb;

  SvmModel model;
  model.s = prob.X * (alpha.array() * y.array()).matrix();
  model.b = -rho;
  return model;
}

}  // namespace

SvmCost::SvmCost(SvmLocalData data, std::size_t node_count) : data_(std::move(data)), n_(node_count) {
  check_svm_data(data_);
  if (node_count == 0) throw ParameterError("node count must be positive");
}

double SvmCost::evaluate(const Vector& sbar) const {
  const auto p = data_.X.rows();
  return 0.5 * sbar.head(p).squaredNorm() / static_cast<double>(n_) + hinge_loss(data_, sbar);
}

Vector SvmCost::solve_local(const LocalSubproblem& sub) {
  if (sub.degree > 0) return dsvm_local_solve(data_, n_, sub, alpha_);
  if (sub.multiplier.norm() != 0.0) {
    throw ParameterError("isolated SVM node cannot carry a nonzero multiplier");
  }
  // (1/2n)||s||^2 + C sum hinge  ==  (1/n) [0.5||s||^2 + nC sum hinge]
  SmoProblem prob{data_.X, data_.y, Vector::Constant(data_.y.size(), data_.C * static_cast<double>(n_))};
  return smo_solve(prob, 1e-10, 1000000).packed();
}

SvmModel svm_centralized(const std::vector<SvmLocalData>& data, double tolerance,
                         std::size_t max_iterations) {
  if (data.empty()) throw ParameterError("no SVM data");
  Eigen::Index total = 0;
  for (const auto& d : data) {
    check_svm_data(d);
    if (d.X.rows() != data.front().X.rows()) throw DataError("SVM feature dimensions differ");
    total += d.X.cols();
  }
  SmoProblem prob{Matrix(data.front().X.rows(), total), Vector(total), Vector(total)};
  Eigen::Index off = 0;
  for (const auto& d : data) {
    prob.X.middleCols(off, d.X.cols()) = d.X;
    prob.y.segment(off, d.y.size()) = d.y;
    prob.C.segment(off, d.y.size()).setConstant(d.C);
    off += d.X.cols();
  }
  return smo_solve(prob, tolerance, max_iterations);
}

DsvmResult dsvm_run(const NetworkGraph& graph, const std::vector<SvmLocalData>& data,
                    double penalty, std::size_t iterations, const std::optional<Vector>& reference) {
  if (data.size() != graph.node_count()) throw ParameterError("need one SVM data block per node");
  std::vector<SvmCost> owned;
  owned.reserve(data.size());
  for (const auto& d : data) owned.emplace_back(d, data.size());
  std::vector<LocalCost*> costs;
  for (auto& c : owned) costs.push_back(&c);

  RunOptions opt;
  opt.penalty = penalty;
  opt.iterations = iterations;
  opt.reference = reference ? *reference : svm_centralized(data).packed();
  opt.graph_id = "svm";

  DsvmResult out;
  out.trace = admm_run(graph, costs, opt);
  for (Eigen::Index i = 0; i < out.trace.final_estimates.cols(); ++i) {
    out.models.push_back(SvmModel::unpack(out.trace.final_estimates.col(i)));
  }
  return out;
}

// ---- K-means ----

std::size_t nearest_centroid(const Matrix& centroids, const Vector& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.cols(); ++k) {
    const double d = (centroids.col(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(k);
    }
  }
  return best;
}

std::vector<std::size_t> assign_clusters(const Matrix& centroids, const Matrix& observations) {
  std::vector<std::size_t> out(static_cast<std::size_t>(observations.cols()));
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = nearest_centroid(centroids, observations.col(j));
  }
  return out;
}

ClusterStatistics cluster_statistics(const Matrix& observations,
                                     const std::vector<std::size_t>& assignment, std::size_t K) {
  ClusterStatistics st{Matrix::Zero(observations.rows(), static_cast<Eigen::Index>(K)),
                       Vector::Zero(static_cast<Eigen::Index>(K))};
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    const auto k = static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(j)]);
    st.sums.col(k) += observations.col(j);
    st.counts(k) += 1.0;
  }
  return st;
}

double sum_squared_error(const Matrix& centroids, const Matrix& observations,
                         const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    total += (observations.col(j) -
              centroids.col(static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(j)])))
                 .squaredNorm();
  }
  return total;
}

Matrix kmeans_initial_centroids(const Matrix& pooled, std::size_t K, std::uint64_t seed) {
  if (K == 0) throw ParameterError("K must be >= 1");
  if (static_cast<std::size_t>(pooled.cols()) < K) throw DataError("fewer observations than clusters");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Matrix out(pooled.rows(), static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) out.col(static_cast<Eigen::Index>(k)) = pooled.col(idx[k]);
  return out;
}

Matrix pool_observations(const std::vector<Matrix>& data) {
  if (data.empty()) throw ParameterError("no observations");
  Eigen::Index total = 0;
  for (const auto& d : data) {
    if (d.rows() != data.front().rows()) throw DataError("observation dimensions differ");
    total += d.cols();
  }
  Matrix out(data.front().rows(), total);
  Eigen::Index off = 0;
  for (const auto& d : data) {
    out.middleCols(off, d.cols()) = d;
    off += d.cols();
  }
  return out;
}

namespace {

struct FarCandidate {
  double distance;
  Eigen::Index index;
};

/// Observations ordered by decreasing distance to their centroid (lowest index first on ties).
std::vector<FarCandidate> farthest_first(const Matrix& centroids, const Matrix& observations,
                                         const std::vector<std::size_t>& assignment) {
  std::vector<FarCandidate> out;
  for (Eigen::Index j = 0; j < observations.cols(); ++j) {
    out.push_back({(observations.col(j) -
                    centroids.col(static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(j)])))
                       .squaredNorm(),
                   j});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FarCandidate& a, const FarCandidate& b) { return a.distance > b.distance; });
  return out;
}

}  // namespace

LloydResult lloyd_kmeans(const Matrix& pooled, Matrix initial_centroids, std::size_t max_iterations) {
  const auto K = static_cast<std::size_t>(initial_centroids.cols());
  if (K == 0) throw ParameterError("K must be >= 1");
  LloydResult out;
  out.centroids = std::move(initial_centroids);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    auto assignment = assign_clusters(out.centroids, pooled);
    const bool unchanged = it > 0 && assignment == out.assignment;
    out.assignment = std::move(assignment);
    if (unchanged) break;

    ClusterStatistics st = cluster_statistics(pooled, out.assignment, K);
    std::vector<std::size_t> empty;
    for (std::size_t k = 0; k < K; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (st.counts(kk) > 0.0) out.centroids.col(kk) = st.sums.col(kk) / st.counts(kk);
      else empty.push_back(k);
    }
    if (!empty.empty()) {
      auto far = farthest_first(out.centroids, pooled, out.assignment);
      for (std::size_t e = 0; e < empty.size() && e < far.size(); ++e) {
        out.centroids.col(static_cast<Eigen::Index>(empty[e])) = pooled.col(far[e].index);
      }
    }
    out.sse.push_back(sum_squared_error(out.centroids, pooled, out.assignment));
    out.iterations = it + 1;
  }
  return out;
}

DkmeansResult dkmeans_run(const NetworkGraph& graph, const std::vector<Matrix>& data,
                          const DkmeansOptions& options) {
  return dkmeans_run(graph, data, options,
                     kmeans_initial_centroids(pool_observations(data), options.K, options.seed));
}

DkmeansResult dkmeans_run(const NetworkGraph& graph, const std::vector<Matrix>& data,
                          const DkmeansOptions& options, const Matrix& initial_centroids) {
  const std::size_t n = graph.node_count();
  if (data.size() != n) throw ParameterError("need one observation block per node");
  if (options.K == 0) throw ParameterError("K must be >= 1");
  if (!(options.penalty > 0.0)) throw ParameterError("ADMM penalty eta must be > 0");
  if (!graph.connected()) throw GraphError("K-means requires a connected graph");
  const Matrix pooled = pool_observations(data);
  if (static_cast<std::size_t>(pooled.cols()) < options.K) throw DataError("fewer observations than clusters");
  if (initial_centroids.cols() != static_cast<Eigen::Index>(options.K) ||
      initial_centroids.rows() != pooled.rows()) {
    throw ParameterError("initial centroids must be p x K");
  }

  const auto p = pooled.rows();
  const auto K = static_cast<Eigen::Index>(options.K);
  const Eigen::Index dim = K * (p + 1);

  std::vector<QuadraticCost> owned;
  owned.reserve(n);
  for (std::size_t i = 0; i < n; ++i) owned.push_back(make_average_cost(Vector::Zero(dim)));
  std::vector<LocalCost*> costs;
  for (auto& c : owned) costs.push_back(&c);
  AdmmSettings settings;
  settings.penalty = options.penalty;
  ConsensusAdmm engine(graph, costs, settings);

  DkmeansResult out;
  out.initial_centroids = initial_centroids;
  out.centroids.assign(n, initial_centroids);
  out.assignments.assign(n, {});

  for (std::size_t macro = 0; macro < options.macro_iterations; ++macro) {
    DkmeansMacroRecord rec;
    rec.iteration = macro + 1;
    for (std::size_t i = 0; i < n; ++i) {
      auto next = assign_clusters(out.centroids[i], data[i]);
      if (macro > 0) {
        for (std::size_t j = 0; j < next.size(); ++j) rec.reassigned += next[j] != out.assignments[i][j];
      }
      out.assignments[i] = std::move(next);
      ClusterStatistics st = cluster_statistics(data[i], out.assignments[i], options.K);
      Vector y(dim);
      y << Eigen::Map<const Vector>(st.sums.data(), p * K), st.counts;
      owned[i].set_linear(y, 0.5 * y.squaredNorm());
    }

    for (std::size_t k = 0; k < options.inner_iterations; ++k) engine.step();
    const Matrix& est = engine.estimates();
    rec.consensus_error = consensus_error(graph, est);

    std::vector<std::size_t> empty;
    for (std::size_t i = 0; i < n; ++i) {
      const Vector s = est.col(static_cast<Eigen::Index>(i));
      for (Eigen::Index k = 0; k < K; ++k) {
        const double count = s(p * K + k);
        // averaged count below half an observation means no member network-wide
        if (count * static_cast<double>(n) >= 0.5) {
          out.centroids[i].col(k) = s.segment(k * p, p) / count;
        } else if (i == 0) {
          empty.push_back(static_cast<std::size_t>(k));
        }
      }
    }
    if (!empty.empty()) {
      // network-wide max search, as a max-consensus flood would return
      std::vector<FarCandidate> all;
      Eigen::Index off = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (auto c : farthest_first(out.centroids[i], data[i], out.assignments[i])) {
          all.push_back({c.distance, c.index + off});
        }
        off += data[i].cols();
      }
      std::stable_sort(all.begin(), all.end(),
                       [](const FarCandidate& a, const FarCandidate& b) { return a.distance > b.distance; });
      for (std::size_t e = 0; e < empty.size() && e < all.size(); ++e) {
        for (std::size_t i = 0; i < n; ++i) {
          out.centroids[i].col(static_cast<Eigen::Index>(empty[e])) = pooled.col(all[e].index);
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) rec.sse += sum_squared_error(out.centroids[i], data[i], out.assignments[i]);
    out.history.push_back(rec);
  }
  return out;
}

}  // namespace dlearn
