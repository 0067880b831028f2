#include "dlearn/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dlearn/errors.hpp"
#include "dlearn/prox.hpp"

namespace dlearn {

NetworkGraph router_graph(const TrafficInstance& instance) {
  return NetworkGraph(instance.routers, instance.router_edges);
}

namespace {

std::string format_number(double value) {
  std::ostringstream os;
  os << value;
  return os.str();
}

std::vector<std::size_t> bfs_path(const NetworkGraph& g, std::size_t from, std::size_t to) {
  std::vector<std::size_t> parent(g.node_count(), g.node_count());
  std::queue<std::size_t> q;
  q.push(from);
  parent[from] = from;
  while (!q.empty()) {
    std::size_t u = q.front();
    q.pop();
    if (u == to) break;
    for (std::size_t v : g.neighbors(u)) {
      if (parent[v] == g.node_count()) {
        parent[v] = u;
        q.push(v);
      }
    }
  }
  std::vector<std::size_t> path{to};
  while (path.back() != from) path.push_back(parent[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

}  // namespace

TrafficInstance synth_traffic(const SynthOptions& o) {
  const std::size_t n = o.routers;
  if (n < 3) throw ParameterError("need at least 3 routers");
  if (o.router_edges < n || o.router_edges > n * (n - 1) / 2) {
    throw ParameterError("router edge count must lie in [n, n(n-1)/2]");
  }
  if (o.horizon == 0 || o.rank == 0) throw ParameterError("T and rank must be >= 1");
  if (o.anomaly_density < 0.0 || o.anomaly_density > 1.0 || o.missing_fraction < 0.0 ||
      o.missing_fraction >= 1.0 || o.noise_sigma < 0.0) {
    throw ParameterError("densities must lie in [0, 1) and sigma >= 0");
  }
  std::mt19937_64 rng(o.seed);

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i) edges.insert(std::minmax(i, (i + 1) % n));
  std::uniform_int_distribution<std::size_t> node(0, n - 1);
  while (edges.size() < o.router_edges) {
    std::size_t a = node(rng), b = node(rng);
    if (a != b) edges.insert(std::minmax(a, b));
  }
  TrafficInstance inst;
  inst.routers = n;
  inst.router_edges.assign(edges.begin(), edges.end());
  const NetworkGraph g(n, inst.router_edges);
  const std::size_t L = g.directed_edge_count();
  for (const auto& e : g.directed_edges()) inst.link_owner.push_back(e.source);

  std::vector<std::pair<std::size_t, std::size_t>> flows;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b || o.self_flows) flows.emplace_back(a, b);
  const std::size_t F = flows.size();
  if (F <= L) throw ParameterError("routing matrix must be wide (F > L)");
  if (o.rank > std::min(F, o.horizon)) throw ParameterError("rank exceeds min(F, T)");

  inst.R = Matrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(F));
  for (std::size_t f = 0; f < F; ++f) {
    if (flows[f].first == flows[f].second) continue;
    auto path = bfs_path(g, flows[f].first, flows[f].second);
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      inst.R(static_cast<Eigen::Index>(g.directed_index(path[k], path[k + 1])), static_cast<Eigen::Index>(f)) = 1.0;
    }
  }

  const auto T = static_cast<Eigen::Index>(o.horizon);
  const auto r = static_cast<Eigen::Index>(o.rank);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix U(static_cast<Eigen::Index>(F), r);
  for (Eigen::Index a = 0; a < U.rows(); ++a)
    for (Eigen::Index b = 0; b < r; ++b) U(a, b) = 0.5 + unit(rng);
  Matrix V(r, T);
  for (Eigen::Index k = 0; k < r; ++k) {
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (Eigen::Index t = 0; t < T; ++t) {
      V(k, t) = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>((k + 1) * t) /
                                         static_cast<double>(T) + phase);
    }
  }
  const Matrix Z = U * V;

  inst.A_true = Matrix::Zero(static_cast<Eigen::Index>(F), T);
  std::bernoulli_distribution hit(o.anomaly_density);
  std::bernoulli_distribution sign(0.5);
  for (Eigen::Index f = 0; f < inst.A_true.rows(); ++f)
    for (Eigen::Index t = 0; t < T; ++t)
      if (hit(rng)) inst.A_true(f, t) = sign(rng) ? o.anomaly_amplitude : -o.anomaly_amplitude;

  inst.X_true = inst.R * Z;
  inst.Y = inst.X_true + inst.R * inst.A_true;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (o.noise_sigma > 0.0) {
    for (Eigen::Index l = 0; l < inst.Y.rows(); ++l)
      for (Eigen::Index t = 0; t < T; ++t) inst.Y(l, t) += o.noise_sigma * gauss(rng);
  }
  inst.mask = Matrix::Ones(inst.Y.rows(), T);
  std::bernoulli_distribution miss(o.missing_fraction);
  if (o.missing_fraction > 0.0) {
    for (Eigen::Index l = 0; l < inst.Y.rows(); ++l)
      for (Eigen::Index t = 0; t < T; ++t)
        if (miss(rng)) inst.mask(l, t) = 0.0;
  }
  inst.Y = inst.Y.cwiseProduct(inst.mask);
  return inst;
}

double convex_objective(const TrafficInstance& inst, const Matrix& X, const Matrix& A,
                        double lambda_nuc, double lambda_1) {
  const Matrix res = (inst.Y - X - inst.R * A).cwiseProduct(inst.mask);
  return res.squaredNorm() + lambda_nuc * nuclear_norm(X) + lambda_1 * A.cwiseAbs().sum();
}

double factorized_objective(const TrafficInstance& inst, const Matrix& P, const Matrix& Q,
                            const Matrix& A, double lambda_nuc, double lambda_1) {
  const Matrix res = (inst.Y - P * Q.transpose() - inst.R * A).cwiseProduct(inst.mask);
  return res.squaredNorm() + 0.5 * lambda_nuc * (P.squaredNorm() + Q.squaredNorm()) +
         lambda_1 * A.cwiseAbs().sum();
}

AnomalySolution solve_centralized(const TrafficInstance& inst, double lambda_nuc, double lambda_1,
                                  const CentralizedOptions& options) {
  if (lambda_nuc < 0.0 || lambda_1 < 0.0) throw ParameterError("lambdas must be >= 0");
  const Matrix& R = inst.R;
  const Matrix& M = inst.mask;
  const double Lg = 2.0 * (1.0 + std::pow(spectral_norm(R), 2));
  const double step = 1.0 / Lg;
  const double scale = std::max(1.0, inst.Y.cwiseProduct(M).norm());

  auto objective = [&](const Matrix& X, const Matrix& A) {
    return convex_objective(inst, X, A, lambda_nuc, lambda_1);
  };

  Matrix X = Matrix::Zero(inst.Y.rows(), inst.Y.cols());
  Matrix A = Matrix::Zero(R.cols(), inst.Y.cols());
  Matrix yX = X, yA = A;
  double t = 1.0;
  double fx = objective(X, A);
  bool at_x = true;  // y coincides with the last accepted point

  AnomalySolution out;
  out.objective_history.push_back(fx);
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    const Matrix res = (inst.Y - yX - R * yA).cwiseProduct(M);
    const Matrix zX = singular_value_threshold(yX + (2.0 * step) * res, step * lambda_nuc);
    const Matrix zA = soft_threshold(Matrix(yA + (2.0 * step) * (R.transpose() * res)), step * lambda_1);
    const double fz = objective(zX, zA);
    const double mapping = Lg * std::sqrt((zX - yX).squaredNorm() + (zA - yA).squaredNorm());
    const bool small = mapping <= options.tolerance * scale;
    out.iterations = it;

    if (fz <= fx) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      yX = zX + ((t - 1.0) / t_next) * (zX - X);
      yA = zA + ((t - 1.0) / t_next) * (zA - A);
      X = zX;
      A = zA;
      fx = fz;
      t = t_next;
      at_x = false;
      out.objective_history.push_back(fx);
      if (small) break;
    } else {
      out.objective_history.push_back(fx);
      // a plain proximal step from the accepted point must decrease f, so a
      // rejection there means the decrease is below rounding
      if (at_x) break;
      yX = X;
      yA = A;
      t = 1.0;
      at_x = true;
    }
    if (it == options.max_iterations) {
      throw ConvergenceError("centralized anomaly solver hit its iteration cap", mapping);
    }
  }
  out.X = X;
  out.A = A;
  out.objective = fx;
  return out;
}

double convex_optimality_gap(const TrafficInstance& inst, const Matrix& X, const Matrix& A,
                             double lambda_nuc, double lambda_1) {
  const Matrix G = 2.0 * (inst.Y - X - inst.R * A).cwiseProduct(inst.mask);
  double worst = 0.0;

  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Eigen::Index r = 0;
  const double tol = 1e-9 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  while (r < sv.size() && sv(r) > tol) ++r;
  if (r == 0) {
    worst = std::max(worst, spectral_norm(G) - lambda_nuc);
  } else {
    const Matrix U = svd.matrixU().leftCols(r);
    const Matrix V = svd.matrixV().leftCols(r);
    const Matrix core = U.transpose() * G * V - lambda_nuc * Matrix::Identity(r, r);
    worst = std::max(worst, core.cwiseAbs().maxCoeff());
    const Matrix PU = Matrix::Identity(U.rows(), U.rows()) - U * U.transpose();
    const Matrix PV = Matrix::Identity(V.rows(), V.rows()) - V * V.transpose();
    worst = std::max(worst, (U.transpose() * G * PV).cwiseAbs().maxCoeff());
    worst = std::max(worst, (PU * G * V).cwiseAbs().maxCoeff());
    worst = std::max(worst, spectral_norm(PU * G * PV) - lambda_nuc);
  }
  const Matrix H = inst.R.transpose() * G;
  for (Eigen::Index f = 0; f < H.rows(); ++f) {
    for (Eigen::Index t = 0; t < H.cols(); ++t) {
      const double a = A(f, t);
      if (a != 0.0) worst = std::max(worst, std::abs(H(f, t) - lambda_1 * (a > 0 ? 1.0 : -1.0)));
      else worst = std::max(worst, std::abs(H(f, t)) - lambda_1);
    }
  }
  return std::max(worst, 0.0) / std::max({lambda_nuc, lambda_1, 1e-300});
}

namespace {

struct RouterBlock {
  std::vector<Eigen::Index> rows;
  Matrix Y, M, R;
  double lipschitz_r = 0.0;  // sigma_max(R_i)^2
};

}  // namespace

DecentralizedResult solve_factorized_decentralized(const TrafficInstance& inst, double lambda_nuc,
                                                   double lambda_1, const DecentralizedOptions& o) {
  if (lambda_nuc < 0.0 || lambda_1 < 0.0) throw ParameterError("lambdas must be >= 0");
  if (!(o.penalty > 0.0)) throw ParameterError("ADMM penalty c must be > 0");
  if (o.rank == 0) throw ParameterError("rank bound rho must be >= 1");
  const NetworkGraph g = router_graph(inst);
  if (!g.connected()) throw GraphError("router graph is disconnected");
  const std::size_t n = g.node_count();
  const auto T = inst.Y.cols();
  const auto F = inst.R.cols();
  const auto rho = static_cast<Eigen::Index>(o.rank);
  const double c = o.penalty;
  const double dn = static_cast<double>(n);

  std::vector<RouterBlock> blocks(n);
  for (std::size_t l = 0; l < inst.link_owner.size(); ++l) {
    blocks[inst.link_owner[l]].rows.push_back(static_cast<Eigen::Index>(l));
  }
  for (auto& b : blocks) {
    const auto m = static_cast<Eigen::Index>(b.rows.size());
    b.Y.resize(m, T);
    b.M.resize(m, T);
    b.R.resize(m, F);
    for (Eigen::Index k = 0; k < m; ++k) {
      b.Y.row(k) = inst.Y.row(b.rows[static_cast<std::size_t>(k)]);
      b.M.row(k) = inst.mask.row(b.rows[static_cast<std::size_t>(k)]);
      b.R.row(k) = inst.R.row(b.rows[static_cast<std::size_t>(k)]);
    }
    b.lipschitz_r = m > 0 ? std::pow(spectral_norm(b.R), 2) : 0.0;
  }

  DecentralizedResult out;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix Q0(T, rho);
  for (Eigen::Index a = 0; a < T; ++a)
    for (Eigen::Index b = 0; b < rho; ++b) Q0(a, b) = gauss(rng);

  out.P.resize(n);
  out.Q.assign(n, Q0);
  out.A.assign(n, Matrix::Zero(F, T));
  std::vector<Matrix> VQ(n, Matrix::Zero(T, rho));
  std::vector<Matrix> VA(n, Matrix::Zero(F, T));
  for (std::size_t i = 0; i < n; ++i) out.P[i] = Matrix::Zero(static_cast<Eigen::Index>(blocks[i].rows.size()), rho);

  auto local_objective = [&](std::size_t i) {
    const auto& b = blocks[i];
    const Matrix res = (b.Y - out.P[i] * out.Q[i].transpose() - b.R * out.A[i]).cwiseProduct(b.M);
    return res.squaredNorm() + 0.5 * lambda_nuc / dn * (dn * out.P[i].squaredNorm() + out.Q[i].squaredNorm()) +
           lambda_1 / dn * out.A[i].cwiseAbs().sum();
  };

  std::size_t rising = 0;
  double last_obj = std::numeric_limits<double>::infinity();
  const Matrix I_rho = Matrix::Identity(rho, rho);

  for (std::size_t k = 1; k <= o.iterations; ++k) {
    std::vector<Matrix> Qn(n), An(n), Pn(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = blocks[i];
      const auto d = static_cast<double>(g.degree(i));
      Matrix anchorQ = Matrix::Zero(T, rho);
      Matrix anchorA = Matrix::Zero(F, T);
      for (std::size_t j : g.neighbors(i)) {
        anchorQ += 0.5 * (out.Q[i] + out.Q[j]);
        anchorA += 0.5 * (out.A[i] + out.A[j]);
      }

      // P_i: independent ridge problems per owned link
      const Matrix E = b.Y - b.R * out.A[i];
      const Matrix& Q = out.Q[i];
      Matrix P(static_cast<Eigen::Index>(b.rows.size()), rho);
      for (Eigen::Index l = 0; l < P.rows(); ++l) {
        Matrix G = lambda_nuc * I_rho;
        Vector rhs = Vector::Zero(rho);
        for (Eigen::Index t = 0; t < T; ++t) {
          if (b.M(l, t) == 0.0) continue;
          G.noalias() += 2.0 * Q.row(t).transpose() * Q.row(t);
          rhs += 2.0 * E(l, t) * Q.row(t).transpose();
        }
        P.row(l) = G.ldlt().solve(rhs).transpose();
      }

      // Q_i: ridge problems per time instant, with consensus terms
      Matrix Qi(T, rho);
      for (Eigen::Index t = 0; t < T; ++t) {
        Matrix G = (lambda_nuc / dn + 2.0 * c * d) * I_rho;
        Vector rhs = -VQ[i].row(t).transpose() + 2.0 * c * anchorQ.row(t).transpose();
        for (Eigen::Index l = 0; l < P.rows(); ++l) {
          if (b.M(l, t) == 0.0) continue;
          G.noalias() += 2.0 * P.row(l).transpose() * P.row(l);
          rhs += 2.0 * E(l, t) * P.row(l).transpose();
        }
        Qi.row(t) = G.ldlt().solve(rhs).transpose();
      }

      // A_i: proximal gradient on the local anomaly map
      const Matrix base = b.Y - P * Qi.transpose();
      const double Lip = 2.0 * b.lipschitz_r + 2.0 * c * d;
      Matrix Ai = out.A[i];
      if (Lip > 0.0) {
        const double step = 1.0 / Lip;
        const double tau = step * lambda_1 / dn;
        auto smooth_grad = [&](const Matrix& A) {
          return Matrix(-2.0 * b.R.transpose() * (base - b.R * A).cwiseProduct(b.M) + VA[i] +
                        2.0 * c * (d * A - anchorA));
        };
        Matrix Y = Ai;
        double t = 1.0;
        const double scale = std::max(1.0, Ai.norm());
        for (std::size_t it = 0; it < o.inner_iterations; ++it) {
          Matrix next = soft_threshold(Matrix(Y - step * smooth_grad(Y)), tau);
          const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
          const double moved = (next - Ai).norm();
          Y = next + ((t - 1.0) / t_next) * (next - Ai);
          // momentum restart when the step reverses direction
          if ((Y - next).cwiseProduct(next - Ai).sum() < 0.0) {
            Y = next;
            t = 1.0;
          } else {
            t = t_next;
          }
          Ai = std::move(next);
          if (moved <= o.inner_tolerance * scale) break;
        }
      } else {
        Ai = soft_threshold(Matrix(-VA[i]), 0.0);
      }
      Pn[i] = std::move(P);
      Qn[i] = std::move(Qi);
      An[i] = std::move(Ai);
    }
    out.P = std::move(Pn);
    out.Q = std::move(Qn);
    out.A = std::move(An);

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j : g.neighbors(i)) {
        VQ[i] += c * (out.Q[i] - out.Q[j]);
        VA[i] += c * (out.A[i] - out.A[j]);
      }
    }

    DecentralizedRecord rec;
    rec.iteration = k;
    for (std::size_t i = 0; i < n; ++i) rec.objective += local_objective(i);
    for (const auto& [a, b] : g.edges()) {
      rec.consensus_q = std::max(rec.consensus_q, (out.Q[a] - out.Q[b]).norm());
      rec.consensus_a = std::max(rec.consensus_a, (out.A[a] - out.A[b]).norm());
    }
    if (!std::isfinite(rec.objective)) {
      throw ConvergenceError("factorized ADMM diverged with c=" + format_number(c) + "; decrease c",
                             rec.objective);
    }
    // rounding-level creep while consensus tightens does not count
    rising = rec.objective > last_obj + o.rise_tolerance * std::max(1.0, std::abs(last_obj)) ? rising + 1 : 0;
    last_obj = rec.objective;
    out.history.push_back(rec);
    if (o.divergence_window > 0 && rising >= o.divergence_window) {
      throw ConvergenceError("factorized ADMM objective rose for " + std::to_string(rising) +
                                 " consecutive iterations with c=" + format_number(c) + "; decrease c",
                             rec.objective);
    }
  }

  AnomalySolution& sol = out.consensus;
  sol.P = Matrix::Zero(inst.Y.rows(), rho);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < blocks[i].rows.size(); ++k)
      sol.P.row(blocks[i].rows[k]) = out.P[i].row(static_cast<Eigen::Index>(k));
  sol.Q = Matrix::Zero(T, rho);
  sol.A = Matrix::Zero(F, T);
  for (std::size_t i = 0; i < n; ++i) {
    sol.Q += out.Q[i] / dn;
    sol.A += out.A[i] / dn;
  }
  sol.X = sol.P * sol.Q.transpose();
  sol.objective = factorized_objective(inst, sol.P, sol.Q, sol.A, lambda_nuc, lambda_1);
  sol.iterations = o.iterations;
  return out;
}

Certificate optimality_certificate(const TrafficInstance& inst, const AnomalySolution& solution,
                                   double lambda_nuc, double tolerance) {
  const Matrix X = solution.P.size() > 0 ? Matrix(solution.P * solution.Q.transpose()) : solution.X;
  Certificate cert;
  cert.residual_norm = spectral_norm((inst.Y - X - inst.R * solution.A).cwiseProduct(inst.mask));
  cert.threshold = 0.5 * lambda_nuc * (1.0 + tolerance);
  cert.holds = lambda_nuc > 0.0 ? cert.residual_norm <= cert.threshold : cert.residual_norm == 0.0;
  return cert;
}

std::vector<RocPoint> roc_curve(const Matrix& A_hat, const Matrix& A_true, const std::vector<double>& thresholds) {
  if (A_hat.rows() != A_true.rows() || A_hat.cols() != A_true.cols()) {
    throw DataError("estimated and true anomaly maps differ in shape");
  }
  const Eigen::Index positives = (A_true.array() != 0.0).count();
  const Eigen::Index negatives = A_true.size() - positives;
  if (positives == 0) throw DataError("ground truth has no anomalies; detection rate undefined");
  if (negatives == 0) throw DataError("ground truth has no normal entries; false-alarm rate undefined");

  std::vector<double> taus(thresholds);
  std::sort(taus.begin(), taus.end(), std::greater<>());
  std::vector<RocPoint> curve;
  for (double tau : taus) {
    Eigen::Index tp = 0, fp = 0;
    for (Eigen::Index k = 0; k < A_hat.size(); ++k) {
      if (std::abs(A_hat.data()[k]) >= tau) {
        if (A_true.data()[k] != 0.0) ++tp;
        else ++fp;
      }
    }
    curve.push_back({tau, static_cast<double>(fp) / static_cast<double>(negatives),
                     static_cast<double>(tp) / static_cast<double>(positives)});
  }
  return curve;
}

std::vector<double> roc_thresholds(const Matrix& A_hat) {
  std::vector<double> v(static_cast<std::size_t>(A_hat.size()));
  for (Eigen::Index k = 0; k < A_hat.size(); ++k) v[static_cast<std::size_t>(k)] = std::abs(A_hat.data()[k]);
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  v.insert(v.begin(), std::numeric_limits<double>::infinity());
  return v;
}

double roc_auc(std::vector<RocPoint> curve) {
  curve.push_back({0.0, 1.0, 1.0});
  curve.insert(curve.begin(), RocPoint{std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::stable_sort(curve.begin(), curve.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.pfa < b.pfa || (a.pfa == b.pfa && a.pd < b.pd);
  });
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].pfa - curve[k - 1].pfa) * 0.5 * (curve[k].pd + curve[k - 1].pd);
  }
  return area;
}

Matrix least_squares_baseline(const TrafficInstance& inst) {
  return inst.R.completeOrthogonalDecomposition().solve(Matrix(inst.Y.cwiseProduct(inst.mask)));
}

Matrix subspace_baseline(const TrafficInstance& inst, std::size_t rank) {
  const Matrix Yo = inst.Y.cwiseProduct(inst.mask);
  Eigen::BDCSVD<Matrix> svd(Yo, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto r = std::min<Eigen::Index>(static_cast<Eigen::Index>(rank), svd.singularValues().size());
  const Matrix Xb = svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
                    svd.matrixV().leftCols(r).transpose();
  const Matrix residual = (Yo - Xb).cwiseProduct(inst.mask);
  return inst.R.completeOrthogonalDecomposition().solve(residual);
}

std::vector<double> lambda_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw ParameterError("lambda grid needs 0 < lo <= hi, count >= 1");
  std::vector<double> out;
  if (count == 1) return {lo};
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1)));
  }
  return out;
}

void write_loads_csv(std::ostream& out, const TrafficInstance& inst) {
  out.precision(17);
  for (Eigen::Index l = 0; l < inst.Y.rows(); ++l) {
    for (Eigen::Index t = 0; t < inst.Y.cols(); ++t) {
      if (t) out << ',';
      if (inst.mask(l, t) != 0.0) out << inst.Y(l, t);
    }
    out << '\n';
  }
}

void write_routing_csv(std::ostream& out, const Matrix& R) {
  for (Eigen::Index l = 0; l < R.rows(); ++l) {
    for (Eigen::Index f = 0; f < R.cols(); ++f) out << (f ? "," : "") << (R(l, f) != 0.0 ? 1 : 0);
    out << '\n';
  }
}

namespace {

std::vector<std::vector<std::string>> read_cells(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void read_loads_csv(std::istream& in, Matrix& Y, Matrix& mask) {
  auto rows = read_cells(in);
  if (rows.empty()) throw DataError("load matrix is empty");
  const std::size_t T = rows.front().size();
  Y = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(T));
  mask = Matrix::Zero(Y.rows(), Y.cols());
  for (std::size_t l = 0; l < rows.size(); ++l) {
    if (rows[l].size() != T) throw DataError("load row " + std::to_string(l + 1) + " has the wrong length");
    for (std::size_t t = 0; t < T; ++t) {
      const std::string& c = rows[l][t];
      if (c.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        Y(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) = std::stod(c);
      } catch (const std::exception&) {
        throw DataError("load row " + std::to_string(l + 1) + ": bad number '" + c + "'");
      }
      mask(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) = 1.0;
    }
  }
}

Matrix read_routing_csv(std::istream& in) {
  auto rows = read_cells(in);
  if (rows.empty()) throw DataError("routing matrix is empty");
  Matrix R(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t l = 0; l < rows.size(); ++l) {
    if (rows[l].size() != static_cast<std::size_t>(R.cols())) {
      throw DataError("routing row " + std::to_string(l + 1) + " has the wrong length");
    }
    for (std::size_t f = 0; f < rows[l].size(); ++f) {
      const std::string& c = rows[l][f];
      if (c != "0" && c != "1") throw DataError("routing row " + std::to_string(l + 1) + ": entries must be 0 or 1");
      R(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(f)) = c == "1" ? 1.0 : 0.0;
    }
  }
  return R;
}

}  // namespace dlearn
