#include "dlearn/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dlearn/adaptive.hpp"
#include "dlearn/anomaly.hpp"
#include "dlearn/io.hpp"

namespace dlearn {

namespace {

constexpr double nan_v = std::numeric_limits<double>::quiet_NaN();

Vector gaussian(Eigen::Index p, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(p);
  for (auto& x : v) x = g(rng);
  return v;
}

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

Matrix spd_with_spectrum(const Vector& eig, std::mt19937_64& rng) {
  const auto p = eig.size();
  Eigen::HouseholderQR<Matrix> qr(gaussian(p, p, rng));
  Matrix q = qr.householderQ();
  Matrix m = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

struct CostBundle {
  std::vector<std::unique_ptr<LocalCost>> owned;
  std::vector<LocalCost*> ptrs;
  std::vector<const LocalCost*> cptrs;

  template <typename C>
  void add(C cost) {
    auto ptr = std::make_unique<C>(std::move(cost));
    ptrs.push_back(ptr.get());
    cptrs.push_back(ptr.get());
    owned.push_back(std::move(ptr));
  }
};

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  body(out);
  if (!out) throw DataError("write failed for " + path.string());
}

template <typename T>
T read_file(const std::filesystem::path& path, const std::function<T(std::istream&)>& body) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return body(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"average", "blue", "decode", "demod", "lasso", "svm",
                                              "kmeans",  "lms",  "rls",    "anomaly", "rate"};
  return names;
}

double positive(const Config& cfg, const std::string& key, double value) {
  if (!(value > 0.0)) throw ConfigError(cfg.source() + ": key '" + key + "' must be positive");
  return value;
}

std::size_t at_least_one(const Config& cfg, const std::string& key, std::size_t value) {
  if (value == 0) throw ConfigError(cfg.source() + ": key '" + key + "' must be at least 1");
  return value;
}

LinkNoise noise_from(const Config& cfg, std::uint64_t seed) {
  const double var = cfg.number_or("noise.variance", 0.0);
  if (var < 0.0) throw ConfigError(cfg.source() + ": key 'noise.variance' must be >= 0");
  if (var == 0.0) return LinkNoise::none();
  return LinkNoise::awgn(var, cfg.count_or("noise.seed", seed));
}

// Everything a task hands back to the driver.
struct TaskOutput {
  std::vector<TraceRecord> records;
  double threshold = 0.0;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::filesystem::path> files;
};

struct TaskContext {
  const Config& cfg;
  std::filesystem::path out_dir;
  std::string name;
  std::uint64_t seed;
  double tolerance;

  std::filesystem::path file(const std::string& suffix) const { return out_dir / (name + "." + suffix); }
};

void emit_trace(const TaskContext& ctx, TaskOutput& out) {
  const auto csv = ctx.file("trace.csv");
  const auto dat = ctx.file("trace.dat");
  write_file(csv, [&](std::ostream& o) { write_trace_csv(o, out.records); });
  write_file(dat, [&](std::ostream& o) { write_trace_dat(o, out.records); });
  out.files.push_back(csv);
  out.files.push_back(dat);
}

double threshold_for(double tolerance, const Vector& reference) {
  return tolerance * std::max(1.0, reference.norm());
}

// shared tail of every ADMM-on-costs task
TaskOutput admm_task(const TaskContext& ctx, const NetworkGraph& graph, const CostBundle& costs,
                     const Vector& oracle, std::size_t default_iters) {
  RunOptions opt;
  opt.penalty = positive(ctx.cfg, "c", ctx.cfg.number("c"));
  opt.iterations = ctx.cfg.count_or("iters", default_iters);
  opt.noise = noise_from(ctx.cfg, ctx.seed);
  opt.reference = oracle;
  opt.graph_id = ctx.cfg.text_or("graph.kind", "rgg");
  RunTrace trace = admm_run(graph, costs.ptrs, opt);
  TaskOutput out;
  out.records = std::move(trace.records);
  out.threshold = threshold_for(ctx.tolerance, oracle);
  out.metrics.emplace_back("objective", out.records.back().objective);
  emit_trace(ctx, out);
  const auto est = ctx.file("estimates.csv");
  write_file(est, [&](std::ostream& o) { write_matrix_csv(o, trace.final_estimates.transpose()); });
  out.files.push_back(est);
  return out;
}

TaskOutput run_average(const TaskContext& ctx, const NetworkGraph& g) {
  const auto p = static_cast<Eigen::Index>(at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 3)));
  std::mt19937_64 rng(ctx.seed);
  const Matrix values = gaussian(p, static_cast<Eigen::Index>(g.node_count()), rng);
  CostBundle costs;
  for (Eigen::Index i = 0; i < values.cols(); ++i) costs.add(make_average_cost(values.col(i)));
  return admm_task(ctx, g, costs, values.rowwise().mean(), 200);
}

TaskOutput run_blue(const TaskContext& ctx, const NetworkGraph& g) {
  const auto data = synth_blue(g.node_count(), at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 3)),
                               at_least_one(ctx.cfg, "data.m", ctx.cfg.count_or("data.m", 5)), ctx.seed);
  CostBundle costs;
  for (const auto& d : data) costs.add(make_blue_cost(d));
  return admm_task(ctx, g, costs, blue_centralized(data), 300);
}

TaskOutput run_lasso(const TaskContext& ctx, const NetworkGraph& g) {
  const double lambda = ctx.cfg.number_or("lambda", 0.1);
  const auto data = synth_lasso(g.node_count(), at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 10)),
                                at_least_one(ctx.cfg, "data.m", ctx.cfg.count_or("data.m", 6)),
                                ctx.cfg.count_or("data.support", 3), ctx.seed);
  CostBundle costs;
  for (const auto& d : data) costs.add(make_lasso_cost(d, lambda, data.size()));
  TaskOutput out = admm_task(ctx, g, costs, lasso_centralized(data, lambda), 500);
  out.metrics.emplace_back("lambda", lambda);
  return out;
}

NodeData load_node_data(const Config& cfg, std::size_t nodes, bool labelled) {
  const std::filesystem::path path = cfg.text("data.file");
  return read_file<NodeData>(path, [&](std::istream& in) { return read_data_csv(in, nodes, labelled); });
}

TaskOutput run_svm(const TaskContext& ctx, const NetworkGraph& g) {
  const double C = positive(ctx.cfg, "C", ctx.cfg.number_or("C", 1.0));
  std::vector<SvmLocalData> data;
  if (ctx.cfg.has("data.file")) {
    NodeData nd = load_node_data(ctx.cfg, g.node_count(), true);
    for (std::size_t i = 0; i < nd.features.size(); ++i) {
      SvmLocalData d;
      d.X = nd.features[i];
      d.y = Eigen::Map<const Vector>(nd.labels[i].data(), static_cast<Eigen::Index>(nd.labels[i].size()));
      for (double y : nd.labels[i]) {
        if (y != 1.0 && y != -1.0) throw DataError(ctx.cfg.text("data.file") + ": labels must be -1 or +1");
      }
      d.C = C;
      data.push_back(std::move(d));
    }
  } else {
    data = synth_svm(g.node_count(), at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 2)),
                     at_least_one(ctx.cfg, "data.m", ctx.cfg.count_or("data.m", 10)), C, ctx.seed);
  }
  const Vector oracle = svm_centralized(data).packed();
  DsvmResult res = dsvm_run(g, data, positive(ctx.cfg, "c", ctx.cfg.number("c")), ctx.cfg.count_or("iters", 2000),
                            oracle);
  TaskOutput out;
  out.records = std::move(res.trace.records);
  // the SVM criterion is relative to the size of the optimum
  out.threshold = threshold_for(ctx.tolerance, oracle);
  out.metrics.emplace_back("objective", svm_objective(data, res.models.front().packed()));
  out.metrics.emplace_back("oracle_objective", svm_objective(data, oracle));
  out.metrics.emplace_back("relative_distance", out.records.back().distance_to_reference / oracle.norm());
  emit_trace(ctx, out);
  const auto model = ctx.file("model.csv");
  write_file(model, [&](std::ostream& o) {
    Matrix m(static_cast<Eigen::Index>(res.models.size()), oracle.size());
    for (std::size_t i = 0; i < res.models.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = res.models[i].packed();
    write_matrix_csv(o, m);
  });
  out.files.push_back(model);
  return out;
}

TaskOutput run_kmeans(const TaskContext& ctx, const NetworkGraph& g) {
  DkmeansOptions opt;
  opt.K = at_least_one(ctx.cfg, "K", ctx.cfg.count_or("K", 3));
  opt.penalty = positive(ctx.cfg, "eta", ctx.cfg.number_or("eta", ctx.cfg.number_or("c", 10.0)));
  opt.macro_iterations = ctx.cfg.count_or("iters", 50);
  opt.inner_iterations = ctx.cfg.count_or("inner", 50);
  opt.seed = ctx.seed;
  std::vector<Matrix> data;
  if (ctx.cfg.has("data.file")) {
    data = load_node_data(ctx.cfg, g.node_count(), false).features;
  } else {
    data = synth_clusters(g.node_count(), at_least_one(ctx.cfg, "data.per_node", ctx.cfg.count_or("data.per_node", 10)),
                          opt.K, at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 2)), ctx.seed);
  }
  DkmeansResult res = dkmeans_run(g, data, opt);
  LloydResult lloyd = lloyd_kmeans(pool_observations(data), res.initial_centroids, std::max<std::size_t>(opt.macro_iterations, 100));
  const double ref = lloyd.sse.empty() ? 0.0 : lloyd.sse.back();

  TaskOutput out;
  for (const auto& h : res.history) {
    out.records.push_back({h.iteration, h.consensus_error, h.sse, std::abs(h.sse - ref) / std::max(1.0, ref)});
  }
  out.threshold = ctx.tolerance;
  out.metrics.emplace_back("sse", res.history.empty() ? nan_v : res.history.back().sse);
  out.metrics.emplace_back("lloyd_sse", ref);
  out.metrics.emplace_back("reassigned_last", res.history.empty() ? nan_v : static_cast<double>(res.history.back().reassigned));
  emit_trace(ctx, out);
  const auto cen = ctx.file("centroids.csv");
  write_file(cen, [&](std::ostream& o) { write_matrix_csv(o, res.centroids.front().transpose()); });
  out.files.push_back(cen);
  return out;
}

TaskOutput run_decode(const TaskContext& ctx, const NetworkGraph& g) {
  Codebook book;
  if (ctx.cfg.has("codebook.file")) {
    const std::filesystem::path path = ctx.cfg.text("codebook.file");
    book = read_file<Codebook>(path, [](std::istream& in) { return read_codebook(in); });
  } else {
    book = random_linear_codebook(ctx.cfg.count_or("codebook.bits", 6), ctx.cfg.count_or("codebook.length", 60),
                                  ctx.cfg.count_or("codebook.size", 40), ctx.seed);
  }
  const double variance = positive(ctx.cfg, "channel_variance", ctx.cfg.number_or("channel_variance", 1.0));
  const double c = positive(ctx.cfg, "c", ctx.cfg.number("c"));
  const std::size_t iters = ctx.cfg.count_or("iters", 10);
  const std::size_t trials = at_least_one(ctx.cfg, "trials", ctx.cfg.count_or("trials", 100));
  std::mt19937_64 rng(ctx.seed);

  std::size_t agree = 0, word_errors = 0, bit_errors = 0;
  const auto table = ctx.file("decode.csv");
  write_file(table, [&](std::ostream& o) {
    o << "trial,transmitted,centralized,nodes_agreeing\n";
    for (std::size_t t = 0; t < trials; ++t) {
      DecodeTrial d = decode_trial(g, book, variance, c, iters, rng);
      std::size_t same = 0;
      for (auto k : d.decentralized) same += k == d.centralized;
      agree += same;
      word_errors += d.centralized != d.transmitted;
      bit_errors += d.centralized_bit_errors;
      o << t << ',' << d.transmitted << ',' << d.centralized << ',' << same << '\n';
    }
  });
  TaskOutput out;
  out.files.push_back(table);
  const double total = static_cast<double>(trials);
  out.metrics.emplace_back("agreement", static_cast<double>(agree) / (total * static_cast<double>(g.node_count())));
  out.metrics.emplace_back("centralized_wer", static_cast<double>(word_errors) / total);
  out.metrics.emplace_back("centralized_ber", static_cast<double>(bit_errors) / (total * static_cast<double>(book.cols())));
  return out;
}

TaskOutput run_demod(const TaskContext& ctx, const NetworkGraph& g) {
  const auto N = static_cast<Eigen::Index>(at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 4)));
  const auto m = static_cast<Eigen::Index>(at_least_one(ctx.cfg, "data.m", ctx.cfg.count_or("data.m", 6)));
  const double sigma = ctx.cfg.number_or("data.sigma", 0.5);
  const double c = positive(ctx.cfg, "c", ctx.cfg.number("c"));
  const std::size_t iters = ctx.cfg.count_or("iters", 50);
  const std::size_t trials = at_least_one(ctx.cfg, "trials", ctx.cfg.count_or("trials", 20));
  const std::vector<double> alphabet{-1.0, 1.0};
  const std::size_t n = g.node_count();
  std::mt19937_64 rng(ctx.seed);
  std::bernoulli_distribution coin(0.5);

  TaskOutput out;
  std::size_t agree = 0, symbol_errors = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Vector s(N);
    for (auto& x : s) x = coin(rng) ? 1.0 : -1.0;
    Matrix stats(N + N * N, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix H = gaussian(m, N, rng);
      const Vector y = H * s + gaussian(m, rng, sigma);
      DemodLocalStats st = demod_local_stats(H, y);
      stats.col(static_cast<Eigen::Index>(i)) << st.r, Eigen::Map<const Vector>(st.R.data(), N * N);
    }
    auto unpack = [&](const Vector& col, Vector& r, Matrix& R) {
      r = col.head(N);
      R = Eigen::Map<const Matrix>(col.data() + N, N, N);
    };
    Vector r;
    Matrix R;
    unpack(stats.rowwise().mean(), r, R);
    const Vector central = ml_demodulate(r, R, alphabet);
    symbol_errors += static_cast<std::size_t>((central - s).cwiseAbs().sum() / 2.0 + 0.5);
    RunTrace trace = daverage_run(g, stats, c, iters, noise_from(ctx.cfg, ctx.seed));
    for (std::size_t i = 0; i < n; ++i) {
      unpack(trace.final_estimates.col(static_cast<Eigen::Index>(i)), r, R);
      agree += ml_demodulate(r, 0.5 * (R + R.transpose()), alphabet) == central;
    }
    if (t == 0) {
      out.records = std::move(trace.records);
      out.threshold = threshold_for(ctx.tolerance, stats.rowwise().mean());
    }
  }
  const double total = static_cast<double>(trials);
  out.metrics.emplace_back("agreement", static_cast<double>(agree) / (total * static_cast<double>(n)));
  out.metrics.emplace_back("centralized_ser", static_cast<double>(symbol_errors) / (total * static_cast<double>(N)));
  emit_trace(ctx, out);
  return out;
}

TaskOutput run_adaptive(const TaskContext& ctx, const NetworkGraph& g, AdaptiveAlgorithm algorithm) {
  AdaptiveOptions opt;
  opt.algorithm = algorithm;
  if (ctx.cfg.text_or("algorithm", "") == "local") opt.algorithm = AdaptiveAlgorithm::llms;
  opt.penalty = positive(ctx.cfg, "c", ctx.cfg.number("c"));
  opt.mu = positive(ctx.cfg, "mu", ctx.cfg.number_or("mu", 0.05));
  opt.gamma = positive(ctx.cfg, "gamma", ctx.cfg.number_or("gamma", 0.99));
  opt.delta = positive(ctx.cfg, "delta", ctx.cfg.number_or("delta", 100.0));
  opt.steps = ctx.cfg.count_or("iters", 1000);
  opt.noise = noise_from(ctx.cfg, ctx.seed);
  opt.exchange_multipliers = ctx.cfg.flag_or("exchange_multipliers", false);

  const std::string kind = ctx.cfg.text_or("scenario", "tracking");
  std::unique_ptr<SampleStream> stream;
  std::optional<Vector> alpha_true;
  if (kind == "tracking") {
    TrackingScenario sc;
    sc.n = g.node_count();
    sc.p = at_least_one(ctx.cfg, "data.p", ctx.cfg.count_or("data.p", 4));
    sc.theta_min = ctx.cfg.number_or("theta_min", sc.theta_min);
    sc.theta_max = ctx.cfg.number_or("theta_max", sc.theta_max);
    sc.driving_variance = ctx.cfg.number_or("driving_variance", sc.driving_variance);
    sc.observation_variance = ctx.cfg.number_or("observation_variance", sc.observation_variance);
    sc.seed = ctx.seed;
    stream = std::make_unique<TrackingStream>(sc);
  } else if (kind == "spectrum") {
    std::vector<std::size_t> nulled;
    for (double x : ctx.cfg.has("nulled") ? ctx.cfg.numbers("nulled") : std::vector<double>{0, 1}) {
      if (x < 0.0 || x != std::floor(x) || x >= static_cast<double>(g.node_count())) {
        throw ConfigError(ctx.cfg.source() + ": key 'nulled' must list node indices");
      }
      nulled.push_back(static_cast<std::size_t>(x));
    }
    ArScenario sc = spectrum_scenario(g.node_count(), nulled, ctx.seed);
    alpha_true = sc.alpha;
    stream = std::make_unique<ArStream>(sc);
  } else {
    throw ConfigError(ctx.cfg.source() + ": key 'scenario' must be \"tracking\" or \"spectrum\"");
  }

  AdaptiveTrace trace = adaptive_run(g, *stream, opt);
  TrackingMetrics metrics = tracking_metrics(trace);
  TaskOutput out;
  for (std::size_t t = 0; t < trace.estimates.size(); ++t) {
    out.records.push_back({t, consensus_error(g, trace.estimates[t]), t ? trace.global_mse[t - 1] : nan_v,
                           max_distance(trace.estimates[t], trace.truth[t])});
  }
  out.threshold = threshold_for(ctx.tolerance, trace.truth.back());
  emit_trace(ctx, out);

  const std::size_t steps = trace.global_mse.size();
  const std::size_t tail = steps - steps / 5;
  double msd = 0.0, mse = 0.0;
  for (std::size_t t = tail; t < steps; ++t) {
    msd += metrics.msd.row(static_cast<Eigen::Index>(t)).mean();
    mse += trace.global_mse[t];
  }
  const double count = static_cast<double>(std::max<std::size_t>(1, steps - tail));
  out.metrics.emplace_back("steady_msd", msd / count);
  out.metrics.emplace_back("steady_global_mse", mse / count);

  const auto mfile = ctx.file("metrics.csv");
  const auto gfile = ctx.file("global_mse.csv");
  write_file(mfile, [&](std::ostream& o) { write_metrics_csv(o, metrics); });
  write_file(gfile, [&](std::ostream& o) { write_global_mse_csv(o, metrics.global_mse); });
  out.files.push_back(mfile);
  out.files.push_back(gfile);
  if (alpha_true) {
    const Vector est = averaged_estimate(trace, trace.estimates.size() / 2);
    const double peak = ar_psd_peak(est);
    out.metrics.emplace_back("psd_peak", peak);
    out.metrics.emplace_back("psd_peak_error", std::abs(peak - ar_psd_peak(*alpha_true)));
    const auto pfile = ctx.file("psd.csv");
    write_file(pfile, [&](std::ostream& o) { write_psd_csv(o, *alpha_true, est, 513); });
    out.files.push_back(pfile);
  }
  return out;
}

TaskOutput run_anomaly(const TaskContext& ctx) {
  SynthOptions so;
  so.routers = ctx.cfg.count_or("synth.routers", so.routers);
  so.router_edges = ctx.cfg.count_or("synth.edges", so.router_edges);
  so.horizon = ctx.cfg.count_or("synth.horizon", so.horizon);
  so.rank = ctx.cfg.count_or("synth.rank", so.rank);
  so.anomaly_density = ctx.cfg.number_or("synth.density", so.anomaly_density);
  so.anomaly_amplitude = ctx.cfg.number_or("synth.amplitude", so.anomaly_amplitude);
  so.noise_sigma = ctx.cfg.number_or("synth.sigma", so.noise_sigma);
  so.missing_fraction = ctx.cfg.number_or("synth.missing", so.missing_fraction);
  so.seed = ctx.seed;
  const TrafficInstance inst = synth_traffic(so);
  const double lnuc = positive(ctx.cfg, "lambda_nuc", ctx.cfg.number("lambda_nuc"));
  const double l1 = positive(ctx.cfg, "lambda_1", ctx.cfg.number("lambda_1"));
  const std::string solver = ctx.cfg.text_or("solver", "both");
  if (solver != "centralized" && solver != "decentralized" && solver != "both") {
    throw ConfigError(ctx.cfg.source() + ": key 'solver' must be \"centralized\", \"decentralized\" or \"both\"");
  }

  TaskOutput out;
  out.threshold = ctx.tolerance;
  std::optional<AnomalySolution> central;
  if (solver != "decentralized") {
    central = solve_centralized(inst, lnuc, l1);
    out.metrics.emplace_back("centralized_objective", central->objective);
    out.metrics.emplace_back("centralized_gap", convex_optimality_gap(inst, central->X, central->A, lnuc, l1));
    for (std::size_t k = 0; k < central->objective_history.size(); ++k) {
      out.records.push_back({k, 0.0, central->objective_history[k], nan_v});
    }
  }
  std::optional<AnomalySolution> decentral;
  if (solver != "centralized") {
    DecentralizedOptions d;
    d.rank = at_least_one(ctx.cfg, "rank", ctx.cfg.count_or("rank", d.rank));
    d.penalty = positive(ctx.cfg, "c", ctx.cfg.number("c"));
    d.iterations = ctx.cfg.count_or("iters", d.iterations);
    d.seed = ctx.seed;
    DecentralizedResult res = solve_factorized_decentralized(inst, lnuc, l1, d);
    decentral = res.consensus;
    out.records.clear();
    for (const auto& h : res.history) {
      const double gap = central ? std::abs(h.objective - central->objective) / central->objective : nan_v;
      out.records.push_back({h.iteration, std::max(h.consensus_q, h.consensus_a), h.objective, gap});
    }
    const Certificate cert = optimality_certificate(inst, *decentral, lnuc);
    out.metrics.emplace_back("decentralized_objective", convex_objective(inst, decentral->X, decentral->A, lnuc, l1));
    out.metrics.emplace_back("certificate", cert.holds ? 1.0 : 0.0);
    out.metrics.emplace_back("certificate_residual", cert.residual_norm);
  }
  emit_trace(ctx, out);

  const AnomalySolution& chosen = central ? *central : *decentral;
  const auto afile = ctx.file("anomalies.csv");
  write_file(afile, [&](std::ostream& o) { write_matrix_csv(o, chosen.A); });
  out.files.push_back(afile);
  if (inst.A_true.cwiseAbs().maxCoeff() > 0.0 && (inst.A_true.array() == 0.0).any()) {
    auto curve = roc_curve(chosen.A, inst.A_true, roc_thresholds(chosen.A));
    const Matrix ls = least_squares_baseline(inst);
    out.metrics.emplace_back("auc", roc_auc(curve));
    out.metrics.emplace_back("auc_least_squares", roc_auc(roc_curve(ls, inst.A_true, roc_thresholds(ls))));
    const auto rfile = ctx.file("roc.csv");
    write_file(rfile, [&](std::ostream& o) { write_roc_csv(o, curve); });
    out.files.push_back(rfile);
  }
  return out;
}

struct QuadraticScenario {
  NetworkGraph graph;
  std::vector<QuadraticCost> costs;
  std::vector<LocalCost*> ptrs;
  std::vector<const LocalCost*> cptrs;
  Vector oracle;
};

std::unique_ptr<QuadraticScenario> quadratic_scenario(const Config& cfg) {
  const std::uint64_t seed = cfg.count_or("seed", 0);
  const double lo = positive(cfg, "data.lo", cfg.number_or("data.lo", 1.0));
  const double hi = cfg.number_or("data.hi", 10.0);
  if (hi < lo) throw ConfigError(cfg.source() + ": key 'data.hi' must be >= data.lo");
  auto sc = std::make_unique<QuadraticScenario>(QuadraticScenario{graph_from_config(cfg), {}, {}, {}, {}});
  sc->costs = random_quadratic_costs(sc->graph.node_count(), at_least_one(cfg, "data.p", cfg.count_or("data.p", 2)),
                                     lo, hi, seed);
  for (auto& c : sc->costs) {
    sc->ptrs.push_back(&c);
    sc->cptrs.push_back(&c);
  }
  sc->oracle = centralized_oracle(sc->cptrs);
  return sc;
}

double rate_penalty(const Config& cfg, const OptimalPenalty& opt) {
  return cfg.has("c") ? positive(cfg, "c", cfg.number("c")) : opt.c_star;
}

TaskOutput run_rate(const TaskContext& ctx) {
  auto sc = quadratic_scenario(ctx.cfg);
  const RatePrediction pred = rate_predict(ctx.cfg);
  RunOptions opt;
  opt.penalty = pred.penalty;
  opt.iterations = ctx.cfg.count_or("iters", 200);
  opt.reference = sc->oracle;
  opt.track_edge_multipliers = true;
  opt.keep_snapshots = true;
  RunTrace trace = admm_run(sc->graph, sc->ptrs, opt);
  const GraphAlgebra algebra = compute_algebra(sc->graph);
  const HNormReport report = hnorm_verify(trace, algebra, reference_point(sc->graph, sc->cptrs, sc->oracle),
                                          pred.delta);
  TaskOutput out;
  out.records = trace.records;
  out.threshold = threshold_for(ctx.tolerance, sc->oracle);
  out.metrics.emplace_back("c_star", pred.optimal.c_star);
  out.metrics.emplace_back("delta_star", pred.optimal.delta_star);
  out.metrics.emplace_back("delta", pred.delta);
  out.metrics.emplace_back("hnorm_passed", report.passed() ? 1.0 : 0.0);
  out.metrics.emplace_back("worst_ratio", report.worst_ratio);
  out.metrics.emplace_back("predicted_ratio", 1.0 / (1.0 + pred.delta));
  emit_trace(ctx, out);
  const auto snaps = ctx.file("snapshots.csv");
  const auto hn = ctx.file("hnorm.csv");
  write_file(snaps, [&](std::ostream& o) { write_snapshots_csv(o, trace.snapshots); });
  write_file(hn, [&](std::ostream& o) { write_hnorm_csv(o, report); });
  out.files.push_back(snaps);
  out.files.push_back(hn);
  return out;
}

}  // namespace

// ---- generators ----

std::vector<QuadraticCost> random_quadratic_costs(std::size_t n, std::size_t p, double lo, double hi,
                                                  std::uint64_t seed) {
  if (n == 0 || p == 0) throw ParameterError("need at least one node and one dimension");
  if (!(lo > 0.0) || hi < lo) throw ParameterError("need 0 < lo <= hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<QuadraticCost> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vector eig(static_cast<Eigen::Index>(p));
    for (auto& e : eig) e = u(rng);
    if (i == 0) eig(0) = lo;
    if (i + 1 == n) eig(p > 1 && n == 1 ? 1 : 0) = hi;
    Matrix Q = spd_with_spectrum(eig, rng);
    const Vector m = gaussian(static_cast<Eigen::Index>(p), rng);
    out.emplace_back(Q, Q * m, 0.5 * m.dot(Q * m));
  }
  return out;
}

std::vector<BlueLocalData> synth_blue(std::size_t n, std::size_t p, std::size_t m, std::uint64_t seed) {
  if (n * m < p) throw ParameterError("too few observations for the unknown dimension");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> var(0.5, 2.0);
  const Vector truth = gaussian(static_cast<Eigen::Index>(p), rng);
  std::vector<BlueLocalData> out;
  for (std::size_t i = 0; i < n; ++i) {
    BlueLocalData d;
    d.H = gaussian(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p), rng);
    Vector v(static_cast<Eigen::Index>(m));
    for (auto& x : v) x = var(rng);
    d.Sigma = v.asDiagonal();
    d.y = d.H * truth + v.cwiseSqrt().cwiseProduct(gaussian(static_cast<Eigen::Index>(m), rng));
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<LassoLocalData> synth_lasso(std::size_t n, std::size_t p, std::size_t m, std::size_t support,
                                        std::uint64_t seed) {
  if (support > p) throw ParameterError("support exceeds the dimension");
  std::mt19937_64 rng(seed);
  Vector truth = Vector::Zero(static_cast<Eigen::Index>(p));
  std::vector<Eigen::Index> idx(p);
  for (std::size_t k = 0; k < p; ++k) idx[k] = static_cast<Eigen::Index>(k);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t k = 0; k < support; ++k) truth(idx[k]) = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  std::vector<LassoLocalData> out;
  for (std::size_t i = 0; i < n; ++i) {
    LassoLocalData d;
    d.R = gaussian(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p), rng);
    d.y = d.R * truth + gaussian(static_cast<Eigen::Index>(m), rng, 0.01);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<SvmLocalData> synth_svm(std::size_t n, std::size_t p, std::size_t m, double C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution label(0.5);
  std::vector<SvmLocalData> out;
  for (std::size_t i = 0; i < n; ++i) {
    SvmLocalData d;
    d.C = C;
    d.X.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
    d.y.resize(static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
      d.y(j) = label(rng) ? 1.0 : -1.0;
      d.X.col(j) = d.y(j) * Vector::Ones(static_cast<Eigen::Index>(p)) + gaussian(static_cast<Eigen::Index>(p), rng);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Matrix> synth_clusters(std::size_t n, std::size_t per_node, std::size_t K, std::size_t p,
                                   std::uint64_t seed) {
  if (K == 0 || p == 0) throw ParameterError("need K >= 1 and p >= 1");
  Matrix centres = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(K));
  for (std::size_t k = 1; k < K; ++k) {
    centres(static_cast<Eigen::Index>((k - 1) % p), static_cast<Eigen::Index>(k)) = 4.0 * static_cast<double>(1 + (k - 1) / p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> which(0, K - 1);
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix X(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(per_node));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      X.col(j) = centres.col(static_cast<Eigen::Index>(which(rng))) + gaussian(static_cast<Eigen::Index>(p), rng, 0.5);
    }
    out.push_back(std::move(X));
  }
  return out;
}

NetworkGraph graph_from_config(const Config& cfg) {
  const std::string kind = cfg.text_or("graph.kind", "rgg");
  if (kind == "file") {
    const std::filesystem::path path = cfg.text("graph.file");
    return read_file<NetworkGraph>(path, [](std::istream& in) { return read_edge_list(in); });
  }
  const std::size_t n = at_least_one(cfg, "graph.n", cfg.count_or("graph.n", 10));
  if (kind == "complete") return complete_graph(n);
  if (kind == "ring") return ring_graph(n);
  if (kind == "path") return path_graph(n);
  if (kind == "rgg") {
    return connected_random_geometric(n, positive(cfg, "graph.radius", cfg.number_or("graph.radius", 0.5)),
                                      cfg.count_or("graph.seed", cfg.count_or("seed", 0)));
  }
  throw ConfigError(cfg.source() + ": key 'graph.kind' must be complete, ring, path, rgg or file");
}

// ---- driver ----

double ScenarioSummary::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw ParameterError("summary has no metric '" + key + "'");
}

TraceStatistics trace_statistics(const std::vector<TraceRecord>& records, double threshold) {
  TraceStatistics st;
  if (records.empty()) {
    st.final_consensus_error = nan_v;
    st.distance_to_oracle = nan_v;
    return st;
  }
  st.iterations = records.back().iteration;
  st.final_consensus_error = records.back().consensus_error;
  st.distance_to_oracle = records.back().distance_to_reference;
  for (const auto& r : records) {
    if (r.distance_to_reference <= threshold) {
      st.iterations_to_tolerance = r.iteration;
      break;
    }
  }
  return st;
}

ScenarioSummary run_scenario(const Config& cfg, const std::filesystem::path& out_dir) {
  const std::string task = cfg.text("task");
  bool known = false;
  for (const auto& t : task_names()) known = known || t == task;
  if (!known) throw ConfigError(cfg.source() + ": unknown task '" + task + "'");

  TaskContext ctx{cfg, out_dir, cfg.text_or("name", task), cfg.count_or("seed", 0),
                  positive(cfg, "tolerance", cfg.number_or("tolerance", 1e-8))};
  // parameters are read before any work so config errors come first
  if (task != "kmeans" && task != "rate" && !(task == "anomaly" && cfg.text_or("solver", "both") == "centralized")) {
    positive(cfg, "c", cfg.number("c"));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const auto start = std::chrono::steady_clock::now();
  TaskOutput out;
  if (task == "anomaly") {
    out = run_anomaly(ctx);
  } else if (task == "rate") {
    out = run_rate(ctx);
  } else {
    const NetworkGraph g = graph_from_config(cfg);
    if (task == "average") out = run_average(ctx, g);
    else if (task == "blue") out = run_blue(ctx, g);
    else if (task == "lasso") out = run_lasso(ctx, g);
    else if (task == "svm") out = run_svm(ctx, g);
    else if (task == "kmeans") out = run_kmeans(ctx, g);
    else if (task == "decode") out = run_decode(ctx, g);
    else if (task == "demod") out = run_demod(ctx, g);
    else if (task == "lms") out = run_adaptive(ctx, g, AdaptiveAlgorithm::dlms);
    else out = run_adaptive(ctx, g, AdaptiveAlgorithm::drls);
  }
  const auto stop = std::chrono::steady_clock::now();

  ScenarioSummary s;
  s.task = task;
  s.name = ctx.name;
  s.seed = ctx.seed;
  s.penalty = cfg.number_or("c", nan_v);
  if (task == "kmeans") s.penalty = cfg.number_or("eta", cfg.number_or("c", 10.0));
  const TraceStatistics st = trace_statistics(out.records, out.threshold);
  s.iterations = st.iterations;
  s.final_consensus_error = st.final_consensus_error;
  s.distance_to_oracle = st.distance_to_oracle;
  s.iterations_to_tolerance = st.iterations_to_tolerance;
  s.threshold = out.threshold;
  s.wall_seconds = std::chrono::duration<double>(stop - start).count();
  s.metrics = std::move(out.metrics);
  s.files = std::move(out.files);
  return s;
}

std::string summary_json(const ScenarioSummary& s) {
  nlohmann::ordered_json j;
  j["task"] = s.task;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["c"] = s.penalty;
  j["iterations"] = s.iterations;
  j["final_consensus_err"] = s.final_consensus_error;
  j["dist_to_oracle"] = s.distance_to_oracle;
  j["iters_to_tol"] = s.iterations_to_tolerance ? nlohmann::ordered_json(*s.iterations_to_tolerance) : nullptr;
  j["threshold"] = s.threshold;
  j["wall_seconds"] = s.wall_seconds;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.metrics) m[k] = v;
  j["metrics"] = m;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& f : s.files) files.push_back(f.string());
  j["files"] = files;
  return j.dump();
}

void append_summary(const std::filesystem::path& path, const ScenarioSummary& summary) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  out << summary_json(summary) << '\n';
}

const std::vector<std::string>& sweepable_parameters() {
  static const std::vector<std::string> names{"c", "eta", "mu", "lambda_nuc", "lambda_1", "K"};
  return names;
}

std::vector<SweepRow> run_sweep(const Config& cfg, const std::string& parameter, const std::vector<double>& values,
                                const std::filesystem::path& out_dir) {
  bool ok = false;
  for (const auto& p : sweepable_parameters()) ok = ok || p == parameter;
  if (!ok) throw ConfigError("parameter '" + parameter + "' cannot be swept (choose c, eta, mu, lambda_nuc, lambda_1 or K)");
  if (values.empty()) throw ConfigError("sweep over '" + parameter + "' has no values");
  const std::string base = cfg.text_or("name", cfg.has("task") ? cfg.text("task") : "sweep");
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < values.size(); ++k) {
    Config run = cfg;
    run.set(parameter, format_double(values[k]));
    std::ostringstream name;
    name << '"' << base << '_' << parameter << '_' << k << '"';
    run.set("name", name.str());
    rows.push_back({values[k], run_scenario(run, out_dir)});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "value,iters_to_tol,final_error,converged\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    out << format_double(r.value) << ',';
    if (s.iterations_to_tolerance) out << *s.iterations_to_tolerance;
    out << ',' << format_double(s.distance_to_oracle) << ',' << (s.iterations_to_tolerance ? 1 : 0) << '\n';
  }
}

// ---- rate ----

RatePrediction rate_predict(const Config& cfg) {
  auto sc = quadratic_scenario(cfg);
  RatePrediction pred;
  pred.regularity = quadratic_regularity(sc->cptrs);
  pred.algebra = compute_algebra(sc->graph);
  pred.optimal = optimal_c_delta(pred.regularity, pred.algebra);
  pred.penalty = rate_penalty(cfg, pred.optimal);
  auto cert = certify_rate(sc->cptrs, sc->graph, pred.penalty);
  if (!cert) throw DataError("costs are not strongly convex with Lipschitz gradients");
  pred.delta = cert->delta;
  const PrimalDualPoint ref = reference_point(sc->graph, sc->cptrs, sc->oracle);
  const PrimalDualPoint zero{Vector::Zero(ref.s.size()), Vector::Zero(ref.vbar.size())};
  pred.initial_distance = std::sqrt(hnorm_squared(pred.algebra, pred.penalty, zero, ref));
  pred.predicted_iterations =
      predicted_iterations(pred.delta, cfg.number_or("tolerance", 1e-8), pred.initial_distance);
  return pred;
}

HNormReport rate_verify(const Config& cfg, const std::optional<std::vector<Snapshot>>& snapshots) {
  auto sc = quadratic_scenario(cfg);
  const GraphAlgebra algebra = compute_algebra(sc->graph);
  const OptimalPenalty opt = optimal_c_delta(quadratic_regularity(sc->cptrs), algebra);
  const double c = rate_penalty(cfg, opt);
  RunTrace trace;
  if (snapshots) {
    trace.penalty = c;
    trace.snapshots = *snapshots;
    const auto p = static_cast<Eigen::Index>(sc->oracle.size());
    for (const auto& s : trace.snapshots) {
      if (s.estimates.rows() != p || s.estimates.cols() != static_cast<Eigen::Index>(sc->graph.node_count()) ||
          s.edge_multipliers.cols() != static_cast<Eigen::Index>(sc->graph.directed_edge_count())) {
        throw DataError("snapshots do not match the configured scenario");
      }
    }
  } else {
    RunOptions ro;
    ro.penalty = c;
    ro.iterations = cfg.count_or("iters", 200);
    ro.track_edge_multipliers = true;
    ro.keep_snapshots = true;
    trace = admm_run(sc->graph, sc->ptrs, ro);
  }
  auto cert = certify_rate(sc->cptrs, sc->graph, c);
  return hnorm_verify(trace, algebra, reference_point(sc->graph, sc->cptrs, sc->oracle),
                      cert ? std::optional<double>(cert->delta) : std::nullopt);
}

void write_hnorm_csv(std::ostream& out, const HNormReport& report) {
  out << "k,distance,step,s1,s2,s3,contraction\n";
  for (const auto& r : report.records) {
    out << r.k << ',' << format_double(r.distance) << ',' << format_double(r.step) << ',' << r.s1 << ',' << r.s2
        << ',' << r.s3 << ',' << r.contraction << '\n';
  }
}

}  // namespace dlearn
