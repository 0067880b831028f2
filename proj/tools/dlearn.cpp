// Command-line driver: scenario runs, sweeps, rate analysis, anomaly and learner front ends.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlearn/anomaly.hpp"
#include "dlearn/io.hpp"
#include "dlearn/scenario.hpp"

namespace fs = std::filesystem;
using namespace dlearn;

namespace {

constexpr int exit_scenario = 1;
constexpr int exit_config = 2;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string graph_file;
  std::string rgg;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool positional_config) {
  if (positional_config) {
    cmd->add_option("config", f.config, "scenario file")->required();
  } else {
    cmd->add_option("--config", f.config, "scenario file")->required();
  }
  cmd->add_option("--out", f.out, "output directory (default $DLEARN_OUT, then ./out)");
  cmd->add_option("--seed", f.seed, "overrides the config seed");
  cmd->add_option("--graph", f.graph_file, "edge-list file with header n=<count>");
  cmd->add_option("--rgg", f.rgg, "random geometric graph as n,radius,seed");
  cmd->add_option("--set", f.overrides, "key=value override, repeatable");
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DLEARN_OUT"); env && *env) return env;
  return "out";
}

Config load_config(const CommonFlags& f) {
  Config cfg = Config::load(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (!f.graph_file.empty() && !f.rgg.empty()) throw ConfigError("--graph and --rgg are exclusive");
  if (!f.graph_file.empty()) {
    cfg.set("graph.kind", "\"file\"");
    nlohmann::json quoted = f.graph_file;
    cfg.set("graph.file", quoted.dump());
  }
  if (!f.rgg.empty()) {
    std::stringstream ss(f.rgg);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ',')) parts.push_back(part);
    if (parts.size() != 3) throw ConfigError("--rgg expects n,radius,seed");
    cfg.set("graph.kind", "\"rgg\"");
    cfg.set("graph.n", parts[0]);
    cfg.set("graph.radius", parts[1]);
    cfg.set("graph.seed", parts[2]);
  }
  return cfg;
}

void report(const ScenarioSummary& s, const fs::path& out) {
  append_summary(out / "summary.jsonl", s);
  std::cout << summary_json(s) << '\n';
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(parse_double(item));
    } catch (const DataError&) {
      throw ConfigError("sweep value '" + item + "' is not a number");
    }
  }
  return out;
}

template <typename T>
T read_path(const std::string& path, T (*reader)(std::istream&)) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return reader(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_path(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  body(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized in-network learning by consensus ADMM"};
  app.require_subcommand(1);

  CommonFlags run_f, sweep_f, predict_f, verify_f, synth_f, svm_f, kmeans_f;

  auto* run = app.add_subcommand("run", "run one scenario");
  add_common(run, run_f, true);

  std::string sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "one run per parameter value");
  add_common(sweep, sweep_f, true);
  sweep->add_option("--param", sweep_param, "c, eta, mu, lambda_nuc, lambda_1 or K");
  sweep->add_option("--values", sweep_values, "comma-separated values (default sweep.values from the config)");

  auto* rate = app.add_subcommand("rate", "contraction analysis on a quadratic scenario");
  rate->require_subcommand(1);
  auto* predict = rate->add_subcommand("predict", "c*, delta* and predicted iterations");
  add_common(predict, predict_f, false);
  std::string snapshots_file;
  auto* verify = rate->add_subcommand("verify", "check the H-norm inequalities along a run");
  add_common(verify, verify_f, false);
  verify->add_option("--trace", snapshots_file, "snapshot CSV from a previous run (default: rerun)");

  auto* anomaly = app.add_subcommand("anomaly", "traffic anomaly tools");
  anomaly->require_subcommand(1);
  auto* synth = anomaly->add_subcommand("synth", "write a synthetic instance");
  add_common(synth, synth_f, false);

  struct {
    std::string loads, routing, routers, out, solver = "centralized";
    double lambda_nuc = 0.0, lambda_1 = 0.0, c = 1.0;
    std::size_t rank = 4, iters = 2000;
  } solve_f;
  auto* solve = anomaly->add_subcommand("solve", "estimate low-rank traffic and anomalies");
  solve->add_option("--loads", solve_f.loads, "link loads CSV, blank = missing")->required();
  solve->add_option("--routing", solve_f.routing, "0/1 routing CSV")->required();
  solve->add_option("--routers", solve_f.routers, "router edge-list file")->required();
  solve->add_option("--lambda-nuc", solve_f.lambda_nuc)->required();
  solve->add_option("--lambda-1", solve_f.lambda_1)->required();
  solve->add_option("--solver", solve_f.solver)->check(CLI::IsMember({"centralized", "decentralized"}));
  solve->add_option("--c", solve_f.c, "ADMM penalty for the decentralized solver");
  solve->add_option("--rank", solve_f.rank);
  solve->add_option("--iters", solve_f.iters);
  solve->add_option("--out", solve_f.out);

  std::string roc_estimate, roc_truth, roc_out;
  auto* roc = anomaly->add_subcommand("roc", "ROC of an anomaly map against the truth");
  roc->add_option("--estimate", roc_estimate)->required();
  roc->add_option("--truth", roc_truth)->required();
  roc->add_option("--out", roc_out, "CSV path (default stdout)");

  auto* learn = app.add_subcommand("learn", "supervised and unsupervised learners");
  learn->require_subcommand(1);
  add_common(learn->add_subcommand("svm", "decentralized linear SVM"), svm_f, false);
  add_common(learn->add_subcommand("kmeans", "decentralized hard K-means"), kmeans_f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (*run) {
      Config cfg = load_config(run_f);
      const fs::path out = output_dir(run_f.out);
      report(run_scenario(cfg, out), out);
    } else if (*sweep) {
      Config cfg = load_config(sweep_f);
      const fs::path out = output_dir(sweep_f.out);
      std::string param = sweep_param.empty() ? cfg.text_or("sweep.parameter", "") : sweep_param;
      if (param.empty()) throw ConfigError("no sweep parameter: pass --param or set sweep.parameter");
      std::vector<double> values =
          sweep->count("--values") ? parse_values(sweep_values) : cfg.numbers("sweep.values");
      auto rows = run_sweep(cfg, param, values, out);
      for (const auto& r : rows) append_summary(out / "summary.jsonl", r.summary);
      const fs::path table = out / (cfg.text_or("name", cfg.text("task")) + ".sweep_" + param + ".csv");
      write_path(table, [&](std::ostream& o) { write_sweep_csv(o, rows); });
      write_sweep_csv(std::cout, rows);
    } else if (*predict) {
      Config cfg = load_config(predict_f);
      const RatePrediction p = rate_predict(cfg);
      nlohmann::ordered_json j;
      j["m_f"] = p.regularity.strong_convexity;
      j["M_f"] = p.regularity.lipschitz;
      j["gamma_o"] = p.algebra.gamma_o;
      j["Gamma_u"] = p.algebra.Gamma_u;
      j["c_star"] = p.optimal.c_star;
      j["delta_star"] = p.optimal.delta_star;
      j["c"] = p.penalty;
      j["delta"] = p.delta;
      j["initial_distance"] = p.initial_distance;
      j["predicted_iterations"] = p.predicted_iterations;
      std::cout << j.dump() << '\n';
    } else if (*verify) {
      Config cfg = load_config(verify_f);
      std::optional<std::vector<Snapshot>> snaps;
      if (!snapshots_file.empty()) snaps = read_path(snapshots_file, &read_snapshots_csv);
      const HNormReport rep = rate_verify(cfg, snaps);
      const fs::path out = output_dir(verify_f.out);
      fs::create_directories(out);
      const fs::path file = out / (cfg.text_or("name", "rate") + ".hnorm.csv");
      write_path(file, [&](std::ostream& o) { write_hnorm_csv(o, rep); });
      if (rep.passed()) {
        std::cout << "PASS " << rep.records.size() << " steps, worst ratio " << rep.worst_ratio << "; " << file.string()
                  << '\n';
        return 0;
      }
      std::cout << "FAIL at k=" << *rep.first_violation << ": " << rep.violation << "; " << file.string() << '\n';
      return exit_scenario;
    } else if (*synth) {
      Config cfg = load_config(synth_f);
      SynthOptions so;
      so.routers = cfg.count_or("synth.routers", so.routers);
      so.router_edges = cfg.count_or("synth.edges", so.router_edges);
      so.horizon = cfg.count_or("synth.horizon", so.horizon);
      so.rank = cfg.count_or("synth.rank", so.rank);
      so.anomaly_density = cfg.number_or("synth.density", so.anomaly_density);
      so.anomaly_amplitude = cfg.number_or("synth.amplitude", so.anomaly_amplitude);
      so.noise_sigma = cfg.number_or("synth.sigma", so.noise_sigma);
      so.missing_fraction = cfg.number_or("synth.missing", so.missing_fraction);
      so.seed = cfg.count_or("seed", 0);
      const TrafficInstance inst = synth_traffic(so);
      const fs::path out = output_dir(synth_f.out);
      fs::create_directories(out);
      write_path(out / "loads.csv", [&](std::ostream& o) { write_loads_csv(o, inst); });
      write_path(out / "routing.csv", [&](std::ostream& o) { write_routing_csv(o, inst.R); });
      write_path(out / "routers.txt", [&](std::ostream& o) { write_edge_list(o, router_graph(inst)); });
      write_path(out / "anomalies_true.csv", [&](std::ostream& o) { write_matrix_csv(o, inst.A_true); });
      std::cout << "wrote " << inst.links() << " links x " << inst.horizon() << " steps, " << inst.flows()
                << " flows to " << out.string() << '\n';
    } else if (*solve) {
      Matrix Y, mask;
      {
        std::ifstream in(solve_f.loads);
        if (!in) throw DataError("cannot open " + solve_f.loads);
        read_loads_csv(in, Y, mask);
      }
      Matrix R = read_path(solve_f.routing, &read_routing_csv);
      NetworkGraph routers = read_path(solve_f.routers, &read_edge_list);
      TrafficInstance inst = assemble_instance(Y, mask, R, routers);
      AnomalySolution sol;
      if (solve_f.solver == "centralized") {
        sol = solve_centralized(inst, solve_f.lambda_nuc, solve_f.lambda_1);
      } else {
        DecentralizedOptions d;
        d.penalty = solve_f.c;
        d.rank = solve_f.rank;
        d.iterations = solve_f.iters;
        sol = solve_factorized_decentralized(inst, solve_f.lambda_nuc, solve_f.lambda_1, d).consensus;
        const Certificate cert = optimality_certificate(inst, sol, solve_f.lambda_nuc);
        std::cout << "certificate " << (cert.holds ? "holds" : "does not hold") << " (residual " << cert.residual_norm
                  << ", threshold " << cert.threshold << ")\n";
      }
      const fs::path out = output_dir(solve_f.out);
      fs::create_directories(out);
      write_path(out / "anomalies.csv", [&](std::ostream& o) { write_matrix_csv(o, sol.A); });
      write_path(out / "low_rank.csv", [&](std::ostream& o) { write_matrix_csv(o, sol.X); });
      std::cout << "objective " << convex_objective(inst, sol.X, sol.A, solve_f.lambda_nuc, solve_f.lambda_1) << '\n';
    } else if (*roc) {
      const Matrix est = read_path(roc_estimate, &read_matrix_csv);
      const Matrix truth = read_path(roc_truth, &read_matrix_csv);
      if (est.rows() != truth.rows() || est.cols() != truth.cols()) throw DataError("estimate and truth differ in shape");
      auto curve = roc_curve(est, truth, roc_thresholds(est));
      if (roc_out.empty()) {
        write_roc_csv(std::cout, curve);
      } else {
        write_path(roc_out, [&](std::ostream& o) { write_roc_csv(o, curve); });
      }
      std::cerr << "auc " << roc_auc(curve) << '\n';
    } else if (learn->got_subcommand("svm") || learn->got_subcommand("kmeans")) {
      const bool is_svm = learn->got_subcommand("svm");
      CommonFlags& f = is_svm ? svm_f : kmeans_f;
      Config cfg = load_config(f);
      cfg.set("task", is_svm ? "\"svm\"" : "\"kmeans\"");
      const fs::path out = output_dir(f.out);
      report(run_scenario(cfg, out), out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_scenario;
  }
  return 0;
}
