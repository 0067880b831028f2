#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dlearn/config.hpp"
#include "dlearn/costs.hpp"
#include "dlearn/estimators.hpp"
#include "dlearn/learners.hpp"
#include "dlearn/rate.hpp"

namespace dlearn {

// ---- seeded problem generators shared by the driver and the acceptance suite ----

/// f_i(s) = 0.5 (s - m_i)'Q_i(s - m_i) with Hessian spectra inside [lo, hi];
/// node 0 attains lo and node n-1 attains hi exactly.
std::vector<QuadraticCost> random_quadratic_costs(std::size_t n, std::size_t p, double lo, double hi,
                                                  std::uint64_t seed);
/// Gaussian regressors, diagonal noise covariances in [0.5, 2].
std::vector<BlueLocalData> synth_blue(std::size_t n, std::size_t p, std::size_t m, std::uint64_t seed);
/// Sparse ground truth with `support` nonzeros, Gaussian rows, noise 0.01.
std::vector<LassoLocalData> synth_lasso(std::size_t n, std::size_t p, std::size_t m, std::size_t support,
                                        std::uint64_t seed);
/// Two Gaussian classes centred at +-(1, ..., 1) with unit spread.
std::vector<SvmLocalData> synth_svm(std::size_t n, std::size_t p, std::size_t m, double C, std::uint64_t seed);
/// K Gaussian clusters (spread 0.5) with centres 4 apart along the axes.
std::vector<Matrix> synth_clusters(std::size_t n, std::size_t per_node, std::size_t K, std::size_t p,
                                   std::uint64_t seed);

/// Builds the graph named by the config keys graph.kind (complete, ring, path,
/// rgg, file), graph.n, graph.radius, graph.seed and graph.file.
NetworkGraph graph_from_config(const Config& config);

// ---- scenario driver ----

/// Figures a summary derives from a trace. `threshold` is the absolute
/// dist_to_ref level that counts as reaching the tolerance.
struct TraceStatistics {
  std::size_t iterations = 0;
  double final_consensus_error = 0.0;
  double distance_to_oracle = 0.0;
  std::optional<std::size_t> iterations_to_tolerance;
};
TraceStatistics trace_statistics(const std::vector<TraceRecord>& records, double threshold);

struct ScenarioSummary {
  std::string task;
  std::string name;
  std::uint64_t seed = 0;
  double penalty = 0.0;
  std::size_t iterations = 0;
  double final_consensus_error = 0.0;
  double distance_to_oracle = 0.0;
  std::optional<std::size_t> iterations_to_tolerance;
  double wall_seconds = 0.0;
  /// dist_to_ref level used for iterations_to_tolerance.
  double threshold = 0.0;
  /// Task-specific figures, in insertion order.
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::filesystem::path> files;

  double metric(const std::string& key) const;
};

/// Runs the scenario described by `config`, writing its artifacts under
/// `out_dir` (created if needed). ConfigError for bad or missing keys; module
/// errors propagate unchanged.
ScenarioSummary run_scenario(const Config& config, const std::filesystem::path& out_dir);

/// One JSON object, no trailing newline.
std::string summary_json(const ScenarioSummary& summary);
/// Appends summary_json plus a newline to `path`.
void append_summary(const std::filesystem::path& path, const ScenarioSummary& summary);

struct SweepRow {
  double value = 0.0;
  ScenarioSummary summary;
};

/// Parameters a sweep may vary.
const std::vector<std::string>& sweepable_parameters();

/// One run per value with `parameter` overridden. ConfigError for an empty
/// value list or a parameter that cannot be swept.
std::vector<SweepRow> run_sweep(const Config& config, const std::string& parameter,
                                const std::vector<double>& values, const std::filesystem::path& out_dir);
/// "value,iters_to_tol,final_error,converged"; iters_to_tol is empty when the
/// run never reached the tolerance.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// ---- rate analysis on a configured quadratic scenario ----

struct RatePrediction {
  CostRegularity regularity;
  GraphAlgebra algebra;
  OptimalPenalty optimal;
  double penalty = 0.0;  // c used for delta
  double delta = 0.0;    // certified at `penalty`
  double initial_distance = 0.0;
  std::size_t predicted_iterations = 0;
};

RatePrediction rate_predict(const Config& config);

/// Re-runs the configured scenario with snapshots (or uses `snapshots`) and
/// checks the H-norm inequalities against the fixed point.
HNormReport rate_verify(const Config& config, const std::optional<std::vector<Snapshot>>& snapshots);
/// "k,distance,step,s1,s2,s3,contraction" with 0/1 flags.
void write_hnorm_csv(std::ostream& out, const HNormReport& report);

}  // namespace dlearn
