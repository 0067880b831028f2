#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dlearn/adaptive.hpp"
#include "dlearn/admm.hpp"
#include "dlearn/anomaly.hpp"

namespace dlearn {

/// Shortest text that reads back to the same double ("%.17g"; nan, inf, -inf).
std::string format_double(double x);
/// Inverse of format_double. DataError on anything else.
double parse_double(const std::string& text);

/// Header "iter,consensus_err,objective,dist_to_ref"; dist_to_ref is nan
/// when the run had no reference.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace_csv(std::istream& in);
/// Whitespace-separated columns with a '#' header, for gnuplot.
void write_trace_dat(std::ostream& out, const std::vector<TraceRecord>& records);

/// Rows "k,kind,index,value_0,...,value_{p-1}" with kind s (node estimate) or
/// v (edge multiplier).
void write_snapshots_csv(std::ostream& out, const std::vector<Snapshot>& snapshots);
std::vector<Snapshot> read_snapshots_csv(std::istream& in);

/// "t,node,emse,msd" with t starting at 1.
void write_metrics_csv(std::ostream& out, const TrackingMetrics& metrics);
/// "t,global_mse".
void write_global_mse_csv(std::ostream& out, const Vector& global_mse);
/// "omega,psd_true,psd_est" on an even grid over [0, pi].
void write_psd_csv(std::ostream& out, const Vector& alpha_true, const Vector& alpha_est,
                   std::size_t grid_points);
/// "tau,pfa,pd".
void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve);

/// Labelled or unlabelled observations spread over nodes:
/// "node_id,x0,...,x{p-1}[,label]".
struct NodeData {
  std::vector<Matrix> features;       // per node, p x m_i
  std::vector<std::vector<double>> labels;  // per node; empty when unlabelled
};
void write_data_csv(std::ostream& out, const NodeData& data);
/// `nodes` fixes the block count; node ids must be below it.
NodeData read_data_csv(std::istream& in, std::size_t nodes, bool labelled);

/// Plain numeric CSV, no header.
void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);

/// Builds an instance from loads, routing and the router topology. DataError
/// when the number of links differs from the number of directed router pairs.
TrafficInstance assemble_instance(Matrix Y, Matrix mask, Matrix R, const NetworkGraph& routers);

}  // namespace dlearn
