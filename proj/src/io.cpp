#include "dlearn/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dlearn/errors.hpp"

namespace dlearn {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) cells.push_back(cell);
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

// yields data lines, with a 1-based line number, skipping an optional header
template <typename F>
void for_each_row(std::istream& in, const std::string& header, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (!header.empty()) {
        if (line != header) throw DataError("line 1: expected header '" + header + "'");
        continue;
      }
    }
    f(split(line), lineno);
  }
}

double cell(const std::vector<std::string>& cells, std::size_t k, std::size_t lineno) {
  if (k >= cells.size()) throw DataError("line " + std::to_string(lineno) + ": too few columns");
  try {
    return parse_double(cells[k]);
  } catch (const DataError&) {
    throw DataError("line " + std::to_string(lineno) + ": bad number '" + cells[k] + "'");
  }
}

std::size_t index_cell(const std::vector<std::string>& cells, std::size_t k, std::size_t lineno) {
  const double x = cell(cells, k, lineno);
  if (x < 0.0 || x != std::floor(x)) throw DataError("line " + std::to_string(lineno) + ": bad index");
  return static_cast<std::size_t>(x);
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text.empty()) throw DataError("empty number");
  char* end = nullptr;
  const double x = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) throw DataError("bad number '" + text + "'");
  return x;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << "iter,consensus_err,objective,dist_to_ref\n";
  for (const auto& r : records) {
    out << r.iteration << ',' << format_double(r.consensus_error) << ',' << format_double(r.objective) << ','
        << format_double(r.distance_to_reference) << '\n';
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::vector<TraceRecord> out;
  for_each_row(in, "iter,consensus_err,objective,dist_to_ref", [&](const auto& c, std::size_t ln) {
    if (c.size() != 4) throw DataError("line " + std::to_string(ln) + ": expected 4 columns");
    out.push_back({index_cell(c, 0, ln), cell(c, 1, ln), cell(c, 2, ln), cell(c, 3, ln)});
  });
  return out;
}

void write_trace_dat(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << "# iter consensus_err objective dist_to_ref\n";
  for (const auto& r : records) {
    out << r.iteration << ' ' << format_double(r.consensus_error) << ' ' << format_double(r.objective) << ' '
        << format_double(r.distance_to_reference) << '\n';
  }
}

void write_snapshots_csv(std::ostream& out, const std::vector<Snapshot>& snapshots) {
  for (std::size_t k = 0; k < snapshots.size(); ++k) {
    auto emit = [&](char kind, const Matrix& m) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << k << ',' << kind << ',' << j;
        for (Eigen::Index r = 0; r < m.rows(); ++r) out << ',' << format_double(m(r, j));
        out << '\n';
      }
    };
    emit('s', snapshots[k].estimates);
    emit('v', snapshots[k].edge_multipliers);
  }
}

std::vector<Snapshot> read_snapshots_csv(std::istream& in) {
  struct Row {
    std::size_t k, j;
    char kind;
    Vector values;
  };
  std::vector<Row> rows;
  Eigen::Index p = -1;
  for_each_row(in, "", [&](const auto& c, std::size_t ln) {
    if (c.size() < 4 || (c[1] != "s" && c[1] != "v")) {
      throw DataError("line " + std::to_string(ln) + ": expected k,kind,index,values");
    }
    Row r{index_cell(c, 0, ln), index_cell(c, 2, ln), c[1][0], Vector(static_cast<Eigen::Index>(c.size() - 3))};
    if (p < 0) p = r.values.size();
    if (r.values.size() != p) throw DataError("line " + std::to_string(ln) + ": inconsistent dimension");
    for (Eigen::Index d = 0; d < p; ++d) r.values(d) = cell(c, static_cast<std::size_t>(d) + 3, ln);
    rows.push_back(std::move(r));
  });
  std::size_t K = 0, n = 0, L = 0;
  for (const auto& r : rows) {
    K = std::max(K, r.k + 1);
    if (r.kind == 's') n = std::max(n, r.j + 1);
    else L = std::max(L, r.j + 1);
  }
  std::vector<Snapshot> out(K);
  for (auto& s : out) {
    s.estimates = Matrix::Constant(p, static_cast<Eigen::Index>(n), std::numeric_limits<double>::quiet_NaN());
    s.edge_multipliers = Matrix::Constant(p, static_cast<Eigen::Index>(L), std::numeric_limits<double>::quiet_NaN());
  }
  for (const auto& r : rows) {
    Matrix& m = r.kind == 's' ? out[r.k].estimates : out[r.k].edge_multipliers;
    m.col(static_cast<Eigen::Index>(r.j)) = r.values;
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (out[k].estimates.hasNaN() || out[k].edge_multipliers.hasNaN()) {
      throw DataError("snapshot " + std::to_string(k) + " is incomplete");
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const TrackingMetrics& metrics) {
  out << "t,node,emse,msd\n";
  for (Eigen::Index t = 0; t < metrics.msd.rows(); ++t)
    for (Eigen::Index i = 0; i < metrics.msd.cols(); ++i)
      out << t + 1 << ',' << i << ',' << format_double(metrics.emse(t, i)) << ',' << format_double(metrics.msd(t, i))
          << '\n';
}

void write_global_mse_csv(std::ostream& out, const Vector& global_mse) {
  out << "t,global_mse\n";
  for (Eigen::Index t = 0; t < global_mse.size(); ++t) out << t + 1 << ',' << format_double(global_mse(t)) << '\n';
}

void write_psd_csv(std::ostream& out, const Vector& alpha_true, const Vector& alpha_est, std::size_t grid_points) {
  if (grid_points < 2) throw ParameterError("PSD grid needs at least 2 points");
  out << "omega,psd_true,psd_est\n";
  for (std::size_t k = 0; k < grid_points; ++k) {
    const double w = std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_points - 1);
    out << format_double(w) << ',' << format_double(ar_psd(alpha_true, w)) << ','
        << format_double(ar_psd(alpha_est, w)) << '\n';
  }
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& curve) {
  out << "tau,pfa,pd\n";
  for (const auto& pt : curve)
    out << format_double(pt.threshold) << ',' << format_double(pt.pfa) << ',' << format_double(pt.pd) << '\n';
}

void write_data_csv(std::ostream& out, const NodeData& data) {
  const bool labelled = !data.labels.empty();
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    const Matrix& X = data.features[i];
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      out << i;
      for (Eigen::Index r = 0; r < X.rows(); ++r) out << ',' << format_double(X(r, j));
      if (labelled) out << ',' << format_double(data.labels[i][static_cast<std::size_t>(j)]);
      out << '\n';
    }
  }
}

NodeData read_data_csv(std::istream& in, std::size_t nodes, bool labelled) {
  std::vector<std::vector<Vector>> cols(nodes);
  NodeData data;
  if (labelled) data.labels.assign(nodes, {});
  Eigen::Index p = -1;
  for_each_row(in, "", [&](const auto& c, std::size_t ln) {
    const std::size_t extra = labelled ? 2 : 1;
    if (c.size() <= extra) throw DataError("line " + std::to_string(ln) + ": no features");
    const std::size_t node = index_cell(c, 0, ln);
    if (node >= nodes) throw DataError("line " + std::to_string(ln) + ": node id out of range");
    const auto dim = static_cast<Eigen::Index>(c.size() - extra);
    if (p < 0) p = dim;
    if (dim != p) throw DataError("line " + std::to_string(ln) + ": inconsistent feature count");
    Vector x(dim);
    for (Eigen::Index d = 0; d < dim; ++d) x(d) = cell(c, static_cast<std::size_t>(d) + 1, ln);
    cols[node].push_back(x);
    if (labelled) data.labels[node].push_back(cell(c, c.size() - 1, ln));
  });
  if (p < 0) throw DataError("data file has no rows");
  for (std::size_t i = 0; i < nodes; ++i) {
    Matrix X(p, static_cast<Eigen::Index>(cols[i].size()));
    for (std::size_t j = 0; j < cols[i].size(); ++j) X.col(static_cast<Eigen::Index>(j)) = cols[i][j];
    data.features.push_back(std::move(X));
  }
  return data;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  for_each_row(in, "", [&](const auto& c, std::size_t ln) {
    std::vector<double> row;
    for (std::size_t k = 0; k < c.size(); ++k) row.push_back(cell(c, k, ln));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError("line " + std::to_string(ln) + ": row length differs");
    }
    rows.push_back(std::move(row));
  });
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

TrafficInstance assemble_instance(Matrix Y, Matrix mask, Matrix R, const NetworkGraph& routers) {
  const auto& dir = routers.directed_edges();
  if (static_cast<std::size_t>(Y.rows()) != dir.size()) {
    throw DataError("loads have " + std::to_string(Y.rows()) + " links but the router graph has " +
                    std::to_string(dir.size()) + " directed pairs");
  }
  if (R.rows() != Y.rows()) throw DataError("routing and loads disagree on the number of links");
  if (mask.rows() != Y.rows() || mask.cols() != Y.cols()) throw DataError("mask shape differs from loads");
  TrafficInstance inst;
  inst.Y = std::move(Y);
  inst.mask = std::move(mask);
  inst.R = std::move(R);
  inst.routers = routers.node_count();
  inst.router_edges = routers.edges();
  for (const auto& e : dir) inst.link_owner.push_back(e.source);
  return inst;
}

}  // namespace dlearn
