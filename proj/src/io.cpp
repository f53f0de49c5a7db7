#include "fedcd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fedcd {
namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& token, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("csv: cannot parse number '" + token + "' at " + where);
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix load_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trimmed(line);
    if (body.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(body);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(parse_double(trimmed(cell),
                                 path + ":" + std::to_string(lineno)));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError("csv: ragged row at " + path + ":" +
                        std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("csv: no data in '" + path + "'");
  Matrix x(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return x;
}

void save_csv_matrix(const std::string& path, const Matrix& x) {
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out << ',';
      out << format_double(x(i, j));
    }
    out << '\n';
  }
}

BinaryDag load_edge_list(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("edge list: cannot open '" + path + "'");
  BinaryDag b = BinaryDag::Zero(d, d);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trimmed(line);
    if (body.empty() || body[0] == '#') continue;
    std::istringstream ss(body);
    long i = -1, j = -1;
    if (!(ss >> i >> j)) {
      throw ConfigError("edge list: malformed line " + std::to_string(lineno) +
                        " in '" + path + "'");
    }
    if (i < 0 || j < 0 || i >= d || j >= d) {
      throw ConfigError("edge list: node index out of range at line " +
                        std::to_string(lineno) + " in '" + path + "'");
    }
    b(i, j) = 1;
  }
  return b;
}

void save_edge_list(const std::string& path, const BinaryDag& b) {
  std::ofstream out(path);
  if (!out) throw ConfigError("edge list: cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (b(i, j) != 0) out << i << ' ' << j << '\n';
}

std::string metrics_csv_header() {
  return "scenario,d,graph,regime,mode,seed,shd,tpr,fdr,nnz,outer_iters,"
         "wall_seconds";
}

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream out;
  out << row.scenario_id << ',' << row.d << ',' << row.graph << ','
      << row.regime << ',' << row.mode << ',' << row.seed << ','
      << format_double(row.shd) << ',' << format_double(row.tpr) << ','
      << format_double(row.fdr) << ',' << format_double(row.nnz) << ','
      << row.outer_iters << ',' << format_double(row.wall_seconds);
  return out.str();
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot write '" + path + "'");
  out << metrics_csv_header() << '\n';
  for (const MetricsRow& row : rows) out << format_metrics_row(row) << '\n';
}

std::vector<SummaryStat> summarize_metrics(
    const std::vector<MetricsRow>& rows) {
  const std::vector<std::pair<std::string, double MetricsRow::*>> fields = {
      {"shd", &MetricsRow::shd},
      {"tpr", &MetricsRow::tpr},
      {"fdr", &MetricsRow::fdr},
      {"nnz", &MetricsRow::nnz},
      {"wall_seconds", &MetricsRow::wall_seconds},
  };
  std::vector<SummaryStat> stats;
  if (rows.empty()) return stats;
  const double n = static_cast<double>(rows.size());
  for (const auto& [name, member] : fields) {
    double mean = 0.0;
    for (const MetricsRow& r : rows) mean += r.*member;
    mean /= n;
    double ss = 0.0;
    for (const MetricsRow& r : rows) {
      const double dlt = r.*member - mean;
      ss += dlt * dlt;
    }
    const double var = rows.size() > 1 ? ss / (n - 1.0) : 0.0;
    stats.push_back({name, mean, std::sqrt(var)});
  }
  return stats;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryStat>& stats) {
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot write '" + path + "'");
  out << "metric,mean,std\n";
  for (const SummaryStat& s : stats) {
    out << s.metric << ',' << format_double(s.mean) << ','
        << format_double(s.stddev) << '\n';
  }
}

}  // namespace fedcd
