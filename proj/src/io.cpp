#include "avreg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "avreg/errors.hpp"

#include <json.hpp>

namespace avreg {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, long row, const std::string& column) {
  const std::string cell = strip(raw);
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw NonNumericCell("non-numeric cell '" + cell + "' at data row " + std::to_string(row) +
                         ", column " + column);
  return value;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw MissingColumn(name);
  return static_cast<int>(it - header.begin());
}

}  // namespace

Dataset load_csv(std::istream& in, const ColumnRoles& roles) {
  if (roles.outcome.empty()) throw ConfigError("no outcome column configured");
  if (roles.treatments.empty()) throw ConfigError("no treatment columns configured");
  std::set<std::string> seen;
  seen.insert(roles.outcome);
  for (const auto& list : {roles.treatments, roles.controls})
    for (const std::string& name : list)
      if (!seen.insert(name).second)
        throw ConfigError("outcome/treatment/control column sets must be disjoint: " + name);

  std::string line;
  if (!std::getline(in, line)) throw EmptyData("file has no header row");
  std::vector<std::string> header = split_line(line);
  for (std::string& h : header) h = strip(h);

  const int y_col = find_column(header, roles.outcome);
  std::vector<int> x_cols, w_cols;
  for (const std::string& name : roles.treatments) x_cols.push_back(find_column(header, name));
  for (const std::string& name : roles.controls) w_cols.push_back(find_column(header, name));

  std::vector<std::vector<double>> rows;
  long row_index = 0;
  while (std::getline(in, line)) {
    if (strip(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError("row " + std::to_string(row_index) + " has " +
                       std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    std::vector<double> parsed(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      parsed[c] = parse_cell(cells[c], row_index, header[c]);
    rows.push_back(std::move(parsed));
    ++row_index;
  }
  if (rows.empty()) throw EmptyData("file has a header but no data rows");

  Dataset data;
  const long n = static_cast<long>(rows.size());
  data.y.resize(n);
  data.x.resize(n, static_cast<long>(x_cols.size()));
  data.w.resize(n, static_cast<long>(w_cols.size()));
  for (long i = 0; i < n; ++i) {
    data.y[i] = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(y_col)];
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      data.x(i, static_cast<long>(j)) =
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(x_cols[j])];
    for (std::size_t j = 0; j < w_cols.size(); ++j)
      data.w(i, static_cast<long>(j)) =
          rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(w_cols[j])];
  }
  data.x_names = roles.treatments;
  data.w_names = roles.controls;
  return data;
}

Dataset load_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path);
  if (!in) throw DataError("file_open", "cannot open " + path);
  return load_csv(in, roles);
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_table(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "y";
  for (const std::string& name : data.x_names) out << "," << name;
  for (const std::string& name : data.w_names) out << "," << name;
  out << "\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out << format_full(data.y[i]);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) out << "," << format_full(data.x(i, j));
    for (Eigen::Index j = 0; j < data.w.cols(); ++j) out << "," << format_full(data.w(i, j));
    out << "\n";
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("file_open", "cannot open " + path + " for writing");
  write_dataset_csv(out, data);
}

void write_estimates_csv(std::ostream& out, const std::vector<Estimate>& estimates,
                         const std::vector<std::string>& treatment_names) {
  out << "estimator,treatment,beta,stderr,ci_low,ci_high,n,gps,basis\n";
  for (const Estimate& est : estimates)
    for (Eigen::Index k = 0; k < est.beta.size(); ++k)
      out << est.estimator_tag << "," << treatment_names[static_cast<std::size_t>(k)] << ","
          << format_table(est.beta[k]) << "," << format_table(est.std_err[k]) << ","
          << format_table(est.ci95(k, 0)) << "," << format_table(est.ci95(k, 1)) << "," << est.n
          << "," << est.gps_tag << "," << est.basis_tag << "\n";
}

void write_estimates_json(std::ostream& out, const std::vector<Estimate>& estimates,
                          const std::vector<std::string>& treatment_names) {
  nlohmann::json records = nlohmann::json::array();
  for (const Estimate& est : estimates) {
    nlohmann::json rec;
    rec["estimator"] = est.estimator_tag;
    rec["gps"] = est.gps_tag;
    rec["basis"] = est.basis_tag;
    rec["n"] = est.n;
    rec["treatments"] = treatment_names;
    rec["beta"] = std::vector<double>(est.beta.begin(), est.beta.end());
    rec["stderr"] = std::vector<double>(est.std_err.begin(), est.std_err.end());
    nlohmann::json ci = nlohmann::json::array();
    for (Eigen::Index k = 0; k < est.beta.size(); ++k)
      ci.push_back({est.ci95(k, 0), est.ci95(k, 1)});
    rec["ci95"] = ci;
    rec["nuisance"] = std::vector<double>(est.nuisance.begin(), est.nuisance.end());
    records.push_back(rec);
  }
  out << nlohmann::json{{"records", records}}.dump(2) << "\n";
}

void write_study_csv(std::ostream& out, const StudySummary& summary) {
  out << "design,estimator,N,B,median_bias,sd,median_se,coverage,fail_rate\n";
  for (const StudyRow& row : summary.rows)
    out << summary.design_id << "," << row.estimator << "," << summary.n << "," << summary.reps
        << "," << format_table(row.median_bias) << "," << format_table(row.sd) << ","
        << format_table(row.median_se) << "," << format_table(row.coverage95) << ","
        << format_table(summary.fail_rate) << "\n";
}

void write_study_markdown(std::ostream& out, const StudySummary& summary) {
  out << "| Design " << summary.design_id << ", N=" << summary.n << " | Bias | Std. Dev. |"
      << " Std. Err. | Coverage |\n";
  out << "|---|---|---|---|---|\n";
  for (const StudyRow& row : summary.rows)
    out << "| " << row.estimator << " | " << format_table(row.median_bias) << " | "
        << format_table(row.sd) << " | " << format_table(row.median_se) << " | "
        << format_table(row.coverage95) << " |\n";
}

void write_seb_csv(std::ostream& out, const SebResult& result, int design_id) {
  out << "design,n_draws,omega_term,var_b_term,bound_inv,se_n1000\n";
  out << design_id << "," << result.n_draws << "," << format_table(result.omega_term(0, 0))
      << "," << format_table(result.var_b_term(0, 0)) << ","
      << format_table(result.bound_inv(0, 0)) << ","
      << format_table(std::sqrt(result.bound_inv(0, 0) / 1000.0)) << "\n";
}

}  // namespace avreg
