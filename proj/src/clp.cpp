#include "avreg/clp.hpp"

#include <cmath>
#include <map>
#include <string>

#include "avreg/errors.hpp"
#include "avreg/mom.hpp"
#include "avreg/rng.hpp"

namespace avreg {

ClpBasis ClpBasis::from_data(const BasisSpec& basis, const Dataset& data,
                             bool include_interactions) {
  if (basis.has_constant())
    throw ConfigError("CLP basis must not contain a constant term; R carries its own");
  ClpBasis out;
  out.basis = basis;
  out.include_interactions = include_interactions;
  out.mu_hat = basis.size() > 0 ? basis.eval(data.w).colwise().mean().transpose()
                                : Eigen::VectorXd(0);
  return out;
}

Eigen::VectorXd build_R_from_terms(const ClpBasis& clp, const Eigen::VectorXd& kw_row,
                                   const Eigen::RowVectorXd& x_row) {
  const int j = clp.j();
  const int k = static_cast<int>(x_row.size());
  Eigen::VectorXd r(clp.r_dim(k));
  r[0] = 1.0;
  r.segment(1, j) = kw_row - clp.mu_hat;
  if (clp.include_interactions)
    for (int a = 0; a < j; ++a)
      r.segment(1 + j + a * k, k) = (kw_row[a] - clp.mu_hat[a]) * x_row.transpose();
  return r;
}

Eigen::VectorXd build_R(const ClpBasis& clp, const Eigen::RowVectorXd& w_row,
                        const Eigen::RowVectorXd& x_row) {
  return build_R_from_terms(clp, clp.basis.eval_row(w_row), x_row);
}

BruteForceClp brute_force_clp(const Dataset& data) {
  const int k = static_cast<int>(data.n_treatments());
  std::map<std::vector<double>, std::vector<int>> cells;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<double> key(data.w.row(i).begin(), data.w.row(i).end());
    cells[key].push_back(static_cast<int>(i));
  }

  BruteForceClp out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  for (const auto& [key, rows] : cells) {
    const long count = static_cast<long>(rows.size());
    if (count < k + 2)
      throw CellTooSmall("control cell with " + std::to_string(count) +
                         " rows; need at least " + std::to_string(k + 2));
    Eigen::MatrixXd design(count, k + 1);
    Eigen::VectorXd y(count);
    for (long r = 0; r < count; ++r) {
      design(r, 0) = 1.0;
      design.row(r).tail(k) = data.x.row(rows[static_cast<std::size_t>(r)]);
      y[r] = data.y[rows[static_cast<std::size_t>(r)]];
    }
    Eigen::VectorXd coef;
    try {
      coef = solve_linear_iv(design, design, y);
    } catch (const SingularSystem&) {
      throw CellTooSmall("singular within-cell design (no treatment variation in cell)");
    }
    ClpCell cell;
    cell.w = data.w.row(rows.front());
    cell.intercept = coef[0];
    cell.slope = coef.tail(k);
    cell.count = count;
    out.cells.push_back(cell);
    beta += (static_cast<double>(count) / data.n()) * cell.slope;
  }
  out.beta = beta;
  return out;
}

SebResult seb_monte_carlo(const Design& design, long n_draws, std::uint64_t seed) {
  Rng rng(seed, 0);
  const double su2 = design.sigma_u * design.sigma_u;
  double sum_omega = 0.0, sum_b = 0.0, sum_bb = 0.0;
  for (long d = 0; d < n_draws; ++d) {
    const double w = rng.normal();
    // X | W is Poisson, so v0(W) equals the conditional mean; the noise is
    // independent of X given W, which collapses Omega0(w) to sigma^2/v0(w).
    sum_omega += su2 / std::exp(design.gps_index(w));
    const double b = design.b0(w);
    sum_b += b;
    sum_bb += b * b;
  }
  const double nd = static_cast<double>(n_draws);
  SebResult out;
  out.omega_term = Eigen::MatrixXd::Constant(1, 1, sum_omega / nd);
  const double mean_b = sum_b / nd;
  out.var_b_term = Eigen::MatrixXd::Constant(1, 1, sum_bb / nd - mean_b * mean_b);
  out.bound_inv = out.omega_term + out.var_b_term;
  out.n_draws = n_draws;
  return out;
}

DerivativeWeights derivative_weights(const std::function<double(double, double)>& cond_density,
                                     const std::function<double(double)>& e0, double w,
                                     const Eigen::VectorXd& grid) {
  const Eigen::Index n = grid.size();
  if (n < 2) throw ConfigError("derivative_weights: grid needs at least 2 points");
  const double mean_x = e0(w);

  Eigen::VectorXd f(n), g(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    f[j] = cond_density(grid[j], w);
    if (!(f[j] > 0.0) || !std::isfinite(f[j]))
      throw NegativeDensity("conditional density must be positive on the grid, got " +
                            std::to_string(f[j]));
    g[j] = (grid[j] - mean_x) * f[j];
  }

  // G(x) = int_x^xbar (t - e0) f(t) dt, accumulated from the upper end.
  Eigen::VectorXd upper_tail(n);
  upper_tail[n - 1] = 0.0;
  for (Eigen::Index j = n - 2; j >= 0; --j)
    upper_tail[j] = upper_tail[j + 1] + 0.5 * (g[j] + g[j + 1]) * (grid[j + 1] - grid[j]);

  double denom = 0.0;
  for (Eigen::Index j = 0; j + 1 < n; ++j)
    denom += 0.5 * (upper_tail[j] + upper_tail[j + 1]) * (grid[j + 1] - grid[j]);
  if (!(denom > 0.0))
    throw NegativeDensity("derivative-weight denominator not positive");

  DerivativeWeights out;
  out.grid = grid;
  out.weights = upper_tail.array() / (f.array() * denom);
  out.denominator = denom;
  return out;
}

}  // namespace avreg
