#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "avreg/clp.hpp"
#include "avreg/errors.hpp"
#include "avreg/rng.hpp"

using namespace avreg;

namespace {

const std::vector<std::string> kOneControl = {"w"};

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Closed-form bound for the bundled designs: E[Omega0] via the Gaussian
// moment generating function, V(b0(W)) from the normal moments of W.
double closed_form_bound(const Design& d) {
  const double shift = d.gps_truth_basis == TruthBasis::QuadraticW ? d.phi2 : 0.0;
  const double denom = 1.0 + 2.0 * shift;
  const double omega = d.sigma_u * d.sigma_u * std::exp(-d.phi0) *
                       std::exp(d.phi1 * d.phi1 / (2.0 * denom)) / std::sqrt(denom);
  const double var_b = d.delta1 * d.delta1 + 2.0 * d.delta2 * d.delta2;
  return omega + var_b;
}

}  // namespace

TEST_CASE("build_R ordering and interaction block") {
  Dataset data;
  data.y = Eigen::VectorXd::Zero(4);
  data.x = Eigen::MatrixXd::Zero(4, 1);
  data.w = Eigen::MatrixXd::Zero(4, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  data.w << 1, 2, 3, 6;  // sample mean 3

  ClpBasis clp = ClpBasis::from_data(BasisSpec::raw(1), data, true);
  CHECK(clp.mu_hat[0] == doctest::Approx(3.0));

  Eigen::RowVectorXd w_row(1), x_row(1);
  w_row << 5.0;  // centered value 2
  x_row << 3.0;
  const Eigen::VectorXd r = build_R(clp, w_row, x_row);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 2.0);
  CHECK(r[2] == 6.0);

  const ClpBasis plain = ClpBasis::from_data(BasisSpec::raw(1), data, false);
  const Eigen::VectorXd r2 = build_R(plain, w_row, x_row);
  REQUIRE(r2.size() == 2);
  CHECK(r2[0] == 1.0);
  CHECK(r2[1] == 2.0);
}

TEST_CASE("build_R matches an explicit Kronecker expansion") {
  Dataset data;
  data.y = Eigen::VectorXd::Zero(3);
  data.x = Eigen::MatrixXd::Zero(3, 2);
  data.w = Eigen::MatrixXd::Zero(3, 2);
  data.x_names = {"x1", "x2"};
  data.w_names = {"w1", "w2"};
  data.w << 0, 1, 2, 3, 4, 5;

  const ClpBasis clp = ClpBasis::from_data(BasisSpec::raw(2), data, true);
  Eigen::RowVectorXd w_row(2), x_row(2);
  w_row << 3.0, 7.0;
  x_row << 2.0, -1.0;
  const Eigen::VectorXd r = build_R(clp, w_row, x_row);
  REQUIRE(r.size() == 1 + 2 + 4);

  const double c1 = 3.0 - clp.mu_hat[0];
  const double c2 = 7.0 - clp.mu_hat[1];
  Eigen::VectorXd expected(7);
  expected << 1.0, c1, c2, c1 * 2.0, c1 * -1.0, c2 * 2.0, c2 * -1.0;
  CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("centered columns have exact zero sample means") {
  Rng rng(21, 0);
  const long n = 500;
  Dataset data;
  data.y = Eigen::VectorXd::Zero(n);
  data.x = Eigen::MatrixXd::Zero(n, 1);
  data.w.resize(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) data.w(i, 0) = 10.0 + 3.0 * rng.normal();

  const BasisSpec spec = BasisSpec::parse("w,w^2", kOneControl);
  const ClpBasis clp = ClpBasis::from_data(spec, data, true);
  Eigen::MatrixXd centered(n, 2);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd r = build_R(clp, data.w.row(i), data.x.row(i));
    centered.row(i) = r.segment(1, 2).transpose();
  }
  const Eigen::VectorXd scale = clp.basis.eval(data.w).cwiseAbs().colwise().maxCoeff();
  CHECK(std::abs(centered.col(0).mean()) <= 1e-10 * scale[0]);
  CHECK(std::abs(centered.col(1).mean()) <= 1e-10 * scale[1]);
}

TEST_CASE("clp basis rejects a constant term") {
  Dataset data;
  data.y = Eigen::VectorXd::Zero(2);
  data.x = Eigen::MatrixXd::Zero(2, 1);
  data.w = Eigen::MatrixXd::Zero(2, 1);
  data.w_names = {"w"};
  CHECK_THROWS_AS(ClpBasis::from_data(BasisSpec::parse("1,w", kOneControl), data, true),
                  ConfigError);
}

TEST_CASE("brute force on a single exact cell") {
  Dataset data;
  const long n = 10;
  data.y.resize(n);
  data.x.resize(n, 1);
  data.w = Eigen::MatrixXd::Zero(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) {
    data.x(i, 0) = static_cast<double>(i % 5);
    data.y[i] = 1.0 + 2.0 * data.x(i, 0);
  }
  const BruteForceClp fit = brute_force_clp(data);
  REQUIRE(fit.cells.size() == 1);
  CHECK(fit.cells[0].intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.cells[0].slope[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.beta[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("brute force averages cell slopes by frequency") {
  Dataset data;
  const long n = 16;  // two equally sized cells
  data.y.resize(n);
  data.x.resize(n, 1);
  data.w.resize(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) {
    const bool second = i >= n / 2;
    data.w(i, 0) = second ? 1.0 : 0.0;
    data.x(i, 0) = static_cast<double>(i % 4);
    const double slope = second ? 3.0 : 1.0;
    data.y[i] = 0.5 + slope * data.x(i, 0);
  }
  const BruteForceClp fit = brute_force_clp(data);
  REQUIRE(fit.cells.size() == 2);
  CHECK(fit.beta[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("brute force equals the group-means contrast for a binary treatment") {
  Rng rng(22, 0);
  const long n = 900;
  Dataset data;
  data.y.resize(n);
  data.x.resize(n, 1);
  data.w.resize(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) {
    const double w = static_cast<double>(i % 3);
    const double e = 0.3 + 0.15 * w;
    const double x = rng.uniform() < e ? 1.0 : 0.0;
    data.w(i, 0) = w;
    data.x(i, 0) = x;
    data.y[i] = w + (1.0 + 0.5 * w) * x + 0.3 * rng.normal();
  }
  const BruteForceClp fit = brute_force_clp(data);

  // Oracle: frequency-weighted difference of within-cell group means.
  double oracle = 0.0;
  for (int cell = 0; cell < 3; ++cell) {
    double sum1 = 0.0, sum0 = 0.0;
    long n1 = 0, n0 = 0, total = 0;
    for (long i = 0; i < n; ++i) {
      if (data.w(i, 0) != cell) continue;
      ++total;
      if (data.x(i, 0) == 1.0) {
        sum1 += data.y[i];
        ++n1;
      } else {
        sum0 += data.y[i];
        ++n0;
      }
    }
    oracle += (static_cast<double>(total) / n) * (sum1 / n1 - sum0 / n0);
  }
  CHECK(fit.beta[0] == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("brute force recovers exact working-model coefficients without noise") {
  // Discrete controls, outcome generated exactly from the linear CLP model.
  Dataset data;
  const long n = 24;
  data.y.resize(n);
  data.x.resize(n, 1);
  data.w.resize(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) {
    data.w(i, 0) = static_cast<double>(i % 4);
    data.x(i, 0) = static_cast<double>((i / 4) % 3);
  }
  const double mu = data.w.col(0).mean();
  const double alpha0 = 0.7, gamma0 = -0.4, beta0 = 2.1, delta0 = 0.9;
  for (long i = 0; i < n; ++i) {
    const double c = data.w(i, 0) - mu;
    data.y[i] = alpha0 + gamma0 * c + (beta0 + delta0 * c) * data.x(i, 0);
  }
  const BruteForceClp fit = brute_force_clp(data);
  CHECK(std::abs(fit.beta[0] - beta0) < 1e-10);
  for (const ClpCell& cell : fit.cells) {
    const double c = cell.w[0] - mu;
    CHECK(std::abs(cell.intercept - (alpha0 + gamma0 * c)) < 1e-10);
    CHECK(std::abs(cell.slope[0] - (beta0 + delta0 * c)) < 1e-10);
  }
}

TEST_CASE("brute force rejects cells that cannot support a fit") {
  Dataset data;
  data.y.resize(3);
  data.x.resize(3, 1);
  data.w.resize(3, 1);
  data.w << 0, 0, 1;  // second cell has one row
  data.x << 0, 1, 1;
  data.y << 0, 1, 1;
  CHECK_THROWS_AS(brute_force_clp(data), CellTooSmall);

  Dataset flat;
  flat.y.resize(4);
  flat.x.resize(4, 1);
  flat.w = Eigen::MatrixXd::Zero(4, 1);
  flat.x.col(0) << 2, 2, 2, 2;  // no treatment variation
  flat.y << 1, 2, 3, 4;
  CHECK_THROWS_AS(brute_force_clp(flat), CellTooSmall);
}

TEST_CASE("efficiency bound calibration across the bundled designs") {
  for (int id = 1; id <= 4; ++id) {
    CAPTURE(id);
    const Design d = Design::preset(id);
    const SebResult seb = seb_monte_carlo(d, 2000000, 77);
    // Additivity holds by construction.
    CHECK((seb.bound_inv - seb.omega_term - seb.var_b_term).cwiseAbs().maxCoeff() == 0.0);
    // Monte Carlo agrees with the closed form within 0.5%.
    const double oracle = closed_form_bound(d);
    CHECK(std::abs(seb.bound_inv(0, 0) - oracle) < 0.005 * oracle);
    // Designs are calibrated so sqrt(bound/1000) = 0.05.
    CHECK(std::sqrt(seb.bound_inv(0, 0) / 1000.0) == doctest::Approx(0.05).epsilon(0.01));
  }

  // Design 1 written out: exp(-0.1 + 0.125) + 1.22^2.
  const SebResult seb1 = seb_monte_carlo(Design::preset(1), 2000000, 78);
  const double explicit_oracle = std::exp(-0.1 + 0.125) + 1.22 * 1.22;
  CHECK(std::abs(seb1.bound_inv(0, 0) - explicit_oracle) < 0.005 * explicit_oracle);
}

TEST_CASE("efficiency bound of a degenerate design collapses to 1/c") {
  Design d;
  d.delta1 = 0.0;
  d.delta2 = 0.0;  // constant b0
  d.phi1 = 0.0;
  d.phi2 = 0.0;  // constant treatment variance
  d.phi0 = std::log(2.5);
  const SebResult seb = seb_monte_carlo(d, 500000, 5);
  CHECK(seb.var_b_term(0, 0) == 0.0);
  CHECK(seb.bound_inv(0, 0) == doctest::Approx(1.0 / 2.5).epsilon(1e-9));
}

TEST_CASE("derivative weights on a truncated normal treatment") {
  const double lo = -4.0, hi = 5.0, s = 1.0;
  auto mean_fn = [&](double w) { return 0.3 * w; };
  auto density = [&](double x, double w) {
    const double m = mean_fn(w);
    const double z = norm_cdf((hi - m) / s) - norm_cdf((lo - m) / s);
    return norm_pdf((x - m) / s) / (s * z);
  };
  auto e0 = [&](double w) {
    const double m = mean_fn(w);
    const double a = (lo - m) / s, b = (hi - m) / s;
    const double z = norm_cdf(b) - norm_cdf(a);
    return m + s * (norm_pdf(a) - norm_pdf(b)) / z;
  };

  const int grid_points = 2000;
  Eigen::VectorXd grid(grid_points);
  for (int j = 0; j < grid_points; ++j)
    grid[j] = lo + (hi - lo) * j / (grid_points - 1.0);

  for (const double w : {-1.5, 0.0, 0.8, 2.0}) {
    CAPTURE(w);
    const DerivativeWeights dw = derivative_weights(density, e0, w, grid);

    // Unit conditional mass and the constant-gradient reduction.
    double mass = 0.0;
    for (int j = 0; j + 1 < grid_points; ++j)
      mass += 0.5 *
              (dw.weights[j] * density(grid[j], w) +
               dw.weights[j + 1] * density(grid[j + 1], w)) *
              (grid[j + 1] - grid[j]);
    CHECK(std::abs(mass - 1.0) < 1e-3);
    const double slope = 1.7;
    CHECK(std::abs(mass * slope - slope) < 1e-3 * std::abs(slope));

    // Denominator identity: independent quadrature of E[X(X - e0)|W=w].
    double v0 = 0.0;
    for (int j = 0; j + 1 < grid_points; ++j) {
      const double f0 = grid[j] * (grid[j] - e0(w)) * density(grid[j], w);
      const double f1 = grid[j + 1] * (grid[j + 1] - e0(w)) * density(grid[j + 1], w);
      v0 += 0.5 * (f0 + f1) * (grid[j + 1] - grid[j]);
    }
    CHECK(std::abs(dw.denominator - v0) < 1e-3 * v0);
  }

  auto bad_density = [](double, double) { return -1.0; };
  CHECK_THROWS_AS(derivative_weights(bad_density, e0, 0.0, grid), NegativeDensity);
}
