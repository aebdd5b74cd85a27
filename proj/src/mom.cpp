#include "avreg/mom.hpp"

#include <cmath>
#include <string>

#include "avreg/errors.hpp"

namespace avreg {

namespace {

constexpr double kConditionGuard = 1e12;

void check_finite(const Eigen::VectorXd& m, int row) {
  if (!m.allFinite())
    throw NonFiniteMoment("moment vector non-finite at row " + std::to_string(row));
}

}  // namespace

Eigen::VectorXd mean_moments(const MomentSystem& system, const Eigen::VectorXd& theta) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(system.dim_moments);
  Eigen::VectorXd m(system.dim_moments);
  for (int i = 0; i < system.n_rows; ++i) {
    system.moment_fn(i, theta, m);
    check_finite(m, i);
    acc += m;
  }
  return acc / system.n_rows;
}

Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const char* context) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > 0.0) || smax / smin > kConditionGuard)
    throw SingularSystem(std::string(context) + ": condition number above guard (" +
                         std::to_string(smax / (smin > 0.0 ? smin : 0.0)) + ")");
  return svd.solve(b);
}

Eigen::VectorXd solve_linear_iv(const Eigen::MatrixXd& instruments,
                                const Eigen::MatrixXd& regressors,
                                const Eigen::VectorXd& outcome) {
  if (instruments.rows() != regressors.rows() || instruments.cols() != regressors.cols() ||
      instruments.rows() != outcome.size())
    throw ConfigError("solve_linear_iv: instruments and regressors must have equal shape");
  const double n = static_cast<double>(instruments.rows());
  const Eigen::MatrixXd cross = instruments.transpose() * regressors / n;
  const Eigen::VectorXd rhs = instruments.transpose() * outcome / n;
  return guarded_solve(cross, rhs, "linear IV cross-moment");
}

Eigen::MatrixXd numeric_jacobian(const MomentSystem& system, const Eigen::VectorXd& theta) {
  if (!theta.allFinite()) throw NonFiniteMoment("numeric_jacobian: theta not finite");
  Eigen::MatrixXd jac(system.dim_moments, system.dim_theta);
  Eigen::VectorXd probe = theta;
  for (int j = 0; j < system.dim_theta; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const Eigen::VectorXd up = mean_moments(system, probe);
    probe[j] = theta[j] - h;
    const Eigen::VectorXd down = mean_moments(system, probe);
    probe[j] = theta[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

SandwichCov sandwich(const MomentSystem& system, const Eigen::VectorXd& theta_hat,
                     const Eigen::MatrixXd& jacobian) {
  SandwichCov out;
  out.jacobian = jacobian;
  out.meat = Eigen::MatrixXd::Zero(system.dim_moments, system.dim_moments);
  Eigen::VectorXd m(system.dim_moments);
  for (int i = 0; i < system.n_rows; ++i) {
    system.moment_fn(i, theta_hat, m);
    check_finite(m, i);
    out.meat.noalias() += m * m.transpose();
  }
  out.meat /= system.n_rows;
  const Eigen::MatrixXd jinv_meat = guarded_solve(jacobian, out.meat, "sandwich Jacobian");
  Eigen::MatrixXd cov =
      guarded_solve(jacobian, jinv_meat.transpose(), "sandwich Jacobian").transpose() /
      system.n_rows;
  out.cov = 0.5 * (cov + cov.transpose());
  return out;
}

Eigen::MatrixXd influence_rows(const MomentSystem& system, const Eigen::VectorXd& theta_hat,
                               const Eigen::MatrixXd& jacobian) {
  Eigen::MatrixXd rows(system.n_rows, system.dim_moments);
  Eigen::VectorXd m(system.dim_moments);
  for (int i = 0; i < system.n_rows; ++i) {
    system.moment_fn(i, theta_hat, m);
    rows.row(i) = m.transpose();
  }
  // psi_i = -J^-1 m_i, laid out as rows.
  return -guarded_solve(jacobian, rows.transpose(), "influence Jacobian").transpose();
}

}  // namespace avreg
