#pragma once

#include <Eigen/Dense>
#include <functional>

namespace avreg {

// Just-identified method-of-moments system. The per-observation moment map
// is deterministic in (row, theta); data enters through the closure.
struct MomentSystem {
  int dim_theta = 0;
  int dim_moments = 0;
  int n_rows = 0;
  // Fills m (dim_moments) with the moment vector of one observation.
  std::function<void(int row, const Eigen::VectorXd& theta, Eigen::Ref<Eigen::VectorXd> m)> moment_fn;
};

// Sample mean of the per-observation moments at theta.
Eigen::VectorXd mean_moments(const MomentSystem& system, const Eigen::VectorXd& theta);

// Solves (1/N) sum_i Q_i (y_i - D_i' theta) = 0 for theta. Throws
// SingularSystem when the cross-moment matrix (1/N) sum Q_i D_i' has
// condition number above 1e12.
Eigen::VectorXd solve_linear_iv(const Eigen::MatrixXd& instruments,
                                const Eigen::MatrixXd& regressors,
                                const Eigen::VectorXd& outcome);

// Sample-average central-difference Jacobian of the moment vector,
// step h_j = max(1e-6, 1e-6 |theta_j|).
Eigen::MatrixXd numeric_jacobian(const MomentSystem& system, const Eigen::VectorXd& theta);

struct SandwichCov {
  Eigen::MatrixXd jacobian;  // sample mean of dm/dtheta'
  Eigen::MatrixXd meat;      // sample mean of m m' (moments are mean zero at theta_hat)
  Eigen::MatrixXd cov;       // J^-1 meat J^-T / N
};

// Standard just-identified sandwich covariance. The caller supplies the
// Jacobian (analytic or numeric); throws SingularSystem if it is not
// invertible at the 1e12 condition guard.
SandwichCov sandwich(const MomentSystem& system, const Eigen::VectorXd& theta_hat,
                     const Eigen::MatrixXd& jacobian);

// Per-row asymptotically linear contributions psi_i' = -(J^-1 m_i)', one row
// per observation, so that cov(theta_hat) = (1/N^2) sum psi_i psi_i'.
Eigen::MatrixXd influence_rows(const MomentSystem& system, const Eigen::VectorXd& theta_hat,
                               const Eigen::MatrixXd& jacobian);

// Solve A x = b behind the shared condition-number guard.
Eigen::MatrixXd guarded_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const char* context);

}  // namespace avreg
