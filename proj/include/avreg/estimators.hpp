#pragma once

#include <Eigen/Dense>
#include <string>

#include "avreg/clp.hpp"
#include "avreg/dataset.hpp"
#include "avreg/gps.hpp"
#include "avreg/mom.hpp"

namespace avreg {

// Point estimate of the average conditional slope with influence-function
// standard errors.
struct Estimate {
  Eigen::VectorXd beta;       // K
  Eigen::VectorXd nuisance;   // lambda = (alpha, gamma', delta')', empty for GIPW
  Eigen::MatrixXd cov_beta;   // K x K
  Eigen::VectorXd std_err;    // sqrt of cov_beta diagonal
  Eigen::MatrixXd ci95;       // K x 2, beta -/+ 1.96 std_err
  Eigen::MatrixXd influence;  // N x K per-row contributions, columns mean ~0
  std::string estimator_tag;
  std::string gps_tag;
  std::string basis_tag;
  long n = 0;
};

// Least squares of Y on (1, centered basis, interactions, X); the
// covariance comes from the stacked moment system that includes the basis
// means, so the sampling error in mu_hat is accounted for.
Estimate oaxaca_blinder(const Dataset& data, const ClpBasis& clp);

// Two-step inverse-probability-weighting estimator: linear IV of Y on X
// alone (no constant) with v^-1(X - e) as the instrument. Standard errors
// correct for the estimated propensity-score parameters by default;
// `correct_for_gps = false` gives the conservative uncorrected ones.
Estimate gipw(const Dataset& data, const GpsFit& fit, bool correct_for_gps = true);

// Locally efficient, doubly robust estimator: linear IV of Y on
// (R(mu_hat), X) with (R(mu_hat), v^-1(X - e)) as instruments, covariance
// from the full stacked sandwich over (phi, mu, lambda, beta).
Estimate dr(const Dataset& data, const GpsFit& fit, const ClpBasis& clp);

// Partially-linear variant: identical machinery with the interaction block
// removed from R (clp.include_interactions must be false).
Estimate plm(const Dataset& data, const GpsFit& fit, const ClpBasis& clp);

namespace estimators_detail {

// Stacked moment system shared by the least-squares and doubly robust
// estimators. `analytic_jacobian` is the exact sample derivative of the
// moment vector (the numeric cross-check target). `covariance_jacobian`
// imposes the population identities of the limit Jacobian on the
// instrument-moment rows, so the covariance it produces is the sample
// analog of the limiting influence function (conservative when the
// propensity-score model is misspecified). The two coincide for the
// least-squares variant and asymptotically under correct specification.
struct StackedSystem {
  MomentSystem moments;
  Eigen::MatrixXd analytic_jacobian;
  Eigen::MatrixXd covariance_jacobian;
  Eigen::VectorXd theta_hat;  // (vec(phi), mu, lambda, beta)
  int n_gps_params = 0;
  int n_basis = 0;
  int n_lambda = 0;
  int n_treat = 0;
};

StackedSystem build_stacked_system(const Dataset& data, const GpsFit* fit, const ClpBasis& clp);

}  // namespace estimators_detail

}  // namespace avreg
