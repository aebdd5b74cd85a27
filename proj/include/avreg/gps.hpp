#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "avreg/basis.hpp"
#include "avreg/dataset.hpp"

namespace avreg {

enum class GpsKind { BernoulliLogit, PoissonLog, MultinomialLogit };

// Parametric model for the conditional distribution of the treatment given
// controls (the generalized propensity score), with index basis k(W).
struct GpsFamily {
  GpsKind kind = GpsKind::PoissonLog;
  BasisSpec basis;
  int categories = 2;  // multinomial only: category count including the base

  // Treatment dimension implied by the family.
  int k_treat() const { return kind == GpsKind::MultinomialLogit ? categories - 1 : 1; }
  // Total free parameters (multinomial fixes the base category at zero).
  int n_params() const { return basis.size() * k_treat(); }
  std::string name() const;
};

struct GpsFit {
  GpsFamily family;
  Eigen::MatrixXd phi;  // L x 1, or L x (categories-1) for multinomial
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  // Poisson treatments with non-integer values are accepted in a
  // quasi-likelihood reading; this flag records that it happened.
  bool non_integer_treatment = false;

  std::string tag(const std::vector<std::string>& control_names) const;
};

// Newton with step-halving from a zero start; all three families have
// concave log-likelihoods. Iterates until the mean score norm drops below
// 1e-10 or 100 iterations; `converged` records which. Throws NonConvergence
// when step-halving stalls (e.g. perfect separation) and SupportViolation
// when treatment values do not match the family support.
GpsFit fit_mle(const GpsFamily& family, const Dataset& data);

// Conditional mean e(w; phi) and variance v(w; phi) of the treatment.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> mean_var(const GpsFit& fit,
                                                     const Eigen::RowVectorXd& w_row);

// Excluded instrument v(w; phi)^-1 (x - e(w; phi)). Throws
// DegenerateVariance when v is numerically singular (eigenvalue guard 1e-12).
Eigen::VectorXd instrument(const GpsFit& fit, const Eigen::RowVectorXd& x_row,
                           const Eigen::RowVectorXd& w_row);

// Closed-form inverse of diag(p) - p p' given the non-base category
// probabilities p and the base probability p0:
//   v^-1 = diag(1/p_1, ..., 1/p_K) + (1/p0) 11'.
Eigen::MatrixXd multinomial_vinv(const Eigen::VectorXd& p, double p0);

// N x P matrix of per-row score vectors at the fitted parameters.
Eigen::MatrixXd score_rows(const GpsFit& fit, const Dataset& data);

// Per-row log density at arbitrary parameters (for likelihood diagnostics
// and finite-difference checks).
double log_density(const GpsFamily& family, const Eigen::MatrixXd& phi,
                   const Eigen::RowVectorXd& w_row, const Eigen::RowVectorXd& x_row);

// Expand a single column of category labels 0..C-1 into C-1 indicator
// columns (base category 0 maps to the zero row).
Eigen::MatrixXd expand_multinomial_labels(const Eigen::VectorXd& labels, int categories);

namespace gps_detail {

// Per-row family evaluations on a pre-evaluated basis row kw = k(w).
// Parameters are column-stacked: vec(phi) = (phi_cat1', phi_cat2', ...)'.

double log_density_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                      const Eigen::VectorXd& kw, const Eigen::RowVectorXd& x);
Eigen::VectorXd score_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                         const Eigen::VectorXd& kw, const Eigen::RowVectorXd& x);
// Log-likelihood Hessian contribution of one row (free of x for these
// families).
Eigen::MatrixXd hessian_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                           const Eigen::VectorXd& kw);
void mean_var_kw(const GpsFamily& f, const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                 Eigen::VectorXd& e, Eigen::MatrixXd& v);
Eigen::VectorXd instrument_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                              const Eigen::VectorXd& kw, const Eigen::RowVectorXd& x);
// Derivatives of e and v with respect to each free parameter.
void mean_var_derivs_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                        const Eigen::VectorXd& kw, std::vector<Eigen::VectorXd>& de,
                        std::vector<Eigen::MatrixXd>& dv);

Eigen::MatrixXd unflatten_phi(const GpsFamily& f, const Eigen::VectorXd& theta);

}  // namespace gps_detail

}  // namespace avreg
