#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "avreg/basis.hpp"
#include "avreg/dataset.hpp"
#include "avreg/design.hpp"

namespace avreg {

// Regressor basis of the conditional-linear-predictor working model. The
// stacked regressor for one observation is
//   R = (1, (k(W) - mu_hat)', ((k(W) - mu_hat) (x) X)')'
// with the interaction block dropped for the partially-linear variant.
struct ClpBasis {
  BasisSpec basis;         // J transforms, no constant term
  Eigen::VectorXd mu_hat;  // sample mean of the evaluated basis
  bool include_interactions = true;

  // Evaluates the basis on the dataset and stores its sample means.
  static ClpBasis from_data(const BasisSpec& basis, const Dataset& data,
                            bool include_interactions = true);

  int j() const { return basis.size(); }
  int r_dim(int k_treat) const {
    return 1 + j() + (include_interactions ? j() * k_treat : 0);
  }
};

// R vector for one observation; ordering is exactly
// [constant, centered terms, interactions].
Eigen::VectorXd build_R(const ClpBasis& clp, const Eigen::RowVectorXd& w_row,
                        const Eigen::RowVectorXd& x_row);

// Same, from a pre-evaluated basis row kw = k(w).
Eigen::VectorXd build_R_from_terms(const ClpBasis& clp, const Eigen::VectorXd& kw_row,
                                   const Eigen::RowVectorXd& x_row);

// Cell-by-cell least squares on discrete controls: within every W cell fit
// Y on (1, X) and average the slopes with cell frequencies. Serves as an
// oracle for the saturated estimators.
struct ClpCell {
  Eigen::RowVectorXd w;
  double intercept = 0.0;
  Eigen::VectorXd slope;
  long count = 0;
};

struct BruteForceClp {
  std::vector<ClpCell> cells;
  Eigen::VectorXd beta;  // frequency-weighted average slope
};

BruteForceClp brute_force_clp(const Dataset& data);

// Efficiency bound E[Omega0(W)] + V(b0(W)) for a simulation design,
// integrated by Monte Carlo over the control distribution (the conditional
// treatment and noise moments are available in closed form for the Poisson
// designs).
struct SebResult {
  Eigen::MatrixXd bound_inv;   // E[Omega0(W)] + V(b0(W))
  Eigen::MatrixXd omega_term;  // E[Omega0(W)]
  Eigen::MatrixXd var_b_term;  // V(b0(W))
  long n_draws = 0;
};

SebResult seb_monte_carlo(const Design& design, long n_draws, std::uint64_t seed);

// Derivative weights of the weighted-average-derivative representation for
// scalar continuous treatments, computed by trapezoid quadrature on a grid
// over the treatment support:
//   omega(w, x) = [1/f(x|w)] * E[X - e0(W) | W=w, X>=x](1 - F(x|w)) / D(w)
// where D(w) integrates the numerator over the support (and equals the
// conditional treatment variance).
struct DerivativeWeights {
  Eigen::VectorXd grid;
  Eigen::VectorXd weights;
  double denominator = 0.0;
};

DerivativeWeights derivative_weights(const std::function<double(double, double)>& cond_density,
                                     const std::function<double(double)>& e0, double w,
                                     const Eigen::VectorXd& grid);

}  // namespace avreg
