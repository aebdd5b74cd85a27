#include "avreg/estimators.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "avreg/errors.hpp"

namespace avreg {

namespace {

void check_inputs(const Dataset& data, const GpsFit* fit) {
  if (data.n_treatments() == 0) throw ConfigError("dataset has no treatment columns");
  if (data.n() == 0) throw EmptyData("dataset has no rows");
  if (fit) {
    if (!fit->converged)
      throw NonConvergence("propensity-score fit did not converge; refusing to estimate");
    if (fit->family.k_treat() != data.n_treatments())
      throw SupportViolation("treatment dimension does not match the fitted family");
  }
}

void check_mu_hat(const ClpBasis& clp, const Dataset& data) {
  if (clp.j() == 0) return;
  const Eigen::VectorXd mu = clp.basis.eval(data.w).colwise().mean().transpose();
  if ((mu - clp.mu_hat).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + mu.cwiseAbs().maxCoeff()))
    throw ConfigError("clp.mu_hat was not computed on this dataset");
}

Estimate finalize(Estimate est, const Eigen::MatrixXd& cov_beta, long n) {
  const int k = static_cast<int>(est.beta.size());
  est.cov_beta = cov_beta;
  est.std_err = cov_beta.diagonal().cwiseMax(0.0).cwiseSqrt();
  est.ci95.resize(k, 2);
  est.ci95.col(0) = est.beta - 1.96 * est.std_err;
  est.ci95.col(1) = est.beta + 1.96 * est.std_err;
  est.n = n;
  return est;
}

}  // namespace

namespace estimators_detail {

StackedSystem build_stacked_system(const Dataset& data, const GpsFit* fit, const ClpBasis& clp) {
  check_inputs(data, fit);
  check_mu_hat(clp, data);

  const int n = static_cast<int>(data.n());
  const int k = static_cast<int>(data.n_treatments());
  const int j = clp.j();
  const int pl = clp.r_dim(k);
  const int p = fit ? fit->family.n_params() : 0;
  const int dim = p + j + pl + k;
  if (n < dim + 1)
    throw TooFewRows("need at least " + std::to_string(dim + 1) + " rows for " +
                     std::to_string(dim) + " parameters, got " + std::to_string(n));

  const Eigen::MatrixXd kw_clp =
      j > 0 ? clp.basis.eval(data.w) : Eigen::MatrixXd(n, 0);
  const Eigen::MatrixXd kw_gps =
      fit ? fit->family.basis.eval(data.w) : Eigen::MatrixXd(n, 0);

  // Point estimates: R block plus the excluded instrument (or X itself when
  // no propensity-score model is supplied).
  Eigen::MatrixXd r_mat(n, pl);
  Eigen::MatrixXd z_mat(n, k);
  for (int i = 0; i < n; ++i) {
    r_mat.row(i) =
        build_R_from_terms(clp, kw_clp.row(i).transpose(), data.x.row(i)).transpose();
    if (fit)
      z_mat.row(i) = gps_detail::instrument_kw(fit->family, fit->phi,
                                               kw_gps.row(i).transpose(), data.x.row(i))
                         .transpose();
    else
      z_mat.row(i) = data.x.row(i);
  }
  Eigen::MatrixXd instruments(n, pl + k), regressors(n, pl + k);
  instruments << r_mat, z_mat;
  regressors << r_mat, data.x;
  const Eigen::VectorXd lambda_beta = solve_linear_iv(instruments, regressors, data.y);

  StackedSystem sys;
  sys.n_gps_params = p;
  sys.n_basis = j;
  sys.n_lambda = pl;
  sys.n_treat = k;
  sys.theta_hat.resize(dim);
  if (fit) sys.theta_hat.head(p) = Eigen::Map<const Eigen::VectorXd>(fit->phi.data(), p);
  sys.theta_hat.segment(p, j) = clp.mu_hat;
  sys.theta_hat.tail(pl + k) = lambda_beta;

  // Moment vector: [scores; centered basis; (R, Z) * U]. Everything is
  // recomputed from theta so numeric differentiation sees the full system.
  const GpsFamily* family = fit ? &fit->family : nullptr;
  sys.moments.dim_theta = dim;
  sys.moments.dim_moments = dim;
  sys.moments.n_rows = n;
  ClpBasis clp_shape = clp;  // mu replaced per evaluation
  sys.moments.moment_fn = [=, &data](int i, const Eigen::VectorXd& theta,
                                     Eigen::Ref<Eigen::VectorXd> m) mutable {
    const Eigen::VectorXd kwi = j > 0 ? kw_clp.row(i).transpose() : Eigen::VectorXd(0);
    clp_shape.mu_hat = theta.segment(p, j);
    const Eigen::VectorXd lambda = theta.segment(p + j, pl);
    const Eigen::VectorXd beta = theta.tail(k);
    const Eigen::VectorXd ri = build_R_from_terms(clp_shape, kwi, data.x.row(i));
    const double u = data.y[i] - ri.dot(lambda) - data.x.row(i).dot(beta);
    if (family) {
      const Eigen::MatrixXd phi = gps_detail::unflatten_phi(*family, theta.head(p));
      const Eigen::VectorXd kg = kw_gps.row(i).transpose();
      m.head(p) = gps_detail::score_kw(*family, phi, kg, data.x.row(i));
      m.tail(k) = gps_detail::instrument_kw(*family, phi, kg, data.x.row(i)) * u;
    } else {
      m.tail(k) = data.x.row(i).transpose() * u;
    }
    m.segment(p, j) = kwi - clp_shape.mu_hat;
    m.segment(p + j, pl) = ri * u;
  };

  // Exact sample Jacobian, accumulated row by row.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd score_cross = Eigen::MatrixXd::Zero(k, p);  // sum Z_i U_i S_i'
  Eigen::MatrixXd score_gram = Eigen::MatrixXd::Zero(p, p);   // sum S_i S_i'
  jac.block(p, p, j, j) = -Eigen::MatrixXd::Identity(j, j);
  const Eigen::VectorXd lambda = lambda_beta.head(pl);
  const Eigen::VectorXd gamma = j > 0 ? lambda.segment(1, j) : Eigen::VectorXd(0);
  std::vector<Eigen::VectorXd> de;
  std::vector<Eigen::MatrixXd> dv;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd ri = r_mat.row(i).transpose();
    const Eigen::VectorXd zi = z_mat.row(i).transpose();
    const Eigen::RowVectorXd xi = data.x.row(i);
    const double u = data.y[i] - regressors.row(i).dot(lambda_beta);
    Eigen::VectorXd qi(pl + k);
    qi << ri, zi;

    // d(QU)/d(lambda, beta)' = -Q D'.
    jac.block(p + j, p + j, pl + k, pl + k).noalias() -=
        qi * regressors.row(i);

    // d(QU)/d mu_j: the centered and interaction entries of R shift, and U
    // moves through R' lambda.
    for (int a = 0; a < j; ++a) {
      double du_dmu = gamma[a];
      if (clp.include_interactions) du_dmu += xi.dot(lambda.segment(1 + j + a * k, k));
      Eigen::VectorXd col = qi * du_dmu;
      col[1 + a] -= u;
      if (clp.include_interactions)
        col.segment(1 + j + a * k, k) -= xi.transpose() * u;
      jac.block(p + j, p + a, pl + k, 1) += col;
    }

    if (fit) {
      const Eigen::VectorXd kg = kw_gps.row(i).transpose();
      jac.topLeftCorner(p, p) += gps_detail::hessian_kw(fit->family, fit->phi, kg);
      const Eigen::VectorXd si =
          gps_detail::score_kw(fit->family, fit->phi, kg, data.x.row(i));
      score_cross.noalias() += zi * u * si.transpose();
      score_gram.noalias() += si * si.transpose();
      gps_detail::mean_var_derivs_kw(fit->family, fit->phi, kg, de, dv);
      Eigen::VectorXd e;
      Eigen::MatrixXd v;
      gps_detail::mean_var_kw(fit->family, fit->phi, kg, e, v);
      Eigen::MatrixXd vinv;
      if (fit->family.kind == GpsKind::MultinomialLogit) {
        const double p0 = 1.0 - e.sum();
        vinv = multinomial_vinv(e, p0);
      } else {
        vinv = v.cwiseInverse();
      }
      for (int l = 0; l < p; ++l) {
        // dZ/dphi_l = -v^-1 (dv_l Z + de_l).
        const Eigen::VectorXd dz = -(vinv * (dv[l] * zi + de[l]));
        jac.block(dim - k, l, k, 1) += dz * u;
      }
    }
  }
  jac.bottomRightCorner(pl + k, dim) /= n;
  if (p > 0) jac.topLeftCorner(p, p) /= n;
  sys.analytic_jacobian = jac;

  sys.covariance_jacobian = jac;
  if (fit) {
    // Population identities of the limiting moment Jacobian: the score
    // blocks take their information-equality forms, the instrument moment
    // is orthogonal to the working-model regressors, and E[ZX'] = I. The
    // inverse then reproduces the limiting influence-function expression
    //   Z U - [sum Z U S'][sum S S']^-1 S + B2 (k(W) - mu),
    // whose variance stays valid (conservative) when the propensity-score
    // model is misspecified but the working model is right.
    sys.covariance_jacobian.topLeftCorner(p, p) = -score_gram / n;
    sys.covariance_jacobian.block(dim - k, 0, k, p) = -score_cross / n;
    sys.covariance_jacobian.block(dim - k, p + j, k, pl).setZero();
    sys.covariance_jacobian.block(dim - k, dim - k, k, k) =
        -Eigen::MatrixXd::Identity(k, k);
  }
  return sys;
}

}  // namespace estimators_detail

namespace {

Estimate stacked_estimate(const Dataset& data, const GpsFit* fit, const ClpBasis& clp,
                          const std::string& tag) {
  auto sys = estimators_detail::build_stacked_system(data, fit, clp);
  const int k = sys.n_treat;

  const SandwichCov cov = sandwich(sys.moments, sys.theta_hat, sys.covariance_jacobian);
  const Eigen::MatrixXd psi =
      influence_rows(sys.moments, sys.theta_hat, sys.covariance_jacobian);

  Estimate est;
  est.beta = sys.theta_hat.tail(k);
  est.nuisance = sys.theta_hat.segment(sys.n_gps_params + sys.n_basis, sys.n_lambda);
  est.influence = psi.rightCols(k);
  est.estimator_tag = tag;
  est.gps_tag = fit ? fit->tag(data.w_names) : "none";
  est.basis_tag = clp.basis.size() > 0 ? clp.basis.describe(data.w_names) : "none";
  if (!clp.include_interactions && est.basis_tag != "none") est.basis_tag += ";plain";
  return finalize(std::move(est), cov.cov.bottomRightCorner(k, k), data.n());
}

}  // namespace

Estimate oaxaca_blinder(const Dataset& data, const ClpBasis& clp) {
  return stacked_estimate(data, nullptr, clp, "ob");
}

Estimate dr(const Dataset& data, const GpsFit& fit, const ClpBasis& clp) {
  return stacked_estimate(data, &fit, clp, "dr");
}

Estimate plm(const Dataset& data, const GpsFit& fit, const ClpBasis& clp) {
  if (clp.include_interactions)
    throw ConfigError("plm requires a ClpBasis with include_interactions = false");
  return stacked_estimate(data, &fit, clp, "plm");
}

Estimate gipw(const Dataset& data, const GpsFit& fit, bool correct_for_gps) {
  check_inputs(data, &fit);
  const int n = static_cast<int>(data.n());
  const int k = static_cast<int>(data.n_treatments());
  const int p = fit.family.n_params();
  if (n < k + p + 1)
    throw TooFewRows("need at least " + std::to_string(k + p + 1) + " rows");

  const Eigen::MatrixXd kw = fit.family.basis.eval(data.w);
  Eigen::MatrixXd z_mat(n, k);
  for (int i = 0; i < n; ++i)
    z_mat.row(i) = gps_detail::instrument_kw(fit.family, fit.phi, kw.row(i).transpose(),
                                             data.x.row(i))
                       .transpose();

  // IV fit of Y on X with no constant.
  const Eigen::VectorXd beta = solve_linear_iv(z_mat, data.x, data.y);

  // rho_i = Z_i (Y_i - X_i' beta); the correction projects out the span of
  // the propensity-score scores before forming the outer product.
  Eigen::MatrixXd rho(n, k);
  for (int i = 0; i < n; ++i)
    rho.row(i) = z_mat.row(i) * (data.y[i] - data.x.row(i).dot(beta));

  Eigen::MatrixXd resid = rho;
  if (correct_for_gps) {
    const Eigen::MatrixXd scores = score_rows(fit, data);
    const Eigen::MatrixXd ss = scores.transpose() * scores;
    const Eigen::MatrixXd proj =
        guarded_solve(ss, scores.transpose() * rho, "score Gram matrix");
    resid -= scores * proj;
  }

  const Eigen::MatrixXd cross = z_mat.transpose() * data.x / n;
  const Eigen::MatrixXd psi =
      guarded_solve(cross, resid.transpose(), "instrument cross-moment").transpose();
  Eigen::MatrixXd cov = psi.transpose() * psi / (static_cast<double>(n) * n);
  cov = 0.5 * (cov + cov.transpose());

  Estimate est;
  est.beta = beta;
  est.nuisance = Eigen::VectorXd(0);
  est.influence = psi;
  est.estimator_tag = correct_for_gps ? "gipw" : "gipw_uncorrected";
  est.gps_tag = fit.tag(data.w_names);
  est.basis_tag = "none";
  return finalize(std::move(est), cov, n);
}

}  // namespace avreg
