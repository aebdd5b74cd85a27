#include "avreg/gps.hpp"

#include <cmath>
#include <string>

#include "avreg/errors.hpp"
#include "avreg/mom.hpp"

namespace avreg {

namespace {

constexpr double kVarianceGuard = 1e-12;
constexpr double kScoreTol = 1e-10;
constexpr int kMaxNewton = 100;
constexpr int kMaxHalvings = 50;

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double z = std::exp(eta);
  return z / (1.0 + z);
}

// log(1 + exp(eta)) without overflow.
double softplus(double eta) {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

// Non-base category probabilities p (K) and base probability p0 from the
// logit matrix eta_k = kw' phi_k.
void multinomial_probs(const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                       Eigen::VectorXd& p, double& p0) {
  const Eigen::VectorXd eta = phi.transpose() * kw;
  const double m = std::max(0.0, eta.maxCoeff());
  double denom = std::exp(-m);
  p = (eta.array() - m).exp().matrix();
  denom += p.sum();
  p /= denom;
  p0 = std::exp(-m) / denom;
}

void validate_support(const GpsFamily& family, const Dataset& data, bool& non_integer) {
  non_integer = false;
  const int k = family.k_treat();
  if (data.x.cols() != k)
    throw SupportViolation("family " + family.name() + " expects " + std::to_string(k) +
                           " treatment column(s), got " + std::to_string(data.x.cols()));
  switch (family.kind) {
    case GpsKind::BernoulliLogit:
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double x = data.x(i, 0);
        if (x != 0.0 && x != 1.0)
          throw SupportViolation("binary treatment must be 0/1 at row " + std::to_string(i));
      }
      break;
    case GpsKind::PoissonLog:
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double x = data.x(i, 0);
        if (!(x >= 0.0) || !std::isfinite(x))
          throw SupportViolation("Poisson treatment must be nonnegative at row " +
                                 std::to_string(i));
        if (x != std::floor(x)) non_integer = true;
      }
      break;
    case GpsKind::MultinomialLogit: {
      if (family.categories < 2)
        throw ConfigError("multinomial family needs at least 2 categories");
      for (Eigen::Index i = 0; i < data.n(); ++i) {
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
          const double x = data.x(i, j);
          if (x != 0.0 && x != 1.0)
            throw SupportViolation("multinomial indicators must be 0/1 at row " +
                                   std::to_string(i));
          row_sum += x;
        }
        if (row_sum > 1.0)
          throw SupportViolation("multinomial indicators must be mutually exclusive at row " +
                                 std::to_string(i));
      }
      break;
    }
  }
}

}  // namespace

std::string GpsFamily::name() const {
  switch (kind) {
    case GpsKind::BernoulliLogit: return "logit";
    case GpsKind::PoissonLog: return "poisson";
    case GpsKind::MultinomialLogit: return "multinomial";
  }
  return "?";
}

std::string GpsFit::tag(const std::vector<std::string>& control_names) const {
  return family.name() + "[" + family.basis.describe(control_names) + "]";
}

namespace gps_detail {

Eigen::MatrixXd unflatten_phi(const GpsFamily& f, const Eigen::VectorXd& theta) {
  const int l = f.basis.size();
  const int kc = f.k_treat();
  Eigen::MatrixXd phi(l, kc);
  for (int c = 0; c < kc; ++c) phi.col(c) = theta.segment(c * l, l);
  return phi;
}

double log_density_kw(const GpsFamily& f, const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                      const Eigen::RowVectorXd& x) {
  switch (f.kind) {
    case GpsKind::BernoulliLogit: {
      const double eta = kw.dot(phi.col(0));
      return x[0] * eta - softplus(eta);
    }
    case GpsKind::PoissonLog: {
      const double eta = kw.dot(phi.col(0));
      return x[0] * eta - std::exp(eta) - std::lgamma(x[0] + 1.0);
    }
    case GpsKind::MultinomialLogit: {
      const Eigen::VectorXd eta = phi.transpose() * kw;
      const double m = std::max(0.0, eta.maxCoeff());
      const double lse = m + std::log(std::exp(-m) + (eta.array() - m).exp().sum());
      return x * eta - lse;
    }
  }
  return 0.0;
}

Eigen::VectorXd score_kw(const GpsFamily& f, const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                         const Eigen::RowVectorXd& x) {
  switch (f.kind) {
    case GpsKind::BernoulliLogit:
      return (x[0] - sigmoid(kw.dot(phi.col(0)))) * kw;
    case GpsKind::PoissonLog:
      return (x[0] - std::exp(kw.dot(phi.col(0)))) * kw;
    case GpsKind::MultinomialLogit: {
      Eigen::VectorXd p;
      double p0;
      multinomial_probs(phi, kw, p, p0);
      const int l = f.basis.size();
      Eigen::VectorXd s(f.n_params());
      for (int c = 0; c < f.k_treat(); ++c) s.segment(c * l, l) = (x[c] - p[c]) * kw;
      return s;
    }
  }
  return Eigen::VectorXd();
}

Eigen::MatrixXd hessian_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                           const Eigen::VectorXd& kw) {
  switch (f.kind) {
    case GpsKind::BernoulliLogit: {
      const double p = sigmoid(kw.dot(phi.col(0)));
      return -p * (1.0 - p) * (kw * kw.transpose());
    }
    case GpsKind::PoissonLog:
      return -std::exp(kw.dot(phi.col(0))) * (kw * kw.transpose());
    case GpsKind::MultinomialLogit: {
      Eigen::VectorXd p;
      double p0;
      multinomial_probs(phi, kw, p, p0);
      const int l = f.basis.size();
      const int kc = f.k_treat();
      const Eigen::MatrixXd outer = kw * kw.transpose();
      Eigen::MatrixXd h(f.n_params(), f.n_params());
      for (int a = 0; a < kc; ++a)
        for (int b = 0; b < kc; ++b) {
          const double vab = p[a] * ((a == b ? 1.0 : 0.0) - p[b]);
          h.block(a * l, b * l, l, l) = -vab * outer;
        }
      return h;
    }
  }
  return Eigen::MatrixXd();
}

void mean_var_kw(const GpsFamily& f, const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                 Eigen::VectorXd& e, Eigen::MatrixXd& v) {
  switch (f.kind) {
    case GpsKind::BernoulliLogit: {
      const double p = sigmoid(kw.dot(phi.col(0)));
      e = Eigen::VectorXd::Constant(1, p);
      v = Eigen::MatrixXd::Constant(1, 1, p * (1.0 - p));
      return;
    }
    case GpsKind::PoissonLog: {
      const double mean = std::exp(kw.dot(phi.col(0)));
      e = Eigen::VectorXd::Constant(1, mean);
      v = Eigen::MatrixXd::Constant(1, 1, mean);
      return;
    }
    case GpsKind::MultinomialLogit: {
      Eigen::VectorXd p;
      double p0;
      multinomial_probs(phi, kw, p, p0);
      e = p;
      v = Eigen::MatrixXd(p.size(), p.size());
      v = p.asDiagonal();
      v.noalias() -= p * p.transpose();
      return;
    }
  }
}

Eigen::VectorXd instrument_kw(const GpsFamily& f, const Eigen::MatrixXd& phi,
                              const Eigen::VectorXd& kw, const Eigen::RowVectorXd& x) {
  if (f.kind == GpsKind::MultinomialLogit) {
    Eigen::VectorXd p;
    double p0;
    multinomial_probs(phi, kw, p, p0);
    return multinomial_vinv(p, p0) * (x.transpose() - p);
  }
  Eigen::VectorXd e;
  Eigen::MatrixXd v;
  mean_var_kw(f, phi, kw, e, v);
  if (v(0, 0) < kVarianceGuard)
    throw DegenerateVariance("conditional treatment variance " + std::to_string(v(0, 0)) +
                             " below guard; overlap failure at this row");
  return (x.transpose() - e) / v(0, 0);
}

void mean_var_derivs_kw(const GpsFamily& f, const Eigen::MatrixXd& phi, const Eigen::VectorXd& kw,
                        std::vector<Eigen::VectorXd>& de, std::vector<Eigen::MatrixXd>& dv) {
  const int n_params = f.n_params();
  de.resize(n_params);
  dv.resize(n_params);
  switch (f.kind) {
    case GpsKind::BernoulliLogit: {
      const double p = sigmoid(kw.dot(phi.col(0)));
      const double dp = p * (1.0 - p);
      for (int l = 0; l < n_params; ++l) {
        de[l] = Eigen::VectorXd::Constant(1, dp * kw[l]);
        dv[l] = Eigen::MatrixXd::Constant(1, 1, dp * (1.0 - 2.0 * p) * kw[l]);
      }
      return;
    }
    case GpsKind::PoissonLog: {
      const double mean = std::exp(kw.dot(phi.col(0)));
      for (int l = 0; l < n_params; ++l) {
        de[l] = Eigen::VectorXd::Constant(1, mean * kw[l]);
        dv[l] = Eigen::MatrixXd::Constant(1, 1, mean * kw[l]);
      }
      return;
    }
    case GpsKind::MultinomialLogit: {
      Eigen::VectorXd p;
      double p0;
      multinomial_probs(phi, kw, p, p0);
      const int l = f.basis.size();
      const int kc = f.k_treat();
      Eigen::MatrixXd vmat(kc, kc);
      vmat = p.asDiagonal();
      vmat.noalias() -= p * p.transpose();
      for (int j = 0; j < kc; ++j) {
        // d p / d eta_j and d v / d eta_j.
        const Eigen::VectorXd dp = vmat.col(j);
        Eigen::MatrixXd dvj(kc, kc);
        for (int a = 0; a < kc; ++a)
          for (int b = 0; b < kc; ++b)
            dvj(a, b) = (a == b ? dp[a] : 0.0) - dp[a] * p[b] - p[a] * dp[b];
        for (int t = 0; t < l; ++t) {
          de[j * l + t] = dp * kw[t];
          dv[j * l + t] = dvj * kw[t];
        }
      }
      return;
    }
  }
}

}  // namespace gps_detail

GpsFit fit_mle(const GpsFamily& family, const Dataset& data) {
  if (data.n() == 0) throw EmptyData("fit_mle: no rows");
  GpsFit fit;
  fit.family = family;
  validate_support(family, data, fit.non_integer_treatment);

  const Eigen::MatrixXd kw = family.basis.eval(data.w);
  const int n = static_cast<int>(data.n());
  const int n_params = family.n_params();

  auto loglik_at = [&](const Eigen::MatrixXd& phi) {
    double ll = 0.0;
    for (int i = 0; i < n; ++i)
      ll += gps_detail::log_density_kw(family, phi, kw.row(i).transpose(), data.x.row(i));
    return ll;
  };

  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(family.basis.size(), family.k_treat());
  double ll = loglik_at(phi);
  bool converged = false;
  int iter = 0;
  for (; iter < kMaxNewton; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n_params, n_params);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd kwi = kw.row(i).transpose();
      grad += gps_detail::score_kw(family, phi, kwi, data.x.row(i));
      hess += gps_detail::hessian_kw(family, phi, kwi);
    }
    if (grad.norm() / n < kScoreTol) {
      converged = true;
      break;
    }
    Eigen::VectorXd step = hess.ldlt().solve(-grad);
    if (!step.allFinite())
      throw NonConvergence("Newton step not finite; degenerate information matrix");
    double scale = 1.0;
    bool improved = false;
    Eigen::MatrixXd trial;
    for (int h = 0; h < kMaxHalvings; ++h) {
      trial = phi + scale * gps_detail::unflatten_phi(family, step);
      const double trial_ll = loglik_at(trial);
      if (std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * std::abs(ll)) {
        phi = trial;
        ll = trial_ll;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved)
      throw NonConvergence(
          "step-halving stalled; likelihood cannot improve (possible separation)");
  }

  // Saturated fitted probabilities mean the likelihood has no interior
  // maximizer (perfect separation).
  if (family.kind != GpsKind::PoissonLog) {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd e;
      Eigen::MatrixXd v;
      gps_detail::mean_var_kw(family, phi, kw.row(i).transpose(), e, v);
      const double base = 1.0 - e.sum();
      if (e.minCoeff() <= 0.0 || base <= 0.0 ||
          (family.kind == GpsKind::BernoulliLogit && e[0] >= 1.0))
        throw NonConvergence("fitted probabilities saturated at row " + std::to_string(i) +
                             "; perfect separation suspected");
    }
  }

  fit.phi = phi;
  fit.loglik = ll;
  fit.converged = converged;
  fit.iterations = iter;
  return fit;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> mean_var(const GpsFit& fit,
                                                     const Eigen::RowVectorXd& w_row) {
  Eigen::VectorXd e;
  Eigen::MatrixXd v;
  gps_detail::mean_var_kw(fit.family, fit.phi, fit.family.basis.eval_row(w_row), e, v);
  if (!e.allFinite() || !v.allFinite())
    throw NonFiniteMoment("mean_var: non-finite conditional moments");
  return {e, v};
}

Eigen::VectorXd instrument(const GpsFit& fit, const Eigen::RowVectorXd& x_row,
                           const Eigen::RowVectorXd& w_row) {
  return gps_detail::instrument_kw(fit.family, fit.phi, fit.family.basis.eval_row(w_row), x_row);
}

Eigen::MatrixXd multinomial_vinv(const Eigen::VectorXd& p, double p0) {
  if (p.minCoeff() <= kVarianceGuard || p0 <= kVarianceGuard)
    throw DegenerateVariance("category probability at or below guard");
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(p.size(), p.size(), 1.0 / p0);
  out.diagonal() += p.cwiseInverse();
  return out;
}

Eigen::MatrixXd score_rows(const GpsFit& fit, const Dataset& data) {
  const Eigen::MatrixXd kw = fit.family.basis.eval(data.w);
  Eigen::MatrixXd out(data.n(), fit.family.n_params());
  for (Eigen::Index i = 0; i < data.n(); ++i)
    out.row(i) =
        gps_detail::score_kw(fit.family, fit.phi, kw.row(i).transpose(), data.x.row(i))
            .transpose();
  return out;
}

double log_density(const GpsFamily& family, const Eigen::MatrixXd& phi,
                   const Eigen::RowVectorXd& w_row, const Eigen::RowVectorXd& x_row) {
  return gps_detail::log_density_kw(family, phi, family.basis.eval_row(w_row), x_row);
}

Eigen::MatrixXd expand_multinomial_labels(const Eigen::VectorXd& labels, int categories) {
  if (categories < 2) throw ConfigError("multinomial family needs at least 2 categories");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(labels.size(), categories - 1);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double lab = labels[i];
    if (lab != std::floor(lab) || lab < 0.0 || lab >= categories)
      throw SupportViolation("category label out of range 0.." +
                             std::to_string(categories - 1) + " at row " + std::to_string(i));
    const int c = static_cast<int>(lab);
    if (c > 0) out(i, c - 1) = 1.0;
  }
  return out;
}

}  // namespace avreg
