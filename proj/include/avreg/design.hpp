#pragma once

namespace avreg {

enum class TruthBasis { LinearW, QuadraticW };

// Data-generating process for the simulation study:
//   W ~ N(0,1), U ~ N(0, sigma_u^2) independent,
//   X | W ~ Poisson(exp(phi0 + phi1 W [+ phi2 W^2])),
//   Y = a0(W) + b0(W) X + U,
// with a0(w) = alpha0 + gamma1 (w - E[W]) + gamma2 (w^2 - E[W^2]) and
// b0(w) = beta0 + delta1 (w - E[W]) + delta2 (w^2 - E[W^2]). The centering
// constants are the population ones, E[W] = 0 and E[W^2] = 1.
struct Design {
  double alpha0 = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 0.0;
  double beta0 = 2.0;
  double delta1 = 1.22;
  double delta2 = 0.0;
  double phi0 = 0.1;
  double phi1 = 0.5;
  double phi2 = 0.0;
  double sigma_u = 1.0;
  TruthBasis gps_truth_basis = TruthBasis::LinearW;
  int id = 0;  // 1..4 for the bundled presets, 0 for custom

  // Bundled designs; each is calibrated so sqrt(bound/1000) = 0.05.
  static Design preset(int id);

  double a0(double w) const { return alpha0 + gamma1 * w + gamma2 * (w * w - 1.0); }
  double b0(double w) const { return beta0 + delta1 * w + delta2 * (w * w - 1.0); }
  double gps_index(double w) const {
    double eta = phi0 + phi1 * w;
    if (gps_truth_basis == TruthBasis::QuadraticW) eta += phi2 * w * w;
    return eta;
  }
};

}  // namespace avreg
