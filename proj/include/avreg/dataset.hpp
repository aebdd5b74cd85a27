#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace avreg {

// Estimation input: outcome vector, treatment matrix (one column per
// treatment, K columns), control matrix (J raw controls).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd w;
  std::vector<std::string> x_names;
  std::vector<std::string> w_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index n_treatments() const { return x.cols(); }
  Eigen::Index n_controls() const { return w.cols(); }
};

}  // namespace avreg
