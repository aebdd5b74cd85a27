#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace avreg {

// One transform of the raw control columns.
struct BasisTerm {
  enum class Kind { Constant, Raw, Power, Product };
  Kind kind = Kind::Raw;
  int col = -1;       // first control column
  int col2 = -1;      // second column (Product)
  int exponent = 1;   // Power

  bool operator==(const BasisTerm&) const = default;
};

// Ordered list of control transforms. Used both as the index basis k(W) of
// the propensity-score model and as the regressor basis of the conditional
// linear predictor working model.
class BasisSpec {
 public:
  BasisSpec() = default;
  explicit BasisSpec(std::vector<BasisTerm> terms);

  // Parse a comma-separated expression over control names, e.g.
  // "1,w,w^2,w1*w2". Unknown names and duplicate terms are rejected.
  static BasisSpec parse(const std::string& expr, const std::vector<std::string>& control_names);

  // Convenience constructors.
  static BasisSpec constant_plus_raw(int n_controls);  // (1, w_1, ..., w_J)
  static BasisSpec raw(int n_controls);                // (w_1, ..., w_J)

  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<BasisTerm>& terms() const { return terms_; }
  bool has_constant() const;

  double eval_term(int j, const Eigen::RowVectorXd& w_row) const;
  Eigen::VectorXd eval_row(const Eigen::RowVectorXd& w_row) const;
  Eigen::MatrixXd eval(const Eigen::MatrixXd& w) const;  // N x size()

  std::string describe(const std::vector<std::string>& control_names) const;

 private:
  std::vector<BasisTerm> terms_;
};

}  // namespace avreg
