#include "avreg/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "avreg/errors.hpp"

namespace avreg {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

int column_index(const std::string& name, const std::vector<std::string>& names) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw ConfigError("basis expression references unknown control: " + name);
  return static_cast<int>(it - names.begin());
}

BasisTerm parse_term(const std::string& raw, const std::vector<std::string>& names) {
  const std::string tok = trim(raw);
  if (tok.empty()) throw ConfigError("empty term in basis expression");
  BasisTerm term;
  if (tok == "1") {
    term.kind = BasisTerm::Kind::Constant;
    return term;
  }
  if (auto star = tok.find('*'); star != std::string::npos) {
    term.kind = BasisTerm::Kind::Product;
    term.col = column_index(trim(tok.substr(0, star)), names);
    term.col2 = column_index(trim(tok.substr(star + 1)), names);
    if (term.col2 < term.col) std::swap(term.col, term.col2);
    return term;
  }
  if (auto caret = tok.find('^'); caret != std::string::npos) {
    term.col = column_index(trim(tok.substr(0, caret)), names);
    const std::string exp = trim(tok.substr(caret + 1));
    try {
      term.exponent = std::stoi(exp);
    } catch (const std::exception&) {
      throw ConfigError("bad exponent in basis term: " + tok);
    }
    if (term.exponent < 1) throw ConfigError("exponent must be >= 1 in: " + tok);
    term.kind = term.exponent == 1 ? BasisTerm::Kind::Raw : BasisTerm::Kind::Power;
    return term;
  }
  term.kind = BasisTerm::Kind::Raw;
  term.col = column_index(tok, names);
  return term;
}

}  // namespace

BasisSpec::BasisSpec(std::vector<BasisTerm> terms) : terms_(std::move(terms)) {
  for (std::size_t i = 0; i < terms_.size(); ++i)
    for (std::size_t j = i + 1; j < terms_.size(); ++j)
      if (terms_[i] == terms_[j]) throw ConfigError("duplicate basis term");
}

BasisSpec BasisSpec::parse(const std::string& expr, const std::vector<std::string>& names) {
  std::vector<BasisTerm> terms;
  std::stringstream ss(expr);
  std::string tok;
  while (std::getline(ss, tok, ',')) terms.push_back(parse_term(tok, names));
  if (terms.empty()) throw ConfigError("empty basis expression");
  return BasisSpec(std::move(terms));
}

BasisSpec BasisSpec::constant_plus_raw(int n_controls) {
  std::vector<BasisTerm> terms;
  terms.push_back({BasisTerm::Kind::Constant, -1, -1, 1});
  for (int j = 0; j < n_controls; ++j) terms.push_back({BasisTerm::Kind::Raw, j, -1, 1});
  return BasisSpec(std::move(terms));
}

BasisSpec BasisSpec::raw(int n_controls) {
  std::vector<BasisTerm> terms;
  for (int j = 0; j < n_controls; ++j) terms.push_back({BasisTerm::Kind::Raw, j, -1, 1});
  return BasisSpec(std::move(terms));
}

bool BasisSpec::has_constant() const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [](const BasisTerm& t) { return t.kind == BasisTerm::Kind::Constant; });
}

double BasisSpec::eval_term(int j, const Eigen::RowVectorXd& w_row) const {
  const BasisTerm& t = terms_[static_cast<std::size_t>(j)];
  switch (t.kind) {
    case BasisTerm::Kind::Constant: return 1.0;
    case BasisTerm::Kind::Raw: return w_row[t.col];
    case BasisTerm::Kind::Power: return std::pow(w_row[t.col], t.exponent);
    case BasisTerm::Kind::Product: return w_row[t.col] * w_row[t.col2];
  }
  return 0.0;
}

Eigen::VectorXd BasisSpec::eval_row(const Eigen::RowVectorXd& w_row) const {
  Eigen::VectorXd out(size());
  for (int j = 0; j < size(); ++j) out[j] = eval_term(j, w_row);
  return out;
}

Eigen::MatrixXd BasisSpec::eval(const Eigen::MatrixXd& w) const {
  Eigen::MatrixXd out(w.rows(), size());
  for (Eigen::Index i = 0; i < w.rows(); ++i) out.row(i) = eval_row(w.row(i)).transpose();
  return out;
}

std::string BasisSpec::describe(const std::vector<std::string>& names) const {
  std::ostringstream out;
  for (int j = 0; j < size(); ++j) {
    if (j > 0) out << ",";
    const BasisTerm& t = terms_[static_cast<std::size_t>(j)];
    switch (t.kind) {
      case BasisTerm::Kind::Constant: out << "1"; break;
      case BasisTerm::Kind::Raw: out << names[static_cast<std::size_t>(t.col)]; break;
      case BasisTerm::Kind::Power:
        out << names[static_cast<std::size_t>(t.col)] << "^" << t.exponent;
        break;
      case BasisTerm::Kind::Product:
        out << names[static_cast<std::size_t>(t.col)] << "*" << names[static_cast<std::size_t>(t.col2)];
        break;
    }
  }
  return out.str();
}

}  // namespace avreg
