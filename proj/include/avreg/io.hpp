#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "avreg/clp.hpp"
#include "avreg/dataset.hpp"
#include "avreg/estimators.hpp"
#include "avreg/simulate.hpp"

namespace avreg {

struct ColumnRoles {
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> controls;
};

// UTF-8 CSV with a header row and purely numeric cells; no quoting or
// missing values. Role columns must exist and be disjoint.
Dataset load_csv(const std::string& path, const ColumnRoles& roles);
Dataset load_csv(std::istream& in, const ColumnRoles& roles);

// Full-precision export (%.17g) so a written dataset re-ingests to
// bit-identical doubles.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::string& path, const Dataset& data);

// Tabular outputs use 6 significant digits.
void write_estimates_csv(std::ostream& out, const std::vector<Estimate>& estimates,
                         const std::vector<std::string>& treatment_names);
void write_estimates_json(std::ostream& out, const std::vector<Estimate>& estimates,
                          const std::vector<std::string>& treatment_names);
void write_study_csv(std::ostream& out, const StudySummary& summary);
void write_study_markdown(std::ostream& out, const StudySummary& summary);
void write_seb_csv(std::ostream& out, const SebResult& result, int design_id);

std::string format_full(double v);  // %.17g
std::string format_table(double v); // %.6g

}  // namespace avreg
