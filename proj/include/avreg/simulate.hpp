#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avreg/dataset.hpp"
#include "avreg/design.hpp"
#include "avreg/rng.hpp"

namespace avreg {

// One draw from the design's data-generating process. Deterministic in the
// state of `rng`; replicate r of a study uses the counter stream (seed, r).
Dataset draw_sample(const Design& design, long n, Rng& rng);

enum class EstimatorKind { OaxacaBlinder, Gipw, Dr, Plm };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

// One study replicate for one estimator.
struct Replicate {
  double beta_hat = 0.0;
  double se = 0.0;
  double truth = 0.0;
};

struct StudyRow {
  std::string estimator;
  double median_bias = 0.0;
  double sd = 0.0;         // standard deviation of the point estimates
  double median_se = 0.0;  // median estimated standard error
  double coverage95 = 0.0;
  long replicates = 0;
};

struct StudySummary {
  int design_id = 0;
  long n = 0;
  long reps = 0;
  std::uint64_t seed = 0;
  std::vector<StudyRow> rows;
  long failed = 0;
  double fail_rate = 0.0;
  double mc_coverage_se = 0.0;  // sqrt(0.05 * 0.95 / B)
};

StudyRow summarize(const std::string& estimator, const std::vector<Replicate>& replicates);

// Runs B replicates of the design at sample size n, fitting every requested
// estimator per replicate. The propensity score is always estimated as
// Poisson with index basis (1, w) and the CLP basis is linear in w, so the
// bundled designs exercise the intended misspecification patterns.
// Replicates that fail numerically are dropped and counted; more than 1%
// failures raises TooManyFailures. Results are bitwise reproducible for a
// given (design, n, reps, seed) regardless of the thread count.
StudySummary run_study(const Design& design, long n, long reps, std::uint64_t seed,
                       const std::vector<EstimatorKind>& estimators, int n_threads = 0);

// AVREG_THREADS environment override, else hardware concurrency.
int default_thread_count();

}  // namespace avreg
