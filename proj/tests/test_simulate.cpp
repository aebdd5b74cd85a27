#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "avreg/errors.hpp"
#include "avreg/io.hpp"
#include "avreg/simulate.hpp"

using namespace avreg;

TEST_CASE("design presets match the study table") {
  const Design d2 = Design::preset(2);
  CHECK(d2.delta1 == 1.26);
  CHECK(d2.phi2 == 0.1);
  CHECK(d2.gps_truth_basis == TruthBasis::QuadraticW);
  const Design d3 = Design::preset(3);
  CHECK(d3.beta0 == 2.5);
  CHECK(d3.gamma2 == 0.5);
  CHECK(d3.gps_truth_basis == TruthBasis::LinearW);
  CHECK_THROWS_AS(Design::preset(9), ConfigError);
}

TEST_CASE("draw_sample hits the lognormal treatment mean") {
  Rng rng(50, 0);
  const Dataset data = draw_sample(Design::preset(1), 1000000, rng);
  // E[X] = E[exp(phi0 + phi1 W)] = exp(phi0 + phi1^2 / 2).
  const double oracle = std::exp(0.1 + 0.125);
  CHECK(std::abs(data.x.col(0).mean() - oracle) < 0.01 * oracle);
  CHECK(std::abs(data.w.col(0).mean()) < 0.01);
}

TEST_CASE("degenerate design produces an exact linear outcome") {
  Design d;
  d.sigma_u = 0.0;
  d.gamma1 = d.gamma2 = d.delta1 = d.delta2 = 0.0;
  Rng rng(51, 0);
  const Dataset data = draw_sample(d, 500, rng);
  for (long i = 0; i < 500; ++i)
    CHECK(data.y[i] == d.alpha0 + d.beta0 * data.x(i, 0));
}

TEST_CASE("draw_sample is bitwise deterministic in (design, n, seed)") {
  Rng a(52, 3), b(52, 3);
  const Dataset first = draw_sample(Design::preset(2), 2000, a);
  const Dataset second = draw_sample(Design::preset(2), 2000, b);
  CHECK(first.y == second.y);
  CHECK(first.x == second.x);
  CHECK(first.w == second.w);
}

TEST_CASE("summarize trivial and synthetic cases") {
  // Every replicate equal to the truth.
  std::vector<Replicate> exact(10, Replicate{2.0, 1.0, 2.0});
  const StudyRow row = summarize("dr", exact);
  CHECK(row.median_bias == 0.0);
  CHECK(row.sd == 0.0);
  CHECK(row.median_se == 1.0);
  CHECK(row.coverage95 == 1.0);

  // Normal errors with a correct standard error cover at the nominal rate.
  Rng rng(53, 0);
  std::vector<Replicate> synthetic;
  const long b = 5000;
  for (long i = 0; i < b; ++i)
    synthetic.push_back(Replicate{2.0 + 0.05 * rng.normal(), 0.05, 2.0});
  const StudyRow syn = summarize("dr", synthetic);
  const double mc_se = std::sqrt(0.05 * 0.95 / b);  // about 0.003
  CHECK(mc_se == doctest::Approx(0.003).epsilon(0.05));
  CHECK(std::abs(syn.coverage95 - 0.95) < 3.0 * mc_se);
  CHECK(std::abs(syn.sd - 0.05) < 0.002);
  CHECK(std::abs(syn.median_bias) < 0.003);

  CHECK_THROWS_AS(summarize("dr", {}), ConfigError);
}

TEST_CASE("single-replicate study reduces to one estimate") {
  const StudySummary summary =
      run_study(Design::preset(1), 400, 1, 99, {EstimatorKind::Dr}, 1);
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0].replicates == 1);
  CHECK(summary.rows[0].sd == 0.0);

  // The single bias is that replicate's error.
  Rng rng(99, 0);
  const Dataset data = draw_sample(Design::preset(1), 400, rng);
  const GpsFit fit =
      fit_mle({GpsKind::PoissonLog, BasisSpec::constant_plus_raw(1), 2}, data);
  const ClpBasis clp = ClpBasis::from_data(BasisSpec::raw(1), data, true);
  const Estimate est = dr(data, fit, clp);
  CHECK(summary.rows[0].median_bias == est.beta[0] - 2.0);
}

TEST_CASE("study output is identical across thread counts") {
  const std::vector<EstimatorKind> kinds{EstimatorKind::OaxacaBlinder, EstimatorKind::Gipw,
                                         EstimatorKind::Dr};
  const StudySummary one = run_study(Design::preset(1), 300, 60, 7, kinds, 1);
  const StudySummary many = run_study(Design::preset(1), 300, 60, 7, kinds, 8);
  std::ostringstream a, b;
  write_study_csv(a, one);
  write_study_csv(b, many);
  CHECK(a.str() == b.str());
}

TEST_CASE("short design-1 study behaves like the published experiment") {
  const std::vector<EstimatorKind> kinds{EstimatorKind::OaxacaBlinder, EstimatorKind::Gipw,
                                         EstimatorKind::Dr};
  const StudySummary summary = run_study(Design::preset(1), 1000, 300, 2024, kinds, 0);
  REQUIRE(summary.rows.size() == 3);
  const StudyRow& ob = summary.rows[0];
  const StudyRow& gipw_row = summary.rows[1];
  const StudyRow& dr_row = summary.rows[2];

  CHECK(std::abs(dr_row.median_bias) < 0.02);
  CHECK(dr_row.median_se == doctest::Approx(0.05).epsilon(0.2));
  CHECK(dr_row.coverage95 > 0.90);
  CHECK(dr_row.coverage95 < 0.99);
  // Efficiency ordering: the doubly robust estimator beats the two-step one.
  CHECK(dr_row.sd < 0.07);
  CHECK(gipw_row.sd > 0.07);
  CHECK(ob.sd < 0.07);
  CHECK(summary.failed == 0);
}

TEST_CASE("hopeless design trips the failure-rate guard") {
  Design d;
  d.phi0 = -30.0;  // treatment almost surely all zeros: no overlap
  d.phi1 = 0.0;
  CHECK_THROWS_AS(run_study(d, 40, 10, 5, {EstimatorKind::Dr}, 1), TooManyFailures);
}

TEST_CASE("thread-count default honors the environment override") {
  setenv("AVREG_THREADS", "3", 1);
  CHECK(default_thread_count() == 3);
  setenv("AVREG_THREADS", "junk", 1);
  CHECK(default_thread_count() >= 1);
  unsetenv("AVREG_THREADS");
  CHECK(default_thread_count() >= 1);
}

TEST_CASE("estimator names round trip") {
  for (const auto kind : {EstimatorKind::OaxacaBlinder, EstimatorKind::Gipw, EstimatorKind::Dr,
                          EstimatorKind::Plm})
    CHECK(estimator_from_name(estimator_name(kind)) == kind);
  CHECK_THROWS_AS(estimator_from_name("bogus"), ConfigError);
  CHECK_THROWS_AS(run_study(Design::preset(1), 100, 0, 1, {EstimatorKind::Dr}, 1), ConfigError);
  CHECK_THROWS_AS(run_study(Design::preset(1), 100, 10, 1, {}, 1), ConfigError);
}
