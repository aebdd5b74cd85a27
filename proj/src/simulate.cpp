#include "avreg/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <thread>

#include "avreg/errors.hpp"
#include "avreg/estimators.hpp"

namespace avreg {

Design Design::preset(int id) {
  Design d;
  d.id = id;
  switch (id) {
    case 1:
      break;  // defaults
    case 2:
      d.delta1 = 1.26;
      d.phi2 = 0.1;
      d.gps_truth_basis = TruthBasis::QuadraticW;
      break;
    case 3:
      d.alpha0 = 1.5;
      d.gamma2 = 0.5;
      d.beta0 = 2.5;
      d.delta1 = 1.0;
      d.delta2 = 0.5;
      break;
    case 4:
      d.alpha0 = 1.5;
      d.gamma2 = 0.5;
      d.beta0 = 2.5;
      d.delta1 = 1.05;
      d.delta2 = 0.5;
      d.phi2 = 0.1;
      d.gps_truth_basis = TruthBasis::QuadraticW;
      break;
    default:
      throw ConfigError("unknown design preset " + std::to_string(id));
  }
  return d;
}

Dataset draw_sample(const Design& design, long n, Rng& rng) {
  if (n < 1) throw ConfigError("draw_sample: n must be >= 1");
  Dataset data;
  data.y.resize(n);
  data.x.resize(n, 1);
  data.w.resize(n, 1);
  data.x_names = {"x"};
  data.w_names = {"w"};
  for (long i = 0; i < n; ++i) {
    const double w = rng.normal();
    const double x = static_cast<double>(rng.poisson(std::exp(design.gps_index(w))));
    const double u = rng.normal();
    data.w(i, 0) = w;
    data.x(i, 0) = x;
    data.y[i] = design.a0(w) + design.b0(w) * x + design.sigma_u * u;
  }
  return data;
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::OaxacaBlinder: return "ob";
    case EstimatorKind::Gipw: return "gipw";
    case EstimatorKind::Dr: return "dr";
    case EstimatorKind::Plm: return "plm";
  }
  return "?";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "ob") return EstimatorKind::OaxacaBlinder;
  if (name == "gipw") return EstimatorKind::Gipw;
  if (name == "dr") return EstimatorKind::Dr;
  if (name == "plm") return EstimatorKind::Plm;
  throw ConfigError("unknown estimator: " + name + " (expected ob, gipw, dr or plm)");
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

StudyRow summarize(const std::string& estimator, const std::vector<Replicate>& replicates) {
  if (replicates.empty()) throw ConfigError("summarize: no replicates");
  StudyRow row;
  row.estimator = estimator;
  row.replicates = static_cast<long>(replicates.size());

  std::vector<double> bias, ses;
  bias.reserve(replicates.size());
  ses.reserve(replicates.size());
  double sum = 0.0;
  long covered = 0;
  for (const Replicate& r : replicates) {
    bias.push_back(r.beta_hat - r.truth);
    ses.push_back(r.se);
    sum += r.beta_hat;
    if (std::abs(r.beta_hat - r.truth) <= 1.96 * r.se) ++covered;
  }
  row.median_bias = median_of(bias);
  row.median_se = median_of(ses);
  row.coverage95 = static_cast<double>(covered) / replicates.size();

  const double mean = sum / replicates.size();
  if (replicates.size() > 1) {
    double ss = 0.0;
    for (const Replicate& r : replicates) ss += (r.beta_hat - mean) * (r.beta_hat - mean);
    row.sd = std::sqrt(ss / (replicates.size() - 1));
  }
  return row;
}

int default_thread_count() {
  if (const char* env = std::getenv("AVREG_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

StudySummary run_study(const Design& design, long n, long reps, std::uint64_t seed,
                       const std::vector<EstimatorKind>& estimators, int n_threads) {
  if (reps < 1) throw ConfigError("run_study: reps must be >= 1");
  if (estimators.empty()) throw ConfigError("run_study: no estimators requested");
  if (n_threads <= 0) n_threads = default_thread_count();
  n_threads = static_cast<int>(std::min<long>(n_threads, reps));

  const bool want_ob =
      std::find(estimators.begin(), estimators.end(), EstimatorKind::OaxacaBlinder) !=
      estimators.end();
  const bool want_gipw =
      std::find(estimators.begin(), estimators.end(), EstimatorKind::Gipw) != estimators.end();
  const bool want_dr =
      std::find(estimators.begin(), estimators.end(), EstimatorKind::Dr) != estimators.end();
  const bool want_plm =
      std::find(estimators.begin(), estimators.end(), EstimatorKind::Plm) != estimators.end();

  struct Cell {
    double beta = 0.0, se = 0.0;
  };
  struct RepResult {
    std::optional<Cell> ob, gipw, dr, plm;
    bool failed = false;
  };
  std::vector<RepResult> results(static_cast<std::size_t>(reps));

  const GpsFamily gps_family{GpsKind::PoissonLog, BasisSpec::constant_plus_raw(1), 2};
  const BasisSpec clp_spec = BasisSpec::raw(1);

  auto run_replicate = [&](long r) {
    RepResult& out = results[static_cast<std::size_t>(r)];
    try {
      Rng rng(seed, static_cast<std::uint64_t>(r));
      const Dataset data = draw_sample(design, n, rng);
      GpsFit fit;
      if (want_gipw || want_dr || want_plm) fit = fit_mle(gps_family, data);
      if (want_ob || want_dr) {
        const ClpBasis clp = ClpBasis::from_data(clp_spec, data, true);
        if (want_ob) {
          const Estimate e = oaxaca_blinder(data, clp);
          out.ob = Cell{e.beta[0], e.std_err[0]};
        }
        if (want_dr) {
          const Estimate e = dr(data, fit, clp);
          out.dr = Cell{e.beta[0], e.std_err[0]};
        }
      }
      if (want_gipw) {
        const Estimate e = gipw(data, fit);
        out.gipw = Cell{e.beta[0], e.std_err[0]};
      }
      if (want_plm) {
        const ClpBasis clp_nointer = ClpBasis::from_data(clp_spec, data, false);
        const Estimate e = plm(data, fit, clp_nointer);
        out.plm = Cell{e.beta[0], e.std_err[0]};
      }
    } catch (const NumericalError&) {
      out.failed = true;
    }
  };

  if (n_threads <= 1) {
    for (long r = 0; r < reps; ++r) run_replicate(r);
  } else {
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&]() {
        for (;;) {
          const long r = next.fetch_add(1);
          if (r >= reps) return;
          run_replicate(r);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  StudySummary summary;
  summary.design_id = design.id;
  summary.n = n;
  summary.reps = reps;
  summary.seed = seed;
  summary.mc_coverage_se = std::sqrt(0.05 * 0.95 / static_cast<double>(reps));
  for (const RepResult& r : results)
    if (r.failed) ++summary.failed;
  summary.fail_rate = static_cast<double>(summary.failed) / static_cast<double>(reps);
  if (summary.fail_rate > 0.01)
    throw TooManyFailures("replicate failure rate " + std::to_string(summary.fail_rate) +
                          " above 1%");

  auto collect = [&](EstimatorKind kind) {
    std::vector<Replicate> reps_ok;
    reps_ok.reserve(results.size());
    for (const RepResult& r : results) {
      if (r.failed) continue;
      const std::optional<Cell>* cell = nullptr;
      switch (kind) {
        case EstimatorKind::OaxacaBlinder: cell = &r.ob; break;
        case EstimatorKind::Gipw: cell = &r.gipw; break;
        case EstimatorKind::Dr: cell = &r.dr; break;
        case EstimatorKind::Plm: cell = &r.plm; break;
      }
      if (cell->has_value())
        reps_ok.push_back(Replicate{(*cell)->beta, (*cell)->se, design.beta0});
    }
    return reps_ok;
  };
  for (EstimatorKind kind : estimators)
    summary.rows.push_back(summarize(estimator_name(kind), collect(kind)));
  return summary;
}

}  // namespace avreg
