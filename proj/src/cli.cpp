#include "avreg/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "avreg/errors.hpp"
#include "avreg/estimators.hpp"
#include "avreg/io.hpp"
#include "avreg/simulate.hpp"

namespace avreg {

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto b = tok.find_first_not_of(" \t");
    auto e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::string> json_string_list(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return split_csv_list(v.get<std::string>());
  if (v.is_array()) {
    std::vector<std::string> out;
    for (const auto& item : v) out.push_back(item.get<std::string>());
    return out;
  }
  throw ConfigError("config key '" + key + "' must be a string or array of strings");
}

// Applies config-file values for every option the command line left at its
// default; flags always win.
void merge_config_file(const nlohmann::json& file, const CLI::App& cmd, RunConfig& cfg) {
  auto unset = [&](const std::string& flag) {
    const CLI::Option* opt = cmd.get_option_no_throw(flag);
    return opt != nullptr && opt->count() == 0;
  };
  auto get_double = [&](const char* key, std::optional<double>& slot, const char* flag) {
    if (file.contains(key) && unset(flag)) slot = file.at(key).get<double>();
  };

  if (file.contains("data") && unset("--data")) cfg.data_path = file.at("data").get<std::string>();
  if (file.contains("outcome") && unset("--outcome"))
    cfg.outcome = file.at("outcome").get<std::string>();
  if (file.contains("treatments") && unset("--treatments"))
    cfg.treatments = json_string_list(file.at("treatments"), "treatments");
  if (file.contains("controls") && unset("--controls"))
    cfg.controls = json_string_list(file.at("controls"), "controls");
  if (file.contains("gps") && unset("--gps")) cfg.gps_family = file.at("gps").get<std::string>();
  if (file.contains("categories") && unset("--categories"))
    cfg.categories = file.at("categories").get<int>();
  if (file.contains("gps-basis") && unset("--gps-basis"))
    cfg.gps_basis = file.at("gps-basis").get<std::string>();
  if (file.contains("clp-basis") && unset("--clp-basis"))
    cfg.clp_basis = file.at("clp-basis").get<std::string>();
  if (file.contains("no-interactions") && unset("--no-interactions"))
    cfg.no_interactions = file.at("no-interactions").get<bool>();
  if (file.contains("estimators") && unset("--estimators"))
    cfg.estimators = json_string_list(file.at("estimators"), "estimators");
  if (file.contains("gps-uncorrected") && unset("--gps-uncorrected"))
    cfg.gps_uncorrected = file.at("gps-uncorrected").get<bool>();
  if (file.contains("design") && unset("--design")) cfg.design = file.at("design").get<int>();
  get_double("alpha0", cfg.alpha0, "--alpha0");
  get_double("gamma1", cfg.gamma1, "--gamma1");
  get_double("gamma2", cfg.gamma2, "--gamma2");
  get_double("beta0", cfg.beta0, "--beta0");
  get_double("delta1", cfg.delta1, "--delta1");
  get_double("delta2", cfg.delta2, "--delta2");
  get_double("phi0", cfg.phi0, "--phi0");
  get_double("phi1", cfg.phi1, "--phi1");
  get_double("phi2", cfg.phi2, "--phi2");
  get_double("sigma-u", cfg.sigma_u, "--sigma-u");
  if (file.contains("gps-quadratic") && unset("--gps-quadratic"))
    cfg.gps_quadratic = file.at("gps-quadratic").get<bool>();
  if (file.contains("n") && unset("--n")) cfg.n = file.at("n").get<long>();
  if (file.contains("reps") && unset("--reps")) cfg.reps = file.at("reps").get<long>();
  if (file.contains("markdown") && unset("--markdown"))
    cfg.markdown_path = file.at("markdown").get<std::string>();
  if (file.contains("draws") && unset("--draws")) cfg.draws = file.at("draws").get<long>();
  if (file.contains("seed") && unset("--seed"))
    cfg.seed = file.at("seed").get<std::uint64_t>();
  if (file.contains("threads") && unset("--threads"))
    cfg.threads = file.at("threads").get<int>();
  if (file.contains("out") && unset("--out")) cfg.out_path = file.at("out").get<std::string>();
  if (file.contains("json") && unset("--json"))
    cfg.json_path = file.at("json").get<std::string>();
}

void add_common(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--threads", cfg.threads, "worker threads (0 = AVREG_THREADS or hardware)");
  cmd->add_option("--out", cfg.out_path, "output CSV path (default stdout)");
  cmd->add_option("--json", cfg.json_path, "full-precision JSON sidecar path");
  cmd->add_option("--config", cfg.config_path, "JSON config file; flags override its values");
}

Design design_from_config(const RunConfig& cfg) {
  Design d = Design::preset(cfg.design);
  bool custom = false;
  auto apply = [&](const std::optional<double>& v, double& slot) {
    if (v) {
      slot = *v;
      custom = true;
    }
  };
  apply(cfg.alpha0, d.alpha0);
  apply(cfg.gamma1, d.gamma1);
  apply(cfg.gamma2, d.gamma2);
  apply(cfg.beta0, d.beta0);
  apply(cfg.delta1, d.delta1);
  apply(cfg.delta2, d.delta2);
  apply(cfg.phi0, d.phi0);
  apply(cfg.phi1, d.phi1);
  apply(cfg.phi2, d.phi2);
  apply(cfg.sigma_u, d.sigma_u);
  if (cfg.gps_quadratic) {
    d.gps_truth_basis = *cfg.gps_quadratic ? TruthBasis::QuadraticW : TruthBasis::LinearW;
    custom = true;
  }
  if (custom) d.id = 0;
  return d;
}

GpsKind family_from_name(const std::string& name) {
  if (name == "logit") return GpsKind::BernoulliLogit;
  if (name == "poisson") return GpsKind::PoissonLog;
  if (name == "multinomial") return GpsKind::MultinomialLogit;
  throw ConfigError("unknown gps family: " + name + " (expected logit, poisson, multinomial)");
}

class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DataError("file_open", "cannot open " + path + " for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

int run_estimate(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw ConfigError("estimate requires --data");
  if (cfg.outcome.empty()) throw ConfigError("estimate requires --outcome");
  if (cfg.treatments.empty()) throw ConfigError("estimate requires --treatments");

  Dataset data = load_csv(cfg.data_path, {cfg.outcome, cfg.treatments, cfg.controls});
  const GpsKind kind = family_from_name(cfg.gps_family);

  GpsFamily family;
  family.kind = kind;
  family.basis = cfg.gps_basis.empty()
                     ? BasisSpec::constant_plus_raw(static_cast<int>(data.n_controls()))
                     : BasisSpec::parse(cfg.gps_basis, data.w_names);
  if (kind == GpsKind::MultinomialLogit) {
    if (data.x.cols() != 1)
      throw ConfigError("multinomial family expects a single treatment column of labels 0..K");
    int categories = cfg.categories;
    if (categories == 0) categories = static_cast<int>(data.x.col(0).maxCoeff()) + 1;
    family.categories = categories;
    data.x = expand_multinomial_labels(data.x.col(0), categories);
    const std::string base = data.x_names[0];
    data.x_names.clear();
    for (int c = 1; c < categories; ++c) data.x_names.push_back(base + "_" + std::to_string(c));
  }

  const BasisSpec clp_spec = cfg.clp_basis.empty()
                                 ? BasisSpec::raw(static_cast<int>(data.n_controls()))
                                 : BasisSpec::parse(cfg.clp_basis, data.w_names);

  bool need_gps = false;
  for (const std::string& name : cfg.estimators)
    if (name != "ob") need_gps = true;
  GpsFit fit;
  if (need_gps) {
    fit = fit_mle(family, data);
    if (fit.non_integer_treatment)
      std::cerr << "warning: non-integer treatment values; Poisson fit read as "
                   "quasi-likelihood\n";
  }

  std::vector<Estimate> estimates;
  for (const std::string& name : cfg.estimators) {
    if (name == "ob") {
      estimates.push_back(
          oaxaca_blinder(data, ClpBasis::from_data(clp_spec, data, !cfg.no_interactions)));
    } else if (name == "gipw") {
      estimates.push_back(gipw(data, fit, !cfg.gps_uncorrected));
    } else if (name == "dr") {
      estimates.push_back(
          dr(data, fit, ClpBasis::from_data(clp_spec, data, !cfg.no_interactions)));
    } else if (name == "plm") {
      estimates.push_back(plm(data, fit, ClpBasis::from_data(clp_spec, data, false)));
    } else {
      throw ConfigError("unknown estimator: " + name);
    }
  }

  OutputTarget out(cfg.out_path);
  write_estimates_csv(out.stream(), estimates, data.x_names);
  if (!cfg.json_path.empty()) {
    std::ofstream js(cfg.json_path);
    if (!js) throw DataError("file_open", "cannot open " + cfg.json_path + " for writing");
    write_estimates_json(js, estimates, data.x_names);
  }
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  const Design design = design_from_config(cfg);
  std::vector<EstimatorKind> kinds;
  for (const std::string& name : cfg.estimators) kinds.push_back(estimator_from_name(name));
  const StudySummary summary = run_study(design, cfg.n, cfg.reps, cfg.seed, kinds, cfg.threads);
  OutputTarget out(cfg.out_path);
  write_study_csv(out.stream(), summary);
  if (!cfg.markdown_path.empty()) {
    std::ofstream md(cfg.markdown_path);
    if (!md) throw DataError("file_open", "cannot open " + cfg.markdown_path + " for writing");
    write_study_markdown(md, summary);
  }
  return 0;
}

int run_seb(const RunConfig& cfg) {
  const Design design = design_from_config(cfg);
  const SebResult result = seb_monte_carlo(design, cfg.draws, cfg.seed);
  OutputTarget out(cfg.out_path);
  write_seb_csv(out.stream(), result, design.id);
  return 0;
}

void build_app(CLI::App& app, RunConfig& cfg, CLI::App*& est, CLI::App*& sim, CLI::App*& seb) {
  app.require_subcommand(1);

  est = app.add_subcommand("estimate", "estimate average conditional slopes from a CSV");
  est->add_option("--data", cfg.data_path, "input CSV path");
  est->add_option("--outcome", cfg.outcome, "outcome column");
  est->add_option("--treatments", cfg.treatments, "treatment columns")->delimiter(',');
  est->add_option("--controls", cfg.controls, "control columns")->delimiter(',');
  est->add_option("--gps", cfg.gps_family, "propensity family: logit|poisson|multinomial");
  est->add_option("--categories", cfg.categories, "multinomial categories (0 = infer)");
  est->add_option("--gps-basis", cfg.gps_basis, "index basis, e.g. \"1,w,w^2\"");
  est->add_option("--clp-basis", cfg.clp_basis, "CLP basis, e.g. \"w,w^2\"");
  est->add_flag("--no-interactions", cfg.no_interactions, "drop the (basis x treatment) block");
  est->add_option("--estimators,--estimator", cfg.estimators, "subset of ob,gipw,dr,plm")->delimiter(',');
  est->add_flag("--gps-uncorrected", cfg.gps_uncorrected,
                "conservative GIPW standard errors (skip the score correction)");
  add_common(est, cfg);

  sim = app.add_subcommand("simulate", "run a replication study of a simulation design");
  sim->add_option("--design", cfg.design, "bundled design 1..4");
  sim->add_option("--alpha0", cfg.alpha0, "intercept of a0(w)");
  sim->add_option("--gamma1", cfg.gamma1, "linear term of a0(w)");
  sim->add_option("--gamma2", cfg.gamma2, "quadratic term of a0(w)");
  sim->add_option("--beta0", cfg.beta0, "average slope");
  sim->add_option("--delta1", cfg.delta1, "linear term of b0(w)");
  sim->add_option("--delta2", cfg.delta2, "quadratic term of b0(w)");
  sim->add_option("--phi0", cfg.phi0, "propensity index intercept");
  sim->add_option("--phi1", cfg.phi1, "propensity index linear term");
  sim->add_option("--phi2", cfg.phi2, "propensity index quadratic term");
  sim->add_option("--sigma-u", cfg.sigma_u, "noise standard deviation");
  sim->add_flag("--gps-quadratic,!--gps-linear", cfg.gps_quadratic,
                "treatment index includes w^2");
  sim->add_option("--n", cfg.n, "sample size per replicate");
  sim->add_option("--reps", cfg.reps, "number of replicates");
  sim->add_option("--estimators,--estimator", cfg.estimators, "subset of ob,gipw,dr,plm")->delimiter(',');
  sim->add_option("--markdown", cfg.markdown_path, "also write a markdown table here");
  add_common(sim, cfg);

  seb = app.add_subcommand("seb", "evaluate the efficiency bound of a design by Monte Carlo");
  seb->add_option("--design", cfg.design, "bundled design 1..4");
  seb->add_option("--alpha0", cfg.alpha0, "intercept of a0(w)");
  seb->add_option("--gamma1", cfg.gamma1, "linear term of a0(w)");
  seb->add_option("--gamma2", cfg.gamma2, "quadratic term of a0(w)");
  seb->add_option("--beta0", cfg.beta0, "average slope");
  seb->add_option("--delta1", cfg.delta1, "linear term of b0(w)");
  seb->add_option("--delta2", cfg.delta2, "quadratic term of b0(w)");
  seb->add_option("--phi0", cfg.phi0, "propensity index intercept");
  seb->add_option("--phi1", cfg.phi1, "propensity index linear term");
  seb->add_option("--phi2", cfg.phi2, "propensity index quadratic term");
  seb->add_option("--sigma-u", cfg.sigma_u, "noise standard deviation");
  seb->add_flag("--gps-quadratic,!--gps-linear", cfg.gps_quadratic,
                "treatment index includes w^2");
  seb->add_option("--draws", cfg.draws, "Monte Carlo draws");
  add_common(seb, cfg);
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  RunConfig cfg;
  CLI::App app{"average conditional slope estimation"};
  CLI::App *est = nullptr, *sim = nullptr, *seb = nullptr;
  build_app(app, cfg, est, sim, seb);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.get_name() + std::string(": ") + e.what());
  }

  CLI::App* active = est->parsed() ? est : (sim->parsed() ? sim : seb);
  cfg.subcommand = active->get_name();
  if (!cfg.config_path.empty()) {
    std::ifstream in(cfg.config_path);
    if (!in) throw ConfigError("cannot open config file " + cfg.config_path);
    nlohmann::json file;
    try {
      in >> file;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad config JSON: " + std::string(e.what()));
    }
    merge_config_file(file, *active, cfg);
  }
  return cfg;
}

int run(const RunConfig& cfg) {
  if (cfg.subcommand == "estimate") return run_estimate(cfg);
  if (cfg.subcommand == "simulate") return run_simulate(cfg);
  if (cfg.subcommand == "seb") return run_seb(cfg);
  throw ConfigError("unknown subcommand: " + cfg.subcommand);
}

int cli_main(int argc, const char* const* argv) {
  // Help is handled before the config-file merge machinery runs.
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "-h" || arg == "--help") {
      RunConfig cfg;
      CLI::App app{"average conditional slope estimation"};
      CLI::App *est = nullptr, *sim = nullptr, *seb = nullptr;
      build_app(app, cfg, est, sim, seb);
      try {
        app.parse(argc, argv);
      } catch (const CLI::ParseError& e) {
        return app.exit(e);
      }
      return 0;
    }
  }

  auto report = [](const Error& e) {
    nlohmann::json rec{{"error", {{"code", e.code()}, {"message", e.what()}}}};
    std::cerr << rec.dump() << "\n";
  };
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(parse_args(args));
  } catch (const ConfigError& e) {
    report(e);
    return 2;
  } catch (const DataError& e) {
    report(e);
    return 3;
  } catch (const NumericalError& e) {
    report(e);
    return 4;
  } catch (const Error& e) {
    report(e);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump()
              << "\n";
    return 1;
  }
}

}  // namespace avreg
