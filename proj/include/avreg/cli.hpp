#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace avreg {

// Parsed command line / config file. Flags override config-file values
// field by field.
struct RunConfig {
  std::string subcommand;

  // estimate
  std::string data_path;
  std::string outcome;
  std::vector<std::string> treatments;
  std::vector<std::string> controls;
  std::string gps_family = "poisson";
  int categories = 0;  // multinomial: number of categories, 0 = infer
  std::string gps_basis;  // default "1,<controls>"
  std::string clp_basis;  // default "<controls>"
  bool no_interactions = false;
  std::vector<std::string> estimators = {"dr"};
  bool gps_uncorrected = false;

  // simulate / seb
  int design = 1;
  std::optional<double> alpha0, gamma1, gamma2, beta0, delta1, delta2;
  std::optional<double> phi0, phi1, phi2, sigma_u;
  std::optional<bool> gps_quadratic;
  long n = 1000;
  long reps = 5000;
  std::string markdown_path;
  long draws = 2000000;

  // common
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = AVREG_THREADS env or hardware
  std::string out_path;
  std::string json_path;
  std::string config_path;
};

// Parses arguments (excluding argv[0]); merges --config JSON defaults.
// Throws ConfigError on bad usage.
RunConfig parse_args(const std::vector<std::string>& args);

// Executes a parsed config; returns 0 on success, throws avreg errors.
int run(const RunConfig& config);

// Full entry point: parse, run, map errors to exit codes (0 ok, 2 config,
// 3 data, 4 numerical) and emit a machine-readable error record on stderr.
int cli_main(int argc, const char* const* argv);

}  // namespace avreg
