#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fsdyn/affine.hpp"
#include "fsdyn/entropy.hpp"
#include "fsdyn/error.hpp"
#include "fsdyn/measure.hpp"
#include "fsdyn/partition.hpp"
#include "fsdyn/potential.hpp"
#include "fsdyn/pressure.hpp"
#include "fsdyn/systems.hpp"

namespace fsdyn::cli {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode { exit_ok = 0, exit_error = 1, exit_invalid = 2, exit_underresolved = 3, exit_failed = 4 };

// A violation at a JSON pointer into the config document.
struct Diagnostic {
  std::string path;
  std::string message;
};
std::string format(const Diagnostic& d);

struct ConfigError : Error {
  explicit ConfigError(std::vector<Diagnostic> d);
  std::vector<Diagnostic> diagnostics;
};

// Seeds handed to the modules, all derived from the config seed.
struct Seeds {
  std::uint64_t run = 0;
  std::uint64_t words = 0, balls = 0, defect = 0, integral = 0;
};
Seeds derive_seeds(std::uint64_t run);

// Everything a run needs, built from a config document.
struct Experiment {
  std::string command;
  std::string output;
  Seeds seeds;
  SystemPtr system;
  Potential potential;
  std::optional<Measure> measure;
  std::vector<Partition> partitions;

  EstimatorParams pressure;
  EntropyParams entropy;
  AffineParams affine;

  double skew_c = 0, skew_tolerance = 0.1;
  std::vector<std::string> skew_checks;

  Potential psi;
  double verify_c = 0.5;
  double verify_tolerance = 1e-9;
  bool expect_invariant = true;
  double defect_tolerance = 1e-3;
  double variational_tolerance = 0.05;
  double affine_tolerance = 0.15;
  std::size_t integral_samples = 1'000'000;

  json resolved;  // the config with every default filled in
};

// Defaults merged under the document; a manifest is unwrapped to its config.
json resolve(const json& config);
// Every violation found, with paths.  Empty for a valid config.
std::vector<Diagnostic> validate(const json& config);
// Throws ConfigError listing every violation.
Experiment build(const json& config, std::size_t threads);

// Parses a config or manifest file; throws ConfigError on unreadable input.
json load_config(const std::string& path);

struct RunOptions {
  std::optional<std::string> output;  // overrides the config's output directory
  std::size_t threads = 1;
  bool dry_run = false;
  std::ostream* log = nullptr;
};

struct RunResult {
  int exit_code = exit_ok;
  std::vector<std::string> files;  // written, relative to the output directory
  std::vector<Diagnostic> diagnostics;
  std::string summary;
};

// Validates, computes everything in memory, then writes results.csv,
// manifest.json, plotdata.txt and summary.txt (plus checks.csv for skew runs).
// Nothing is written when validation or the computation fails.
RunResult run(const json& config, const RunOptions& opt);

// %.17g, with nan and inf spelled out.
std::string csv_number(double v);

}  // namespace fsdyn::cli
