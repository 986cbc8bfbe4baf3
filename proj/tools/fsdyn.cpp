#include <iostream>

#include <CLI11.hpp>

#include "fsdyn/cli.hpp"
#include "fsdyn/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Pressure and entropy of free semigroup actions"};
  std::string config;
  std::string output;
  std::size_t threads = fsdyn::default_threads();
  bool dry_run = false;
  app.add_option("-c,--config", config, "Config or manifest JSON file")->required();
  app.add_option("-o,--output", output, "Output directory (overrides the config)");
  app.add_option("-t,--threads", threads, "Worker threads (default: FSDYN_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--dry-run", dry_run, "Validate and print the resolved config without running");
  CLI11_PARSE(app, argc, argv);

  using namespace fsdyn::cli;
  RunResult res;
  try {
    RunOptions opt;
    if (!output.empty()) opt.output = output;
    opt.threads = threads;
    opt.dry_run = dry_run;
    res = run(load_config(config), opt);
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics) std::cerr << "config " << format(d) << '\n';
    return exit_invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_error;
  }
  for (const auto& d : res.diagnostics) std::cerr << (res.exit_code == exit_invalid ? "invalid " : "error ") << format(d) << '\n';
  std::cout << res.summary;
  if (dry_run && res.exit_code == exit_ok) {
    std::cout << "would write:";
    for (const auto& f : res.files) std::cout << ' ' << f;
    std::cout << '\n';
  }
  return res.exit_code;
}
