#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hybridtail/errors.hpp"
#include "hybridtail/experiment_harness.hpp"

namespace {

int workers_from_env() {
  const char* env = std::getenv("HYBRIDTAIL_WORKERS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1 || v > 4096) {
    std::cerr << "ignoring HYBRIDTAIL_WORKERS='" << env
              << "' (expected an integer >= 1)\n";
    return 1;
  }
  return static_cast<int>(v);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hybridtail;

  CLI::App app{"Monte Carlo and asymptotic tail evaluation for hybrid "
               "fluid workload models"};
  app.set_version_flag("--version", std::string("hybridtail ") + kVersion);

  std::string mode_arg;
  app.add_option("mode", mode_arg,
                 "simulate | asymptote | compare | validate (overrides the "
                 "config's mode)")
      ->required()
      ->check(CLI::IsMember({"simulate", "asymptote", "compare", "validate"}));
  std::string config_path;
  app.add_option("--config", config_path, "experiment config file")
      ->required();
  std::uint64_t seed = 0;
  auto* seed_opt =
      app.add_option("--seed", seed, "override the config's seed");
  std::string out_path;
  app.add_option("--out", out_path,
                 "write the CSV report here (plus a gnuplot script)");
  int workers = workers_from_env();
  app.add_option("--workers", workers, "parallel path workers")
      ->check(CLI::Range(1, 4096));
  bool strict = false;
  app.add_flag("--strict", strict,
               "exit 1 on unsupported regimes or failed validation suites");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::ExperimentConfig cfg = harness::load_config(config_path);
    if (mode_arg == "simulate") cfg.mode = harness::RunMode::Simulate;
    if (mode_arg == "asymptote") cfg.mode = harness::RunMode::Asymptote;
    if (mode_arg == "compare") cfg.mode = harness::RunMode::Compare;
    if (mode_arg == "validate") cfg.mode = harness::RunMode::Validate;
    if (*seed_opt) cfg.seed = seed;

    harness::RunOptions opts;
    opts.workers = workers;
    opts.out_path = out_path;
    opts.strict = strict;
    opts.echo = &std::cout;
    const harness::RunResult res = harness::run(cfg, opts);
    if (out_path.empty() && cfg.mode != harness::RunMode::Validate)
      std::cout << res.csv;
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
