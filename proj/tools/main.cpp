/**
 * @file main.cpp
 * @brief pdhjb CLI: experiment orchestration with deterministic seeding and
 *        envelope emission.
 *
 * Exit codes: 0 all acceptance rules pass, 1 rule failure, 2 schema
 * violation, 3 numeric refusal (caps exceeded, wrong regime).
 */
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "config.hpp"
#include "pdhjb/mc.hpp"
#include "tasks.hpp"

namespace {

using pdhjb::cli::ExperimentConfig;
using pdhjb::cli::TaskResult;

int run_subcommand(const std::string& name, const std::string& config_path,
                   const std::string& out_dir, std::optional<std::uint64_t> seed,
                   std::optional<int> threads) {
  using Runner = std::function<TaskResult(const ExperimentConfig&)>;
  const std::map<std::string, Runner> runners = {
      {"gauge-verify", pdhjb::cli::run_gauge_verify},
      {"ito-verify", pdhjb::cli::run_ito_verify},
      {"simulate",
       [&](const ExperimentConfig& c) { return pdhjb::cli::run_simulate(c, out_dir); }},
      {"bsde-solve",
       [&](const ExperimentConfig& c) { return pdhjb::cli::run_bsde_solve(c, out_dir); }},
      {"value", pdhjb::cli::run_value},
      {"dpp-check", pdhjb::cli::run_dpp_check},
      {"hjb-residual", pdhjb::cli::run_hjb_residual},
      {"viscosity-probe", pdhjb::cli::run_viscosity_probe},
      {"bp-optimize", pdhjb::cli::run_bp_optimize},
      {"stability-check", pdhjb::cli::run_stability_check},
  };

  try {
    const ExperimentConfig cfg = pdhjb::cli::load_config(config_path, seed, threads);
    const TaskResult result = runners.at(name)(cfg);
    const auto envelope = pdhjb::cli::make_envelope(cfg, result.payload, result.pass);
    pdhjb::cli::write_envelope(envelope, out_dir);
    std::printf("%s: %s (payload_hash=%llu)\n", name.c_str(),
                result.pass ? "pass" : "FAIL",
                static_cast<unsigned long long>(envelope["payload_hash"].get<std::uint64_t>()));
    return result.pass ? 0 : 1;
  } catch (const pdhjb::cli::SchemaError& e) {
    std::fprintf(stderr, "schema error %s\n", e.what());
    return 2;
  } catch (const pdhjb::RefusalError& e) {
    std::fprintf(stderr, "refused: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for path-dependent stochastic optimal control"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  const std::vector<std::string> names = {
      "gauge-verify", "ito-verify",      "simulate",    "bsde-solve",  "value",
      "dpp-check",    "hjb-residual",    "viscosity-probe", "bp-optimize", "stability-check"};
  std::string chosen;
  for (const auto& n : names) {
    CLI::App* sub = app.add_subcommand(n);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--threads", threads, "worker thread count override");
    sub->callback([&chosen, n]() { chosen = n; });
  }

  CLI11_PARSE(app, argc, argv);
  return run_subcommand(chosen, config_path, out_dir, seed, threads);
}
