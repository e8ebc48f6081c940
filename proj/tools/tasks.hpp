/**
 * @file tasks.hpp
 * @brief Subcommand runners. Each consumes a validated config, produces a
 *        deterministic payload and an overall pass flag, and may drop CSV
 *        side files into the output directory.
 */
#pragma once

#include <string>

#include "config.hpp"

namespace pdhjb::cli {

struct TaskResult {
  json payload;
  bool pass = true;
};

TaskResult run_gauge_verify(const ExperimentConfig& cfg);
TaskResult run_ito_verify(const ExperimentConfig& cfg);
TaskResult run_simulate(const ExperimentConfig& cfg, const std::string& out_dir);
TaskResult run_bsde_solve(const ExperimentConfig& cfg, const std::string& out_dir);
TaskResult run_value(const ExperimentConfig& cfg);
TaskResult run_dpp_check(const ExperimentConfig& cfg);
TaskResult run_hjb_residual(const ExperimentConfig& cfg);
TaskResult run_viscosity_probe(const ExperimentConfig& cfg);
TaskResult run_bp_optimize(const ExperimentConfig& cfg);
TaskResult run_stability_check(const ExperimentConfig& cfg);

}  // namespace pdhjb::cli
