#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dsr/config.hpp"

namespace dsr {

/// Loads the configured map with the configured reward overrides.
GridMap experiment_map(const ExperimentConfig& cfg);

void apply_kernel_backend(const std::string& name);

/// Each experiment writes its artifacts (CSV metrics, snapshots, dumps)
/// into cfg.out_dir and logs a short summary. Re-running with the same
/// config and seed reproduces every artifact byte for byte.
void run_train_experiment(const ExperimentConfig& cfg, const std::string& resume_path,
                          std::ostream& log);
void run_baseline_experiment(const ExperimentConfig& cfg, const std::string& resume_path,
                             std::ostream& log);
void run_eval_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                         std::ostream& log);
void run_distal_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                           const std::string& baseline_snapshot_path, std::ostream& log);
void run_subgoals_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                             std::ostream& log);

/// Fast consistency gate: successor-recursion residuals, factorization
/// against direct policy evaluation, finite-difference gradient checks for
/// both training phases, and spectral-vs-exhaustive normalized cuts.
bool run_oracle_check(std::ostream& log);

/// Subcommand dispatcher used by the dsrlab binary: train | eval | distal |
/// subgoals | oracle-check | baseline. Returns the process exit code
/// (2 for usage errors).
int run_cli(const std::vector<std::string>& args);

}  // namespace dsr
