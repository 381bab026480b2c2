#pragma once

#include <string>

#include "dsr/agent.hpp"
#include "dsr/gridworld.hpp"
#include "dsr/subgoals.hpp"

namespace dsr {

struct EvalConfig {
  int episodes = 100;
  double epsilon = 0.05;
};

struct DistalExperimentConfig {
  double goal_reward = 3.0;
  long long max_env_steps = 20000;
  double act_epsilon = 0.05;
  double tolerance = 0.05;
  double lr = 0.0;        // 0 = inherit train.lr
  double momentum = -1.0; // <0 = inherit train.momentum
};

struct SubgoalsExperimentConfig {
  int runs = 5;
  int k = 6;
  int samples = 600;
  double sigma = 0.0;  // 0 = median heuristic
  bool collapse_duplicates = true;
  bool action_averaged = false;
  bool normalize = false;
  int segments = 2;
  long long train_steps = 30000;
  std::string threshold = "sweep";
};

/// Everything an experiment needs, with defaults pinned to the reference
/// hyperparameters (gamma 0.99, lr 2.5e-4, momentum 0.95, epsilon 1 -> 0.1
/// over 20k steps, replay 1e6, 0.8/0.2 prioritized sampling, reward-phase
/// budget 4000 halved per episode).
struct ExperimentConfig {
  std::string map_path;
  MapRewards map_rewards;
  TrainConfig train;
  int baseline_update_period = 4;
  EvalConfig eval;
  DistalExperimentConfig distal;
  SubgoalsExperimentConfig subgoals;
  std::string out_dir = "out";
  std::string kernel_backend = "auto";
};

/// Parses the documented key-value format: optional [section] headers,
/// `key = value` lines, `#` comments, quoted strings, numbers, booleans.
/// Unknown keys raise ParseError; out-of-range values raise RangeError
/// naming the offending key.
ExperimentConfig parse_config_text(const std::string& text);

/// parse_config_text over the file contents; referenced files (the map) are
/// checked for existence here.
ExperimentConfig load_config(const std::string& path);

void validate_config(const ExperimentConfig& cfg);

}  // namespace dsr
