#include <CLI11.hpp>
#include <iostream>

#include "dsr/error.hpp"
#include "dsr/experiments.hpp"

namespace dsr {
namespace {

struct CommonArgs {
  std::string config_path;
  std::string map_path;
  std::string out_dir;
  std::string kernels;
  long long seed = -1;
  long long steps = -1;
  long long episodes = -1;

  void attach(CLI::App* cmd, bool with_training_knobs) {
    cmd->add_option("--config", config_path, "config file (key = value)");
    cmd->add_option("--map", map_path, "ASCII map file, overrides the config");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "experiment seed, overrides the config");
    cmd->add_option("--kernels", kernels, "kernel backend: auto|scalar|avx2");
    if (with_training_knobs) {
      cmd->add_option("--steps", steps, "environment-step budget");
      cmd->add_option("--episodes", episodes, "episode budget");
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (!map_path.empty()) cfg.map_path = map_path;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!kernels.empty()) cfg.kernel_backend = kernels;
    if (seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed);
    if (steps >= 0) cfg.train.max_env_steps = steps;
    if (episodes >= 0) cfg.train.max_episodes = episodes;
    validate_config(cfg);
    return cfg;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"dsrlab: successor-feature grid-world laboratory", "dsrlab"};
  app.require_subcommand(1);

  CommonArgs train_args, baseline_args, eval_args, distal_args, subgoal_args;
  std::string resume_path, snapshot_path, baseline_snapshot_path;
  double goal_reward = -1.0;
  int eval_episodes = -1;
  double eval_epsilon = -1.0;

  CLI::App* train = app.add_subcommand("train", "train the successor agent");
  train_args.attach(train, true);
  train->add_option("--resume", resume_path, "snapshot to resume from");

  CLI::App* baseline = app.add_subcommand("baseline", "train the Q-learning comparison agent");
  baseline_args.attach(baseline, true);
  std::string baseline_resume;
  baseline->add_option("--resume", baseline_resume, "snapshot to resume from");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a trained snapshot");
  eval_args.attach(eval, false);
  eval->add_option("--snapshot", snapshot_path, "snapshot to evaluate")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes");
  eval->add_option("--epsilon", eval_epsilon, "evaluation epsilon");

  CLI::App* distal = app.add_subcommand("distal", "retrain w after a distal reward change");
  distal_args.attach(distal, false);
  distal->add_option("--snapshot", snapshot_path, "trained snapshot")->required();
  distal->add_option("--baseline-snapshot", baseline_snapshot_path,
                     "baseline snapshot for the side-by-side retraining");
  distal->add_option("--goal-reward", goal_reward, "new goal reward (default 3.0)");

  CLI::App* subgoals = app.add_subcommand("subgoals", "extract bottleneck states from the SR");
  subgoal_args.attach(subgoals, false);
  std::string subgoal_snapshot;
  subgoals->add_option("--snapshot", subgoal_snapshot,
                       "trained snapshot (otherwise pretrains under a random policy)");

  CLI::App* oracle = app.add_subcommand("oracle-check", "run the consistency oracle suites");
  (void)oracle;

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (train->parsed()) {
      run_train_experiment(train_args.resolve(), resume_path, std::cout);
    } else if (baseline->parsed()) {
      run_baseline_experiment(baseline_args.resolve(), baseline_resume, std::cout);
    } else if (eval->parsed()) {
      ExperimentConfig cfg = eval_args.resolve();
      if (eval_episodes > 0) cfg.eval.episodes = eval_episodes;
      if (eval_epsilon >= 0.0) cfg.eval.epsilon = eval_epsilon;
      validate_config(cfg);
      run_eval_experiment(cfg, snapshot_path, std::cout);
    } else if (distal->parsed()) {
      ExperimentConfig cfg = distal_args.resolve();
      if (goal_reward >= 0.0) cfg.distal.goal_reward = goal_reward;
      run_distal_experiment(cfg, snapshot_path, baseline_snapshot_path, std::cout);
    } else if (subgoals->parsed()) {
      run_subgoals_experiment(subgoal_args.resolve(), subgoal_snapshot, std::cout);
    } else if (oracle->parsed()) {
      return run_oracle_check(std::cout) ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrCode::BadArgs ? 2 : 1;
  }
  return 0;
}

}  // namespace dsr
