#pragma once

#include "dsr/agent.hpp"
#include "dsr/nn.hpp"

namespace dsr {

/// Comparison agent: the same trunk budget with a direct linear Q head and a
/// target copy, trained by one-step Q-learning on uniform replay.
struct BaselineParams {
  std::size_t obs_dim = 0;
  std::size_t hidden = 0;
  std::size_t feature_dim = 0;
  Trunk trunk;
  Dense q;
  Trunk trunk_target;
  Dense q_target;
};

BaselineParams baseline_init(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim,
                             std::uint64_t seed);

void baseline_sync_target(BaselineParams& p);

std::array<double, kNumActions> baseline_q(const BaselineParams& p, const double* obs,
                                           Scratch& s);

struct QSample {
  const double* obs = nullptr;
  int action = 0;
  double reward = 0.0;
  const double* next_obs = nullptr;
  bool terminal = false;
};

struct BaselineGrads {
  Trunk trunk;
  Dense q;
};
BaselineGrads make_baseline_grads(const BaselineParams& p);

/// Mean squared one-step TD error with targets from the target copy;
/// gradients for the full online network.
double grad_q_phase(const BaselineParams& p, std::span<const QSample> batch, double gamma,
                    BaselineGrads& grads, Scratch& s);

double q_phase_loss(const BaselineParams& p, std::span<const QSample> batch, double gamma,
                    Scratch& s);

struct BaselineOpt {
  double lr = 2.5e-4;
  double momentum = 0.95;
  Trunk trunk;
  Dense q;
};
BaselineOpt make_baseline_optimizer(const BaselineParams& p, double lr, double momentum);

void apply_q_phase(BaselineParams& p, const BaselineGrads& g, BaselineOpt& opt);

struct BaselineSnapshot {
  std::string map_text;
  MapRewards rewards;
  BaselineParams params;
  BaselineOpt opt;
  std::vector<CellTransition> replay_main;
  std::vector<CellTransition> replay_salient;
  Rng::State rng_state{};
  long long global_step = 0;
  long long episode = 0;
};

struct BaselineTrainResult {
  std::vector<EpisodeRow> episodes;  // loss_m column carries the TD loss
  std::vector<EvalRow> evals;
  BaselineSnapshot snapshot;
};

BaselineTrainResult run_baseline_training(const GridMap& map, const TrainConfig& cfg,
                                          const BaselineSnapshot* resume = nullptr,
                                          const EvalHook& on_eval = {});

EvalResult evaluate_baseline(const GridMap& map, const BaselineParams& params, int episodes,
                             double epsilon, std::uint64_t seed, int step_limit);

/// Full retraining of the baseline from its snapshot in an environment with
/// modified rewards, tracking Q(start, a*) against the tabular value of its
/// frozen greedy policy (in the baseline's bootstrap convention).
DistalResult baseline_distal_retrain(const BaselineSnapshot& snapshot, const GridMap& new_map,
                                     const DistalConfig& cfg, const TrainConfig& train_cfg);

void for_each_tensor(BaselineParams& p,
                     const std::function<void(const std::string&, Vec&)>& fn);
void for_each_tensor(BaselineOpt& o, const std::function<void(const std::string&, Vec&)>& fn);

}  // namespace dsr
