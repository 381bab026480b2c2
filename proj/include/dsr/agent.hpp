#pragma once

#include <functional>
#include <optional>
#include <string>

#include "dsr/gridworld.hpp"
#include "dsr/nn.hpp"
#include "dsr/replay.hpp"
#include "dsr/rng.hpp"

namespace dsr {

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  long long anneal_steps = 20000;
};

/// Linear interpolation from start to end over anneal_steps, clamped.
double epsilon_at(const EpsilonSchedule& s, long long step);

struct TrainConfig {
  double gamma = 0.99;
  double lr = 2.5e-4;
  double momentum = 0.95;
  std::size_t batch_size = 32;
  long long target_sync_interval = 500;

  /// Probability a prioritized draw comes from the salient-reward store.
  double salient_sample_prob = 0.2;

  /// Salient-store share for successor-phase batches. 0 keeps the plain
  /// uniform draw; positive values mix in goal/water transitions, which are
  /// rare under long episodes yet carry the only episode-terminating
  /// successor targets.
  double sr_salient_prob = 0.0;

  /// Successor bootstrap rule; UniformPolicy learns the random-policy SR
  /// (used when pretraining for subgoal extraction).
  SrBootstrap sr_bootstrap = SrBootstrap::Argmax;

  /// Bootstrap through episode ends instead of truncating there. The
  /// subgoal pipeline wants the non-absorbing random-walk occupancy; goal
  /// absorption would otherwise dominate the successor geometry on small
  /// maps.
  bool sr_ignore_terminal = false;

  /// Per-episode reward-phase sample budget: max(floor, init * factor^k).
  double reward_sample_init = 4000.0;
  double reward_sample_factor = 0.5;
  long long reward_sample_floor = 1;

  int step_limit = 500;
  long long max_env_steps = 100000;
  long long max_episodes = 1000000000;
  std::size_t replay_capacity = 1000000;

  EpsilonSchedule epsilon;
  bool epsilon_per_episode = false;

  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 64;
  double loss_weight_r = 1.0;
  double loss_weight_a = 1.0;

  /// Environment steps between gradient updates (1 = update every step).
  int update_period = 1;

  double eval_epsilon = 0.05;
  long long eval_interval_episodes = 200;
  int eval_episodes = 100;

  std::uint64_t seed = 1;
};

long long reward_sample_budget(const TrainConfig& cfg, long long episode);

/// Pre-encoded network inputs for every non-wall cell of a fixed map. The
/// tile channels are identical in every observation, so the cache centers
/// each input by the state-averaged observation: the network's gradient
/// geometry then reflects what distinguishes states instead of a dominant
/// shared direction. Centering is a fixed, parameter-free transform (a
/// change of variables absorbed by the first-layer bias).
class ObservationCache {
 public:
  explicit ObservationCache(const GridMap& map);

  const double* obs(Cell c) const {
    return data_.data() + static_cast<std::size_t>(index_[flat(c)]) * obs_dim_;
  }
  std::size_t obs_dim() const { return obs_dim_; }
  const Vec& mean_obs() const { return mean_; }

 private:
  std::size_t flat(Cell c) const { return static_cast<std::size_t>(c.row) * width_ + c.col; }
  int width_ = 0;
  std::size_t obs_dim_ = 0;
  std::vector<int> index_;
  Vec data_;
  Vec mean_;
};

/// Epsilon-greedy over Q(s,a) = u_alpha(f_theta(obs), a) . w; greedy ties
/// break toward the lowest action index.
Action select_action(const ModelParams& params, const double* obs, double epsilon, Rng& rng,
                     Scratch& scratch);

struct EpisodeRow {
  long long episode = 0;
  long long steps = 0;
  double reward = 0.0;
  double eps = 0.0;
  double loss_r = 0.0;
  double loss_a = 0.0;
  double loss_m = 0.0;
};

struct EvalRow {
  long long episode = 0;
  long long env_steps = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
};

struct AgentSnapshot {
  std::string map_text;
  MapRewards rewards;
  ModelParams params;
  OptimizerState opt;
  std::vector<CellTransition> replay_main;
  std::vector<CellTransition> replay_salient;
  Rng::State rng_state{};
  long long global_step = 0;
  long long episode = 0;
};

struct TrainResult {
  std::vector<EpisodeRow> episodes;
  std::vector<EvalRow> evals;
  AgentSnapshot snapshot;
};

struct TrainStepResult {
  bool reward_phase_ran = false;
  RewardPhaseLoss reward_loss;
  double loss_m = 0.0;
};

struct TrainerWorkspace {
  Scratch scratch;
  std::vector<RewardSample> reward_batch;
  std::vector<SrSample> sr_batch;
  RewardPhaseGrads reward_grads;
  SrPhaseGrads sr_grads;
};

/// One interleaved update: a momentum step on the reward+reconstruction loss
/// for (theta, w, theta~) from a reward-prioritized batch while the budget
/// lasts, then a momentum step on the successor loss for alpha alone from a
/// uniform batch. Reward phase always runs first.
TrainStepResult train_step(ModelParams& params, OptimizerState& opt, const ReplayBuffer& buffer,
                           const ObservationCache& cache, const TrainConfig& cfg,
                           long long& reward_budget, Rng& rng, TrainerWorkspace& ws);

using EvalHook = std::function<bool(const EvalRow&)>;  // return true to stop training

/// The full interleaved training loop: epsilon-greedy acting, replay
/// storage, two-phase updates, periodic target sync, per-episode metrics,
/// periodic greedy evaluations. Deterministic given (map, config, seed);
/// resuming from a snapshot continues the exact same trajectory.
TrainResult run_training(const GridMap& map, const TrainConfig& cfg,
                         const AgentSnapshot* resume = nullptr, const EvalHook& on_eval = {});

struct EvalResult {
  double mean_reward = 0.0;
  double std_reward = 0.0;
};

using PolicyFn = std::function<Action(const GridMap&, const EnvState&)>;

EvalResult evaluate_policy(const GridMap& map, const PolicyFn& policy, int episodes,
                           double epsilon, std::uint64_t seed, int step_limit);

/// Greedy policy induced by a trained model.
PolicyFn model_policy(const ModelParams& params, const ObservationCache& cache);

EvalResult evaluate_model(const GridMap& map, const ModelParams& params, int episodes,
                          double epsilon, std::uint64_t seed, int step_limit);

struct DistalConfig {
  double gamma = 0.99;
  double lr = 2.5e-4;
  double momentum = 0.95;
  std::size_t batch_size = 32;
  double salient_sample_prob = 0.2;
  double act_epsilon = 0.05;
  int step_limit = 500;
  long long max_env_steps = 20000;
  double tolerance = 0.05;  // relative to the tabular target
  std::uint64_t seed = 1;
};

struct DistalRow {
  long long updates = 0;
  long long env_steps = 0;
  double q_start = 0.0;
  double loss_r = 0.0;
};

struct DistalResult {
  std::vector<DistalRow> rows;
  int start_state = 0;
  int tracked_action = 0;
  double target_q = 0.0;     // tabular value under the frozen policy and new rewards
  long long steps_to_tol = -1;
  long long updates_to_tol = -1;
  bool converged = false;
};

/// Distal-reward adaptation: freezes theta, alpha and theta~, retrains w
/// alone on freshly gathered reward samples from the modified environment,
/// and tracks Q(start, a*) against the tabular value recomputed under the
/// frozen greedy policy. The new map must differ only in reward values.
DistalResult distal_reward_adapt(const AgentSnapshot& snapshot, const GridMap& new_map,
                                 const DistalConfig& cfg);

}  // namespace dsr
