#include "dsr/agent.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dsr/error.hpp"
#include "dsr/kernels.hpp"
#include "dsr/tabular.hpp"

namespace dsr {

double epsilon_at(const EpsilonSchedule& s, long long step) {
  if (step <= 0) return s.start;
  if (step >= s.anneal_steps) return s.end;
  const double frac = static_cast<double>(step) / static_cast<double>(s.anneal_steps);
  return s.start + frac * (s.end - s.start);
}

long long reward_sample_budget(const TrainConfig& cfg, long long episode) {
  double b = cfg.reward_sample_init;
  for (long long k = 0; k < episode && b >= 1.0; ++k) b *= cfg.reward_sample_factor;
  const long long value = static_cast<long long>(std::floor(b));
  return std::max(cfg.reward_sample_floor, value);
}

ObservationCache::ObservationCache(const GridMap& map) {
  width_ = map.width;
  obs_dim_ = observation_size(map);
  index_.assign(map.tiles.size(), -1);
  int count = 0;
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c)
      if (map.at(r, c) != Tile::Wall) index_[static_cast<std::size_t>(r) * width_ + c] = count++;
  data_.resize(static_cast<std::size_t>(count) * obs_dim_);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      const int id = index_[static_cast<std::size_t>(r) * width_ + c];
      if (id < 0) continue;
      EnvState st{{r, c}, 0, false};
      const Observation obs = encode_observation(map, st);
      std::copy(obs.data.begin(), obs.data.end(),
                data_.begin() + static_cast<std::size_t>(id) * obs_dim_);
    }
  mean_.assign(obs_dim_, 0.0);
  for (int id = 0; id < count; ++id)
    for (std::size_t j = 0; j < obs_dim_; ++j) mean_[j] += data_[id * obs_dim_ + j];
  for (double& v : mean_) v /= static_cast<double>(count);
  for (int id = 0; id < count; ++id)
    for (std::size_t j = 0; j < obs_dim_; ++j) data_[id * obs_dim_ + j] -= mean_[j];
}

Action select_action(const ModelParams& params, const double* obs, double epsilon, Rng& rng,
                     Scratch& scratch) {
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrCode::RangeError, "epsilon out of [0,1]");
  if (rng.uniform() < epsilon) return static_cast<Action>(rng.uniform_int(kNumActions));
  const auto q = q_values(params, obs, scratch);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (q[a] > q[best]) best = a;
  return static_cast<Action>(best);
}

TrainStepResult train_step(ModelParams& params, OptimizerState& opt, const ReplayBuffer& buffer,
                           const ObservationCache& cache, const TrainConfig& cfg,
                           long long& reward_budget, Rng& rng, TrainerWorkspace& ws) {
  require(buffer.size() >= cfg.batch_size, ErrCode::InsufficientData,
          "replay buffer smaller than one batch");
  TrainStepResult result;

  // Phase 1: reward + reconstruction, prioritized sampling, budget-limited.
  const long long want = std::min<long long>(reward_budget, cfg.batch_size);
  if (want > 0) {
    reward_budget -= want;
    const auto batch = buffer.sample(static_cast<std::size_t>(want),
                                     SampleMode::RewardPrioritized, cfg.salient_sample_prob, rng);
    ws.reward_batch.clear();
    for (const CellTransition& t : batch)
      ws.reward_batch.push_back({cache.obs(t.to), t.reward});
    const LossWeights weights{cfg.loss_weight_r, cfg.loss_weight_a};
    result.reward_loss =
        grad_reward_phase(params, ws.reward_batch, weights, ws.reward_grads, ws.scratch);
    apply_reward_phase(params, ws.reward_grads, opt);
    result.reward_phase_ran = true;
  }

  // Phase 2: successor branch only.
  const auto batch =
      cfg.sr_salient_prob > 0.0
          ? buffer.sample(cfg.batch_size, SampleMode::RewardPrioritized, cfg.sr_salient_prob, rng)
          : buffer.sample(cfg.batch_size, SampleMode::Uniform, 0.0, rng);
  ws.sr_batch.clear();
  for (const CellTransition& t : batch)
    ws.sr_batch.push_back(
        {cache.obs(t.from), t.action, cache.obs(t.to), t.terminal && !cfg.sr_ignore_terminal});
  result.loss_m =
      grad_sr_phase(params, ws.sr_batch, cfg.gamma, ws.sr_grads, ws.scratch, cfg.sr_bootstrap);
  apply_sr_phase(params, ws.sr_grads, opt);
  return result;
}

TrainResult run_training(const GridMap& map, const TrainConfig& cfg, const AgentSnapshot* resume,
                         const EvalHook& on_eval) {
  const ObservationCache cache(map);
  TrainResult out;

  Rng rng(derive_seed(cfg.seed, 0));
  ModelParams params;
  OptimizerState opt;
  ReplayBuffer buffer(cfg.replay_capacity, map.rewards.step_penalty);
  long long global_step = 0;
  long long episode = 0;

  if (resume != nullptr) {
    require(parse_map(resume->map_text, resume->rewards).same_topology(map),
            ErrCode::TopologyChanged, "snapshot belongs to a different map");
    params = resume->params;
    opt = resume->opt;
    buffer.restore(resume->replay_main, resume->replay_salient);
    rng.set_state(resume->rng_state);
    global_step = resume->global_step;
    episode = resume->episode;
  } else {
    params = init_params(cache.obs_dim(), cfg.hidden_dim, cfg.feature_dim,
                         derive_seed(cfg.seed, 1));
    opt = make_optimizer(params, cfg.lr, cfg.momentum);
  }

  TrainerWorkspace ws;
  ws.reward_grads = make_reward_grads(params);
  ws.sr_grads = make_sr_grads(params);

  bool stop = false;
  while (!stop && episode < cfg.max_episodes && global_step < cfg.max_env_steps) {
    EnvState state = reset(map, rng);
    long long reward_budget = reward_sample_budget(cfg, episode);

    EpisodeRow row;
    row.episode = episode;
    row.eps = epsilon_at(cfg.epsilon, cfg.epsilon_per_episode ? episode : global_step);
    double loss_r_sum = 0.0, loss_a_sum = 0.0, loss_m_sum = 0.0;
    long long reward_updates = 0, sr_updates = 0;

    while (!state.terminal) {
      const double eps =
          epsilon_at(cfg.epsilon, cfg.epsilon_per_episode ? episode : global_step);
      const Cell from = state.agent;
      const Action a = select_action(params, cache.obs(from), eps, rng, ws.scratch);
      const StepResult sr = step(state, map, a, cfg.step_limit);
      buffer.add({from, static_cast<int>(a), sr.reward, state.agent, sr.terminal});
      row.reward += sr.reward;
      ++row.steps;
      ++global_step;

      if (buffer.size() >= cfg.batch_size && global_step % cfg.update_period == 0) {
        const TrainStepResult ts =
            train_step(params, opt, buffer, cache, cfg, reward_budget, rng, ws);
        if (ts.reward_phase_ran) {
          loss_r_sum += ts.reward_loss.loss_r;
          loss_a_sum += ts.reward_loss.loss_a;
          ++reward_updates;
        }
        loss_m_sum += ts.loss_m;
        ++sr_updates;
      }
      if (global_step % cfg.target_sync_interval == 0) sync_target(params);
    }

    row.loss_r = reward_updates > 0 ? loss_r_sum / reward_updates : 0.0;
    row.loss_a = reward_updates > 0 ? loss_a_sum / reward_updates : 0.0;
    row.loss_m = sr_updates > 0 ? loss_m_sum / sr_updates : 0.0;
    out.episodes.push_back(row);
    ++episode;

    if (cfg.eval_interval_episodes > 0 && episode % cfg.eval_interval_episodes == 0) {
      const EvalResult ev = evaluate_model(map, params, cfg.eval_episodes, cfg.eval_epsilon,
                                           derive_seed(cfg.seed, 0x9e90 + episode),
                                           cfg.step_limit);
      EvalRow evr{episode, global_step, ev.mean_reward, ev.std_reward};
      out.evals.push_back(evr);
      if (on_eval && on_eval(evr)) stop = true;
    }
  }

  out.snapshot.map_text = render_map(map);
  out.snapshot.rewards = map.rewards;
  out.snapshot.params = std::move(params);
  out.snapshot.opt = std::move(opt);
  out.snapshot.replay_main = buffer.main_contents();
  out.snapshot.replay_salient = buffer.salient_contents();
  out.snapshot.rng_state = rng.state();
  out.snapshot.global_step = global_step;
  out.snapshot.episode = episode;
  return out;
}

EvalResult evaluate_policy(const GridMap& map, const PolicyFn& policy, int episodes,
                           double epsilon, std::uint64_t seed, int step_limit) {
  require(episodes >= 1, ErrCode::RangeError, "evaluation needs at least one episode");
  Rng rng(derive_seed(seed, 0xe7a1));
  double sum = 0.0, sumsq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    EnvState state = reset(map, rng);
    double ret = 0.0;
    while (!state.terminal) {
      Action a;
      if (epsilon > 0.0 && rng.uniform() < epsilon)
        a = static_cast<Action>(rng.uniform_int(kNumActions));
      else
        a = policy(map, state);
      ret += step(state, map, a, step_limit).reward;
    }
    sum += ret;
    sumsq += ret * ret;
  }
  EvalResult out;
  out.mean_reward = sum / episodes;
  out.std_reward = std::sqrt(std::max(0.0, sumsq / episodes - out.mean_reward * out.mean_reward));
  return out;
}

PolicyFn model_policy(const ModelParams& params, const ObservationCache& cache) {
  auto scratch = std::make_shared<Scratch>();
  return [&params, &cache, scratch](const GridMap&, const EnvState& state) {
    const auto q = q_values(params, cache.obs(state.agent), *scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    return static_cast<Action>(best);
  };
}

EvalResult evaluate_model(const GridMap& map, const ModelParams& params, int episodes,
                          double epsilon, std::uint64_t seed, int step_limit) {
  const ObservationCache cache(map);
  return evaluate_policy(map, model_policy(params, cache), episodes, epsilon, seed, step_limit);
}

DistalResult distal_reward_adapt(const AgentSnapshot& snapshot, const GridMap& new_map,
                                 const DistalConfig& cfg) {
  const GridMap old_map = parse_map(snapshot.map_text, snapshot.rewards);
  require(old_map.same_topology(new_map), ErrCode::TopologyChanged,
          "distal adaptation requires an unchanged map layout");

  const ObservationCache cache(new_map);
  const TabularModel model = build_transition_model(new_map);

  ModelParams params = snapshot.params;  // theta, alpha, theta~ frozen; only w moves
  Scratch scratch;

  // Frozen greedy policy, lifted into a tabular policy for the oracle.
  PolicyTable frozen;
  frozen.n_states = model.n_states;
  frozen.pi.assign(static_cast<std::size_t>(model.n_states) * kNumActions, 0.0);
  for (int s = 0; s < model.n_states; ++s) {
    const auto q = q_values(params, cache.obs(model.cells[s]), scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    frozen.row(s)[best] = 1.0;
  }

  DistalResult result;
  const Cell start = origin_cell(new_map);
  result.start_state = model.id_of(start);
  {
    const auto q = q_values(params, cache.obs(start), scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    result.tracked_action = best;
  }
  const QTable oracle = q_from_sr(sr_closed_form(model, frozen, cfg.gamma), model.reward);
  result.target_q = oracle.at(result.start_state, result.tracked_action);

  // Frozen features: phi per cell and m(start, a*) never change, so the
  // tracked Q is a single dot product per update.
  std::vector<Vec> phi_of_state(model.n_states);
  for (int s = 0; s < model.n_states; ++s)
    phi_of_state[s] = Vec(forward_features(params, cache.obs(model.cells[s]), scratch));
  const Vec m_start =
      forward_successor(params, phi_of_state[result.start_state], result.tracked_action);

  Rng rng(derive_seed(cfg.seed, 0xd157));
  ReplayBuffer fresh(static_cast<std::size_t>(std::max<long long>(cfg.max_env_steps, 1)),
                     new_map.rewards.step_penalty);
  Vec w_grad(params.w.size());
  Vec w_vel(params.w.size(), 0.0);
  const auto& k = kernels::ops();

  EnvState state = reset(new_map, rng);
  long long env_steps = 0;
  long long updates = 0;
  while (env_steps < cfg.max_env_steps) {
    if (state.terminal) state = reset(new_map, rng);
    const Cell from = state.agent;
    const Action a = select_action(params, cache.obs(from), cfg.act_epsilon, rng, scratch);
    const StepResult sr = step(state, new_map, a, cfg.step_limit);
    fresh.add({from, static_cast<int>(a), sr.reward, state.agent, sr.terminal});
    ++env_steps;

    if (fresh.size() >= cfg.batch_size) {
      const auto batch = fresh.sample(cfg.batch_size, SampleMode::RewardPrioritized,
                                      cfg.salient_sample_prob, rng);
      std::fill(w_grad.begin(), w_grad.end(), 0.0);
      double loss = 0.0;
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      for (const CellTransition& t : batch) {
        const Vec& phi = phi_of_state[model.id_of(t.to)];
        const double err = k.dot(params.w.data(), phi.data(), phi.size()) - t.reward;
        loss += err * err;
        k.axpy(2.0 * err * inv_b, phi.data(), w_grad.data(), phi.size());
      }
      k.momentum_update(params.w.data(), w_vel.data(), w_grad.data(), params.w.size(),
                        cfg.momentum, cfg.lr);
      ++updates;
      result.rows.push_back({updates, env_steps,
                             k.dot(m_start.data(), params.w.data(), params.w.size()),
                             loss * inv_b});
    }
  }

  // First step after which the tracked Q stays inside the tolerance band.
  const double tol = cfg.tolerance * std::fabs(result.target_q);
  long long steps = -1, ups = -1;
  for (auto it = result.rows.rbegin(); it != result.rows.rend(); ++it) {
    if (std::fabs(it->q_start - result.target_q) <= tol) {
      steps = it->env_steps;
      ups = it->updates;
    } else {
      break;
    }
  }
  result.steps_to_tol = steps;
  result.updates_to_tol = ups;
  result.converged =
      !result.rows.empty() && std::fabs(result.rows.back().q_start - result.target_q) <= tol;
  return result;
}

}  // namespace dsr
