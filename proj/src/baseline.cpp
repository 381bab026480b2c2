#include "dsr/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "dsr/error.hpp"
#include "dsr/kernels.hpp"
#include "dsr/tabular.hpp"

namespace dsr {

namespace {

void init_dense_uniform(Dense& d, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(d.in));
  for (double& v : d.w) v = rng.uniform_range(-bound, bound);
  for (double& v : d.b) v = 0.0;
}

void zero(Dense& d) {
  std::fill(d.w.begin(), d.w.end(), 0.0);
  std::fill(d.b.begin(), d.b.end(), 0.0);
}

}  // namespace

BaselineParams baseline_init(std::size_t obs_dim, std::size_t hidden, std::size_t feature_dim,
                             std::uint64_t seed) {
  require(obs_dim >= 1 && hidden >= 1 && feature_dim >= 1, ErrCode::BadSpec,
          "layer sizes must be positive");
  BaselineParams p;
  p.obs_dim = obs_dim;
  p.hidden = hidden;
  p.feature_dim = feature_dim;
  p.trunk.l1 = Dense(obs_dim, hidden);
  p.trunk.l2 = Dense(hidden, hidden);
  p.trunk.l3 = Dense(hidden + obs_dim, feature_dim);
  p.q = Dense(feature_dim, kNumActions);
  Rng rng(derive_seed(seed, 0xb5));
  init_dense_uniform(p.trunk.l1, rng);
  init_dense_uniform(p.trunk.l2, rng);
  init_dense_uniform(p.trunk.l3, rng);
  init_dense_uniform(p.q, rng);
  p.trunk_target = p.trunk;
  p.q_target = p.q;
  return p;
}

void baseline_sync_target(BaselineParams& p) {
  p.trunk_target = p.trunk;
  p.q_target = p.q;
}

std::array<double, kNumActions> baseline_q(const BaselineParams& p, const double* obs,
                                           Scratch& s) {
  s.ensure_dims(p.obs_dim, p.hidden, p.feature_dim);
  trunk_forward(p.trunk, obs, s);
  std::array<double, kNumActions> q{};
  dense_forward(p.q, s.phi.data(), q.data());
  return q;
}

BaselineGrads make_baseline_grads(const BaselineParams& p) {
  BaselineGrads g;
  g.trunk.l1 = Dense(p.trunk.l1.in, p.trunk.l1.out);
  g.trunk.l2 = Dense(p.trunk.l2.in, p.trunk.l2.out);
  g.trunk.l3 = Dense(p.trunk.l3.in, p.trunk.l3.out);
  g.q = Dense(p.q.in, p.q.out);
  return g;
}

namespace {

double target_value(const BaselineParams& p, const QSample& sample, double gamma, Scratch& s) {
  if (sample.terminal) return sample.reward;
  trunk_forward(p.trunk_target, sample.next_obs, s);
  Vec q(kNumActions);
  dense_forward(p.q_target, s.phi.data(), q.data());
  double best = q[0];
  for (int a = 1; a < kNumActions; ++a) best = std::max(best, q[a]);
  return sample.reward + gamma * best;
}

}  // namespace

double grad_q_phase(const BaselineParams& p, std::span<const QSample> batch, double gamma,
                    BaselineGrads& grads, Scratch& s) {
  require(!batch.empty(), ErrCode::EmptyBatch, "q phase needs a nonempty batch");
  s.ensure_dims(p.obs_dim, p.hidden, p.feature_dim);
  zero(grads.trunk.l1);
  zero(grads.trunk.l2);
  zero(grads.trunk.l3);
  zero(grads.q);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Vec qout(kNumActions), dq(kNumActions);
  for (const QSample& sample : batch) {
    require(sample.action >= 0 && sample.action < kNumActions, ErrCode::BadAction,
            "action index out of range");
    const double y = target_value(p, sample, gamma, s);
    trunk_forward(p.trunk, sample.obs, s);
    dense_forward(p.q, s.phi.data(), qout.data());
    const double err = qout[sample.action] - y;
    loss += err * err;

    std::fill(dq.begin(), dq.end(), 0.0);
    dq[sample.action] = 2.0 * err * inv_b;
    dense_backward(p.q, s.phi.data(), dq.data(), grads.q, s.dphi.data());
    trunk_backward(p.trunk, sample.obs, s.dphi, grads.trunk, s);
  }
  return loss * inv_b;
}

double q_phase_loss(const BaselineParams& p, std::span<const QSample> batch, double gamma,
                    Scratch& s) {
  require(!batch.empty(), ErrCode::EmptyBatch, "q phase needs a nonempty batch");
  s.ensure_dims(p.obs_dim, p.hidden, p.feature_dim);
  double loss = 0.0;
  Vec qout(kNumActions);
  for (const QSample& sample : batch) {
    const double y = target_value(p, sample, gamma, s);
    trunk_forward(p.trunk, sample.obs, s);
    dense_forward(p.q, s.phi.data(), qout.data());
    const double err = qout[sample.action] - y;
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

BaselineOpt make_baseline_optimizer(const BaselineParams& p, double lr, double momentum) {
  BaselineOpt o;
  o.lr = lr;
  o.momentum = momentum;
  o.trunk.l1 = Dense(p.trunk.l1.in, p.trunk.l1.out);
  o.trunk.l2 = Dense(p.trunk.l2.in, p.trunk.l2.out);
  o.trunk.l3 = Dense(p.trunk.l3.in, p.trunk.l3.out);
  o.q = Dense(p.q.in, p.q.out);
  return o;
}

namespace {

void momentum_step(Vec& p, Vec& v, const Vec& g, double lr, double mu) {
  kernels::ops().momentum_update(p.data(), v.data(), g.data(), p.size(), mu, lr);
}
void momentum_step(Dense& p, Dense& v, const Dense& g, double lr, double mu) {
  momentum_step(p.w, v.w, g.w, lr, mu);
  momentum_step(p.b, v.b, g.b, lr, mu);
}

}  // namespace

void apply_q_phase(BaselineParams& p, const BaselineGrads& g, BaselineOpt& opt) {
  momentum_step(p.trunk.l1, opt.trunk.l1, g.trunk.l1, opt.lr, opt.momentum);
  momentum_step(p.trunk.l2, opt.trunk.l2, g.trunk.l2, opt.lr, opt.momentum);
  momentum_step(p.trunk.l3, opt.trunk.l3, g.trunk.l3, opt.lr, opt.momentum);
  momentum_step(p.q, opt.q, g.q, opt.lr, opt.momentum);
}

namespace {

Action baseline_select(const BaselineParams& p, const double* obs, double eps, Rng& rng,
                       Scratch& s) {
  if (rng.uniform() < eps) return static_cast<Action>(rng.uniform_int(kNumActions));
  const auto q = baseline_q(p, obs, s);
  int best = 0;
  for (int a = 1; a < kNumActions; ++a)
    if (q[a] > q[best]) best = a;
  return static_cast<Action>(best);
}

}  // namespace

BaselineTrainResult run_baseline_training(const GridMap& map, const TrainConfig& cfg,
                                          const BaselineSnapshot* resume,
                                          const EvalHook& on_eval) {
  const ObservationCache cache(map);
  BaselineTrainResult out;

  Rng rng(derive_seed(cfg.seed, 0));
  BaselineParams params;
  BaselineOpt opt;
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
    params = baseline_init(cache.obs_dim(), cfg.hidden_dim, cfg.feature_dim,
                           derive_seed(cfg.seed, 2));
    opt = make_baseline_optimizer(params, cfg.lr, cfg.momentum);
  }

  Scratch scratch;
  BaselineGrads grads = make_baseline_grads(params);
  std::vector<QSample> batch;

  bool stop = false;
  while (!stop && episode < cfg.max_episodes && global_step < cfg.max_env_steps) {
    EnvState state = reset(map, rng);
    EpisodeRow row;
    row.episode = episode;
    row.eps = epsilon_at(cfg.epsilon, cfg.epsilon_per_episode ? episode : global_step);
    double loss_sum = 0.0;
    long long updates = 0;

    while (!state.terminal) {
      const double eps =
          epsilon_at(cfg.epsilon, cfg.epsilon_per_episode ? episode : global_step);
      const Cell from = state.agent;
      const Action a = baseline_select(params, cache.obs(from), eps, rng, scratch);
      const StepResult sr = step(state, map, a, cfg.step_limit);
      buffer.add({from, static_cast<int>(a), sr.reward, state.agent, sr.terminal});
      row.reward += sr.reward;
      ++row.steps;
      ++global_step;

      if (buffer.size() >= cfg.batch_size && global_step % cfg.update_period == 0) {
        const auto sampled = buffer.sample(cfg.batch_size, SampleMode::Uniform, 0.0, rng);
        batch.clear();
        for (const CellTransition& t : sampled)
          batch.push_back({cache.obs(t.from), t.action, t.reward, cache.obs(t.to), t.terminal});
        loss_sum += grad_q_phase(params, batch, cfg.gamma, grads, scratch);
        apply_q_phase(params, grads, opt);
        ++updates;
      }
      if (global_step % cfg.target_sync_interval == 0) baseline_sync_target(params);
    }

    row.loss_m = updates > 0 ? loss_sum / updates : 0.0;
    out.episodes.push_back(row);
    ++episode;

    if (cfg.eval_interval_episodes > 0 && episode % cfg.eval_interval_episodes == 0) {
      const EvalResult ev =
          evaluate_baseline(map, params, cfg.eval_episodes, cfg.eval_epsilon,
                            derive_seed(cfg.seed, 0x9e90 + episode), cfg.step_limit);
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

EvalResult evaluate_baseline(const GridMap& map, const BaselineParams& params, int episodes,
                             double epsilon, std::uint64_t seed, int step_limit) {
  const ObservationCache cache(map);
  auto scratch = std::make_shared<Scratch>();
  PolicyFn policy = [&params, &cache, scratch](const GridMap&, const EnvState& state) {
    const auto q = baseline_q(params, cache.obs(state.agent), *scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    return static_cast<Action>(best);
  };
  return evaluate_policy(map, policy, episodes, epsilon, seed, step_limit);
}

DistalResult baseline_distal_retrain(const BaselineSnapshot& snapshot, const GridMap& new_map,
                                     const DistalConfig& cfg, const TrainConfig& train_cfg) {
  const GridMap old_map = parse_map(snapshot.map_text, snapshot.rewards);
  require(old_map.same_topology(new_map), ErrCode::TopologyChanged,
          "distal adaptation requires an unchanged map layout");

  const ObservationCache cache(new_map);
  const TabularModel model = build_transition_model(new_map);
  BaselineParams params = snapshot.params;
  BaselineOpt opt = snapshot.opt;
  Scratch scratch;

  PolicyTable frozen;
  frozen.n_states = model.n_states;
  frozen.pi.assign(static_cast<std::size_t>(model.n_states) * kNumActions, 0.0);
  for (int s = 0; s < model.n_states; ++s) {
    const auto q = baseline_q(params, cache.obs(model.cells[s]), scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    frozen.row(s)[best] = 1.0;
  }

  DistalResult result;
  const Cell start = origin_cell(new_map);
  result.start_state = model.id_of(start);
  {
    const auto q = baseline_q(params, cache.obs(start), scratch);
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (q[a] > q[best]) best = a;
    result.tracked_action = best;
  }
  // The baseline estimates the bootstrap-convention value, which drops the
  // t=0 reward term of the occupancy form: Q_std = (Q_occ - R(s)) / gamma.
  const QTable occ = policy_evaluation_occupancy(model, frozen, cfg.gamma);
  result.target_q = (occ.at(result.start_state, result.tracked_action) -
                     model.reward[result.start_state]) /
                    cfg.gamma;

  Rng rng(derive_seed(cfg.seed, 0xba5e));
  ReplayBuffer fresh(static_cast<std::size_t>(std::max<long long>(cfg.max_env_steps, 1)),
                     new_map.rewards.step_penalty);
  BaselineGrads grads = make_baseline_grads(params);
  std::vector<QSample> batch;

  EnvState state = reset(new_map, rng);
  long long env_steps = 0;
  long long updates = 0;
  while (env_steps < cfg.max_env_steps) {
    if (state.terminal) state = reset(new_map, rng);
    const Cell from = state.agent;
    const Action a = baseline_select(params, cache.obs(from), cfg.act_epsilon, rng, scratch);
    const StepResult sr = step(state, new_map, a, cfg.step_limit);
    fresh.add({from, static_cast<int>(a), sr.reward, state.agent, sr.terminal});
    ++env_steps;

    if (fresh.size() >= cfg.batch_size) {
      const auto sampled = fresh.sample(cfg.batch_size, SampleMode::Uniform, 0.0, rng);
      batch.clear();
      for (const CellTransition& t : sampled)
        batch.push_back({cache.obs(t.from), t.action, t.reward, cache.obs(t.to), t.terminal});
      const double loss = grad_q_phase(params, batch, cfg.gamma, grads, scratch);
      apply_q_phase(params, grads, opt);
      ++updates;
      if (env_steps % train_cfg.target_sync_interval == 0) baseline_sync_target(params);
      const auto q = baseline_q(params, cache.obs(start), scratch);
      result.rows.push_back({updates, env_steps, q[result.tracked_action], loss});
    }
  }

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

void for_each_tensor(BaselineParams& p,
                     const std::function<void(const std::string&, Vec&)>& fn) {
  auto dense = [&](const std::string& prefix, Dense& d) {
    fn(prefix + ".w", d.w);
    fn(prefix + ".b", d.b);
  };
  dense("trunk.l1", p.trunk.l1);
  dense("trunk.l2", p.trunk.l2);
  dense("trunk.l3", p.trunk.l3);
  dense("q", p.q);
  dense("trunk_target.l1", p.trunk_target.l1);
  dense("trunk_target.l2", p.trunk_target.l2);
  dense("trunk_target.l3", p.trunk_target.l3);
  dense("q_target", p.q_target);
}

void for_each_tensor(BaselineOpt& o, const std::function<void(const std::string&, Vec&)>& fn) {
  auto dense = [&](const std::string& prefix, Dense& d) {
    fn(prefix + ".w", d.w);
    fn(prefix + ".b", d.b);
  };
  dense("vel.trunk.l1", o.trunk.l1);
  dense("vel.trunk.l2", o.trunk.l2);
  dense("vel.trunk.l3", o.trunk.l3);
  dense("vel.q", o.q);
}

}  // namespace dsr
