#include "dsr/experiments.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "dsr/error.hpp"
#include "dsr/gradcheck.hpp"
#include "dsr/kernels.hpp"
#include "dsr/maps.hpp"
#include "dsr/metrics.hpp"
#include "dsr/snapshot.hpp"
#include "dsr/tabular.hpp"

namespace dsr {

GridMap experiment_map(const ExperimentConfig& cfg) {
  require(!cfg.map_path.empty(), ErrCode::BadArgs, "no map configured (set map= or pass --map)");
  return load_map_file(cfg.map_path, cfg.map_rewards);
}

void apply_kernel_backend(const std::string& name) {
  kernels::set_backend(kernels::parse_backend(name.c_str()));
}

namespace {

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  require(!ec, ErrCode::IoError, "cannot create output directory " + cfg.out_dir);
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

}  // namespace

void run_train_experiment(const ExperimentConfig& cfg, const std::string& resume_path,
                          std::ostream& log) {
  apply_kernel_backend(cfg.kernel_backend);
  ensure_out_dir(cfg);
  const GridMap map = experiment_map(cfg);

  AgentSnapshot resume;
  const AgentSnapshot* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    resume = load_agent_snapshot(resume_path);
    resume_ptr = &resume;
  }
  const TrainResult result = run_training(map, cfg.train, resume_ptr);

  write_training_csv(out_path(cfg, "training.csv"), result.episodes);
  write_eval_csv(out_path(cfg, "evals.csv"), result.evals);
  save_agent_snapshot(result.snapshot, out_path(cfg, "snapshot.dsr"));

  log << "trained " << result.episodes.size() << " episodes over "
      << result.snapshot.global_step << " env steps (kernels: " << kernels::active_name()
      << ")\n";
  if (!result.evals.empty())
    log << "last eval: mean reward " << format_double(result.evals.back().mean_reward) << " (std "
        << format_double(result.evals.back().std_reward) << ")\n";
  log << "wrote " << out_path(cfg, "training.csv") << ", " << out_path(cfg, "evals.csv") << ", "
      << out_path(cfg, "snapshot.dsr") << "\n";
}

void run_baseline_experiment(const ExperimentConfig& cfg, const std::string& resume_path,
                             std::ostream& log) {
  apply_kernel_backend(cfg.kernel_backend);
  ensure_out_dir(cfg);
  const GridMap map = experiment_map(cfg);

  TrainConfig train = cfg.train;
  train.update_period = cfg.baseline_update_period;

  BaselineSnapshot resume;
  const BaselineSnapshot* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    resume = load_baseline_snapshot(resume_path);
    resume_ptr = &resume;
  }
  const BaselineTrainResult result = run_baseline_training(map, train, resume_ptr);

  write_training_csv(out_path(cfg, "training.csv"), result.episodes);
  write_eval_csv(out_path(cfg, "evals.csv"), result.evals);
  save_baseline_snapshot(result.snapshot, out_path(cfg, "snapshot.dqn"));

  log << "baseline trained " << result.episodes.size() << " episodes over "
      << result.snapshot.global_step << " env steps\n";
  if (!result.evals.empty())
    log << "last eval: mean reward " << format_double(result.evals.back().mean_reward) << "\n";
}

void run_eval_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                         std::ostream& log) {
  apply_kernel_backend(cfg.kernel_backend);
  ensure_out_dir(cfg);

  EvalResult result;
  GridMap map;
  if (snapshot_kind(snapshot_path) == SnapshotKind::Dsr) {
    const AgentSnapshot snap = load_agent_snapshot(snapshot_path);
    map = cfg.map_path.empty() ? parse_map(snap.map_text, snap.rewards) : experiment_map(cfg);
    result = evaluate_model(map, snap.params, cfg.eval.episodes, cfg.eval.epsilon,
                            cfg.train.seed, cfg.train.step_limit);
  } else {
    const BaselineSnapshot snap = load_baseline_snapshot(snapshot_path);
    map = cfg.map_path.empty() ? parse_map(snap.map_text, snap.rewards) : experiment_map(cfg);
    result = evaluate_baseline(map, snap.params, cfg.eval.episodes, cfg.eval.epsilon,
                               cfg.train.seed, cfg.train.step_limit);
  }

  EvalRow row{0, 0, result.mean_reward, result.std_reward};
  write_eval_csv(out_path(cfg, "eval.csv"), {row});
  log << "eval over " << cfg.eval.episodes << " episodes (epsilon "
      << format_double(cfg.eval.epsilon) << "): mean reward "
      << format_double(result.mean_reward) << ", std " << format_double(result.std_reward)
      << "\n";
}

void run_distal_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                           const std::string& baseline_snapshot_path, std::ostream& log) {
  apply_kernel_backend(cfg.kernel_backend);
  ensure_out_dir(cfg);

  const AgentSnapshot snap = load_agent_snapshot(snapshot_path);
  MapRewards changed = snap.rewards;
  changed.goal_reward = cfg.distal.goal_reward;
  const GridMap new_map = parse_map(snap.map_text, changed);

  DistalConfig dcfg;
  dcfg.gamma = cfg.train.gamma;
  dcfg.lr = cfg.distal.lr > 0.0 ? cfg.distal.lr : cfg.train.lr;
  dcfg.momentum = cfg.distal.momentum >= 0.0 ? cfg.distal.momentum : cfg.train.momentum;
  dcfg.batch_size = cfg.train.batch_size;
  dcfg.salient_sample_prob = cfg.train.salient_sample_prob;
  dcfg.act_epsilon = cfg.distal.act_epsilon;
  dcfg.step_limit = cfg.train.step_limit;
  dcfg.max_env_steps = cfg.distal.max_env_steps;
  dcfg.tolerance = cfg.distal.tolerance;
  dcfg.seed = cfg.train.seed;

  const DistalResult result = distal_reward_adapt(snap, new_map, dcfg);
  write_distal_csv(out_path(cfg, "distal.csv"), result);
  log << "goal reward " << format_double(snap.rewards.goal_reward) << " -> "
      << format_double(cfg.distal.goal_reward) << "; tabular target "
      << format_double(result.target_q) << " for action " << result.tracked_action << "\n";
  if (result.converged)
    log << "w-only adaptation reached the 5% band after " << result.steps_to_tol
        << " env steps (" << result.updates_to_tol << " updates)\n";
  else
    log << "w-only adaptation did not reach the tolerance within "
        << cfg.distal.max_env_steps << " env steps\n";

  if (!baseline_snapshot_path.empty()) {
    const BaselineSnapshot bsnap = load_baseline_snapshot(baseline_snapshot_path);
    TrainConfig bt = cfg.train;
    bt.update_period = cfg.baseline_update_period;
    const DistalResult bres = baseline_distal_retrain(bsnap, new_map, dcfg, bt);
    write_distal_csv(out_path(cfg, "distal_baseline.csv"), bres);
    if (bres.converged)
      log << "baseline full retraining reached the band after " << bres.steps_to_tol
          << " env steps\n";
    else
      log << "baseline full retraining did not reach the band within "
          << cfg.distal.max_env_steps << " env steps\n";
  }
}

void run_subgoals_experiment(const ExperimentConfig& cfg, const std::string& snapshot_path,
                             std::ostream& log) {
  apply_kernel_backend(cfg.kernel_backend);
  ensure_out_dir(cfg);

  ModelParams params;
  GridMap map;
  if (!snapshot_path.empty()) {
    const AgentSnapshot snap = load_agent_snapshot(snapshot_path);
    map = cfg.map_path.empty() ? parse_map(snap.map_text, snap.rewards) : experiment_map(cfg);
    params = snap.params;
  } else {
    map = experiment_map(cfg);
    // Successor branch trained under the pure random policy.
    TrainConfig train = cfg.train;
    train.epsilon = {1.0, 1.0, 1};
    train.max_env_steps = cfg.subgoals.train_steps;
    train.eval_interval_episodes = 0;
    train.sr_bootstrap = SrBootstrap::UniformPolicy;
    train.sr_ignore_terminal = true;
    const TrainResult pretrain = run_training(map, train);
    params = pretrain.snapshot.params;
    log << "pretrained successor branch for " << pretrain.snapshot.global_step
        << " random-policy steps\n";
  }

  SubgoalConfig scfg;
  scfg.samples_per_run = cfg.subgoals.samples;
  scfg.sigma = cfg.subgoals.sigma;
  scfg.collapse_duplicates = cfg.subgoals.collapse_duplicates;
  scfg.step_limit = cfg.train.step_limit;
  scfg.threshold =
      cfg.subgoals.threshold == "sign" ? ThresholdMode::Sign : ThresholdMode::Sweep;
  scfg.segments = cfg.subgoals.segments;
  scfg.action_averaged = cfg.subgoals.action_averaged;
  scfg.normalize_samples = cfg.subgoals.normalize;

  const auto ranked = aggregate_topk(map, params, cfg.subgoals.runs, cfg.subgoals.k,
                                     cfg.train.seed, scfg);
  write_subgoals_csv(out_path(cfg, "subgoals.csv"), ranked);
  log << "top-" << cfg.subgoals.k << " subgoal candidates over " << cfg.subgoals.runs
      << " runs:\n";
  for (const SubgoalCandidate& c : ranked)
    log << "  rank " << c.rank << ": cell (" << c.cell.row << "," << c.cell.col << ") on "
        << c.boundary_count << " cut boundaries\n";

  // partition overlay from one more sampling round
  Rng rng(derive_seed(cfg.train.seed, 0x9a9));
  SRSampleSet set = collect_sr_samples(map, params, cfg.subgoals.samples, rng,
                                       cfg.train.step_limit, cfg.subgoals.action_averaged);
  if (cfg.subgoals.collapse_duplicates) set = dedupe_by_state(set);
  if (cfg.subgoals.normalize) set = normalize_samples(set);
  const double sigma =
      cfg.subgoals.sigma > 0.0 ? cfg.subgoals.sigma : median_pairwise_distance(set);
  const AffinityGraph graph = build_affinity(set, sigma);
  const std::vector<int> labels = recursive_cuts(graph, cfg.subgoals.segments);
  std::vector<Cell> subgoal_cells;
  for (const SubgoalCandidate& c : ranked) subgoal_cells.push_back(c.cell);
  const std::string overlay = render_partition(map, graph, labels, subgoal_cells);
  std::ofstream dump(out_path(cfg, "partition.txt"), std::ios::binary);
  require(dump.good(), ErrCode::IoError, "cannot write partition dump");
  dump << overlay;
  log << overlay;
}

namespace {

struct CheckScope {
  std::ostream& log;
  bool& all_ok;

  void operator()(const std::string& name, bool ok, const std::string& detail) const {
    log << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail << "\n";
    all_ok = all_ok && ok;
  }
};

}  // namespace

bool run_oracle_check(std::ostream& log) {
  bool all_ok = true;
  const CheckScope check{log, all_ok};

  // successor recursion and factorization consistency
  {
    double worst_resid = 0.0;
    double worst_q = 0.0;
    for (const char* text : {maps::kCorridor, maps::kOpenRoom5, maps::kTwoRoom,
                             maps::kFourRoom, maps::kTestMaze10}) {
      const GridMap map = parse_map(text);
      const TabularModel model = build_transition_model(map);
      const QTable qstar = value_iteration(model, 0.99, 1e-12);
      for (const PolicyTable& pi : {uniform_policy(model.n_states), greedy_policy(qstar)}) {
        const SRTable sr = sr_closed_form(model, pi, 0.99);
        worst_resid = std::max(worst_resid, sr_bellman_residual(model, pi, sr));
        const QTable via_sr = q_from_sr(sr, model.reward);
        const QTable direct = policy_evaluation_occupancy(model, pi, 0.99);
        for (std::size_t i = 0; i < via_sr.q.size(); ++i)
          worst_q = std::max(worst_q, std::fabs(via_sr.q[i] - direct.q[i]));
      }
    }
    check("sr recursion residual", worst_resid <= 1e-10,
          "max " + format_double(worst_resid) + " (tol 1e-10)");
    check("q factorization vs policy evaluation", worst_q <= 1e-8,
          "max " + format_double(worst_q) + " (tol 1e-8)");
  }

  // gradient checks for both phases
  {
    double worst = 0.0;
    bool structure_ok = true;
    for (std::uint64_t seed : {101, 202, 303}) {
      ModelParams params = init_params(15, 8, 6, seed);
      Rng rng(seed);
      std::vector<Vec> storage;
      for (int i = 0; i < 12; ++i) {
        Vec obs(15, 0.0);
        for (double& v : obs) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        storage.push_back(std::move(obs));
      }
      std::vector<RewardSample> rbatch;
      std::vector<SrSample> sbatch;
      for (int i = 0; i < 6; ++i) {
        rbatch.push_back({storage[i].data(), rng.uniform_range(-1.0, 1.0)});
        sbatch.push_back({storage[i].data(), static_cast<int>(rng.uniform_int(4)),
                          storage[6 + i].data(), i == 5});
      }
      Scratch scratch;
      RewardPhaseGrads rgrads = make_reward_grads(params);
      const LossWeights weights;
      grad_reward_phase(params, rbatch, weights, rgrads, scratch);
      const FdReport rrep = finite_diff_check(
          reward_phase_views(params, rgrads),
          [&] { return reward_phase_loss(params, rbatch, weights, scratch).total; }, 1e-5, 30,
          rng);
      worst = std::max(worst, rrep.max_rel_err);

      SrPhaseGrads sgrads = make_sr_grads(params);
      grad_sr_phase(params, sbatch, 0.99, sgrads, scratch);
      const SrTargets targets = sr_phase_targets(params, sbatch, 0.99, scratch);
      const FdReport srep = finite_diff_check(
          sr_phase_views(params, sgrads),
          [&] { return sr_phase_loss_given_targets(params, sbatch, targets, scratch); }, 1e-5,
          30, rng);
      worst = std::max(worst, srep.max_rel_err);

      // interleaving structure: the sr phase must not move theta/w/decoder
      ModelParams copy = params;
      OptimizerState opt = make_optimizer(copy, 0.01, 0.9);
      apply_sr_phase(copy, sgrads, opt);
      structure_ok = structure_ok && copy.trunk.l1.w == params.trunk.l1.w &&
                     copy.trunk.l3.w == params.trunk.l3.w && copy.w == params.w &&
                     copy.decoder.d2.w == params.decoder.d2.w;
    }
    check("finite-difference gradients", worst <= 1e-4,
          "max rel err " + format_double(worst) + " (tol 1e-4)");
    check("sr phase touches only the successor heads", structure_ok, "bitwise");
  }

  // spectral cut against the exhaustive optimum
  {
    Rng rng(4242);
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 15; ++trial) {
      SRSampleSet set;
      for (int i = 0; i < 10; ++i) {
        SRSample s;
        s.state_id = i;
        s.cell = {0, i};
        s.m = {rng.uniform_range(-1.0, 1.0), rng.uniform_range(-1.0, 1.0),
               rng.uniform_range(-1.0, 1.0)};
        set.samples.push_back(std::move(s));
      }
      const AffinityGraph g = build_affinity(set, median_pairwise_distance(set));
      const CutResult spectral = normalized_cut_partition(g);
      const CutResult brute = brute_force_ncut(g);
      worst_ratio = std::max(worst_ratio, spectral.ncut_value / brute.ncut_value);
    }
    check("spectral vs exhaustive ncut", worst_ratio <= 1.5,
          "worst ratio " + format_double(worst_ratio) + " (tol 1.5)");
  }

  log << (all_ok ? "oracle-check: all suites passed\n" : "oracle-check: FAILURES above\n");
  return all_ok;
}

}  // namespace dsr
