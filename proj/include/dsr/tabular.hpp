#pragma once

#include <cstddef>

#include "dsr/gridworld.hpp"
#include "dsr/vec.hpp"

namespace dsr {

/// Action-conditioned successor table M(s,a,s'): expected discounted future
/// occupancy, including the indicator of the current state at t=0.
struct SRTable {
  int n_states = 0;
  double gamma = 0.0;
  Vec m;  // [s][a][s'] flattened

  double at(int s, int a, int sp) const {
    return m[(static_cast<std::size_t>(s) * kNumActions + a) * n_states + sp];
  }
  double* row(int s, int a) {
    return m.data() + (static_cast<std::size_t>(s) * kNumActions + a) * n_states;
  }
  const double* row(int s, int a) const {
    return m.data() + (static_cast<std::size_t>(s) * kNumActions + a) * n_states;
  }
};

struct PolicyTable {
  int n_states = 0;
  Vec pi;  // [s][a], rows sum to 1

  double at(int s, int a) const { return pi[static_cast<std::size_t>(s) * kNumActions + a]; }
  double* row(int s) { return pi.data() + static_cast<std::size_t>(s) * kNumActions; }
  const double* row(int s) const { return pi.data() + static_cast<std::size_t>(s) * kNumActions; }
};

PolicyTable uniform_policy(int n_states);

struct QTable {
  int n_states = 0;
  Vec q;  // [s][a]

  double at(int s, int a) const { return q[static_cast<std::size_t>(s) * kNumActions + a]; }
  double& at(int s, int a) { return q[static_cast<std::size_t>(s) * kNumActions + a]; }
};

/// Exact SR for a fixed policy via one dense linear solve of the recursion
/// M(s,a,.) = e_s + gamma * sum_{s'} T(s'|s,a) sum_{a'} pi(a'|s') M(s',a',.),
/// with terminal states pinned to their indicator.
SRTable sr_closed_form(const TabularModel& model, const PolicyTable& policy, double gamma);

/// Max-norm residual of the SR recursion above; the closed form satisfies it
/// to solver precision.
double sr_bellman_residual(const TabularModel& model, const PolicyTable& policy,
                           const SRTable& table);

enum class TdMode {
  /// Bootstraps on the sampled next action of the trajectory.
  SampledNextAction,
  /// Bootstraps on the policy expectation over next actions; deterministic
  /// given the visit sequence, so it converges geometrically to the fixed
  /// point shared with sr_closed_form.
  ExpectedPolicy,
};

struct SrTransition {
  int state = 0;
  int action = 0;
  int next_state = 0;
  int next_action = 0;  // used by SampledNextAction; -1 when next is terminal
  bool next_terminal = false;
};

/// Fresh table with terminal rows pinned to their indicators (the TD update
/// bootstraps through them).
SRTable sr_table_init(const TabularModel& model, double gamma);

/// One TD(0) pass over the given transitions, in order.
void sr_td_sweep(SRTable& table, const std::vector<SrTransition>& transitions,
                 const PolicyTable& policy, double gamma, double lr,
                 TdMode mode = TdMode::SampledNextAction);

/// Q(s,a) = sum_{s'} M(s,a,s') R(s').
QTable q_from_sr(const SRTable& table, const Vec& reward);

/// Optimal Q via value iteration, stopped when the Bellman residual
/// max-norm drops to tol. Follows the convention that the return counts
/// rewards from the first transition onward; terminal states have Q = 0.
QTable value_iteration(const TabularModel& model, double gamma, double tol);

double bellman_residual(const TabularModel& model, const QTable& q, double gamma);

/// Policy evaluation in the discounted-occupancy convention used by
/// q_from_sr: the return credits the reward received at the current state
/// (the t=0 term), so Q(s,a) = R(s) + gamma * E[Q(s',a')] and terminal
/// states have Q = R(s). Solved in V-space by a dense LU, which keeps the
/// route independent of sr_closed_form's (S*A)-space solve.
QTable policy_evaluation_occupancy(const TabularModel& model, const PolicyTable& policy,
                                   double gamma);

/// Deterministic greedy policy; ties break toward the lowest action index.
PolicyTable greedy_policy(const QTable& q);

int greedy_action(const QTable& q, int s);

/// Expected undiscounted episode return of a fixed policy from the uniform
/// start distribution, by exact rollout of its greedy choices.
double expected_return_greedy(const GridMap& map, const TabularModel& model, const QTable& q,
                              int step_limit);

}  // namespace dsr
