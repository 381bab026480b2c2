#include "dsr/tabular.hpp"

#include <algorithm>
#include <cmath>

#include "dsr/error.hpp"
#include "dsr/kernels.hpp"
#include "dsr/linalg.hpp"

namespace dsr {

PolicyTable uniform_policy(int n_states) {
  PolicyTable p;
  p.n_states = n_states;
  p.pi.assign(static_cast<std::size_t>(n_states) * kNumActions, 1.0 / kNumActions);
  return p;
}

SRTable sr_table_init(const TabularModel& model, double gamma) {
  SRTable t;
  t.n_states = model.n_states;
  t.gamma = gamma;
  t.m.assign(static_cast<std::size_t>(model.n_states) * kNumActions * model.n_states, 0.0);
  // The t=0 indicator is always part of the occupancy.
  for (int s = 0; s < model.n_states; ++s)
    for (int a = 0; a < kNumActions; ++a) t.row(s, a)[s] = 1.0;
  return t;
}

SRTable sr_closed_form(const TabularModel& model, const PolicyTable& policy, double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, ErrCode::RangeError, "gamma must lie in [0,1)");
  require(policy.n_states == model.n_states, ErrCode::DimensionMismatch, "policy size");
  const int s_count = model.n_states;
  const std::size_t n = static_cast<std::size_t>(s_count) * kNumActions;

  Mat a = Mat::identity(n);
  for (int s = 0; s < s_count; ++s) {
    if (model.terminal[s]) continue;  // pinned to the indicator row
    for (int act = 0; act < kNumActions; ++act) {
      const std::size_t row = static_cast<std::size_t>(s) * kNumActions + act;
      const int nxt = model.next_of(s, act);
      for (int ap = 0; ap < kNumActions; ++ap) {
        const double w = policy.at(nxt, ap);
        if (w != 0.0)
          a.at(row, static_cast<std::size_t>(nxt) * kNumActions + ap) -= gamma * w;
      }
    }
  }

  const LuFactor f = lu_factor(std::move(a));
  SRTable table;
  table.n_states = s_count;
  table.gamma = gamma;
  table.m.assign(n * s_count, 0.0);
  Vec rhs(n);
  for (int target = 0; target < s_count; ++target) {
    std::fill(rhs.begin(), rhs.end(), 0.0);
    for (int act = 0; act < kNumActions; ++act)
      rhs[static_cast<std::size_t>(target) * kNumActions + act] = 1.0;
    lu_solve_inplace(f, rhs.data());
    for (std::size_t row = 0; row < n; ++row) table.m[row * s_count + target] = rhs[row];
  }
  return table;
}

double sr_bellman_residual(const TabularModel& model, const PolicyTable& policy,
                           const SRTable& table) {
  const int s_count = model.n_states;
  Vec target(s_count);
  double worst = 0.0;
  const auto& k = kernels::ops();
  for (int s = 0; s < s_count; ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      std::fill(target.begin(), target.end(), 0.0);
      target[s] = 1.0;
      if (!model.terminal[s]) {
        const int nxt = model.next_of(s, a);
        for (int ap = 0; ap < kNumActions; ++ap) {
          const double w = policy.at(nxt, ap);
          if (w != 0.0) k.axpy(table.gamma * w, table.row(nxt, ap), target.data(), s_count);
        }
      }
      const double* row = table.row(s, a);
      for (int sp = 0; sp < s_count; ++sp)
        worst = std::max(worst, std::fabs(row[sp] - target[sp]));
    }
  }
  return worst;
}

void sr_td_sweep(SRTable& table, const std::vector<SrTransition>& transitions,
                 const PolicyTable& policy, double gamma, double lr, TdMode mode) {
  require(lr > 0.0 && lr <= 1.0, ErrCode::RangeError, "lr must lie in (0,1]");
  const int s_count = table.n_states;
  Vec target(s_count);
  const auto& k = kernels::ops();
  for (const SrTransition& t : transitions) {
    std::fill(target.begin(), target.end(), 0.0);
    target[t.state] = 1.0;
    if (mode == TdMode::ExpectedPolicy) {
      for (int ap = 0; ap < kNumActions; ++ap) {
        const double w = policy.at(t.next_state, ap);
        if (w != 0.0) k.axpy(gamma * w, table.row(t.next_state, ap), target.data(), s_count);
      }
    } else {
      const int ap = t.next_terminal ? 0 : t.next_action;
      require(ap >= 0 && ap < kNumActions, ErrCode::BadAction, "next_action out of range");
      k.axpy(gamma, table.row(t.next_state, ap), target.data(), s_count);
    }
    double* row = table.row(t.state, t.action);
    for (int sp = 0; sp < s_count; ++sp) row[sp] += lr * (target[sp] - row[sp]);
  }
}

QTable q_from_sr(const SRTable& table, const Vec& reward) {
  require(static_cast<int>(reward.size()) == table.n_states, ErrCode::DimensionMismatch,
          "reward vector length != number of states");
  QTable q;
  q.n_states = table.n_states;
  q.q.resize(static_cast<std::size_t>(table.n_states) * kNumActions);
  const auto& k = kernels::ops();
  for (int s = 0; s < table.n_states; ++s)
    for (int a = 0; a < kNumActions; ++a)
      q.at(s, a) = k.dot(table.row(s, a), reward.data(), table.n_states);
  return q;
}

namespace {

double q_backup(const TabularModel& model, const QTable& q, double gamma, int s, int a) {
  const int nxt = model.next_of(s, a);
  double future = 0.0;
  if (!model.terminal[nxt]) {
    future = q.at(nxt, 0);
    for (int ap = 1; ap < kNumActions; ++ap) future = std::max(future, q.at(nxt, ap));
  }
  return model.reward[nxt] + gamma * future;
}

}  // namespace

QTable value_iteration(const TabularModel& model, double gamma, double tol) {
  require(gamma >= 0.0 && gamma < 1.0, ErrCode::RangeError, "gamma must lie in [0,1)");
  require(tol > 0.0, ErrCode::RangeError, "tol must be positive");
  QTable q;
  q.n_states = model.n_states;
  q.q.assign(static_cast<std::size_t>(model.n_states) * kNumActions, 0.0);
  QTable fresh = q;
  double diff = tol + 1.0;
  while (diff > tol) {
    diff = 0.0;
    for (int s = 0; s < model.n_states; ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        const double v = model.terminal[s] ? 0.0 : q_backup(model, q, gamma, s, a);
        diff = std::max(diff, std::fabs(v - q.at(s, a)));
        fresh.at(s, a) = v;
      }
    }
    std::swap(q.q, fresh.q);
  }
  return q;
}

double bellman_residual(const TabularModel& model, const QTable& q, double gamma) {
  double worst = 0.0;
  for (int s = 0; s < model.n_states; ++s)
    for (int a = 0; a < kNumActions; ++a) {
      const double v = model.terminal[s] ? 0.0 : q_backup(model, q, gamma, s, a);
      worst = std::max(worst, std::fabs(v - q.at(s, a)));
    }
  return worst;
}

QTable policy_evaluation_occupancy(const TabularModel& model, const PolicyTable& policy,
                                   double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, ErrCode::RangeError, "gamma must lie in [0,1)");
  const int s_count = model.n_states;
  Mat a = Mat::identity(s_count);
  Vec rhs(model.reward);
  for (int s = 0; s < s_count; ++s) {
    if (model.terminal[s]) continue;
    for (int act = 0; act < kNumActions; ++act) {
      const double w = policy.at(s, act);
      if (w != 0.0) a.at(s, model.next_of(s, act)) -= gamma * w;
    }
  }
  const LuFactor f = lu_factor(std::move(a));
  lu_solve_inplace(f, rhs.data());  // rhs now holds V
  QTable q;
  q.n_states = s_count;
  q.q.resize(static_cast<std::size_t>(s_count) * kNumActions);
  for (int s = 0; s < s_count; ++s)
    for (int act = 0; act < kNumActions; ++act)
      q.at(s, act) = model.terminal[s]
                         ? model.reward[s]
                         : model.reward[s] + gamma * rhs[model.next_of(s, act)];
  return q;
}

int greedy_action(const QTable& q, int s) {
  int best = 0;
  double best_v = q.at(s, 0);
  for (int a = 1; a < kNumActions; ++a)
    if (q.at(s, a) > best_v) {
      best_v = q.at(s, a);
      best = a;
    }
  return best;
}

PolicyTable greedy_policy(const QTable& q) {
  PolicyTable p;
  p.n_states = q.n_states;
  p.pi.assign(static_cast<std::size_t>(q.n_states) * kNumActions, 0.0);
  for (int s = 0; s < q.n_states; ++s) p.row(s)[greedy_action(q, s)] = 1.0;
  return p;
}

double expected_return_greedy(const GridMap& map, const TabularModel& model, const QTable& q,
                              int step_limit) {
  double total = 0.0;
  for (const Cell& start : map.start_cells) {
    int s = model.id_of(start);
    double ret = 0.0;
    for (int t = 0; t < step_limit && !model.terminal[s]; ++t) {
      s = model.next_of(s, greedy_action(q, s));
      ret += model.reward[s];
    }
    total += ret;
  }
  return total / static_cast<double>(map.start_cells.size());
}

}  // namespace dsr
