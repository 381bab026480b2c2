#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dsr/nn.hpp"
#include "dsr/rng.hpp"
#include "dsr/vec.hpp"

namespace dsr {

/// Mutable view of one parameter tensor paired with its analytic gradient.
struct ParamView {
  std::string name;
  double* param = nullptr;
  const double* grad = nullptr;
  std::size_t size = 0;
};

struct GroupReport {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

struct FdReport {
  std::vector<GroupReport> groups;
  double max_rel_err = 0.0;

  bool pass(double tol) const { return max_rel_err <= tol; }
};

/// Central finite differences against analytic gradients over a random
/// subsample of coordinates per group (all coordinates when the group is
/// smaller than per_group). The loss functional is re-evaluated with the
/// parameter perturbed in place.
FdReport finite_diff_check(const std::vector<ParamView>& views,
                           const std::function<double()>& loss, double epsilon,
                           std::size_t per_group, Rng& rng);

/// Views for the parameters each training phase owns.
std::vector<ParamView> reward_phase_views(ModelParams& p, const RewardPhaseGrads& g);
std::vector<ParamView> sr_phase_views(ModelParams& p, const SrPhaseGrads& g);

}  // namespace dsr
