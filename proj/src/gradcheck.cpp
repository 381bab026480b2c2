#include "dsr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dsr/error.hpp"

namespace dsr {

FdReport finite_diff_check(const std::vector<ParamView>& views,
                           const std::function<double()>& loss, double epsilon,
                           std::size_t per_group, Rng& rng) {
  require(epsilon > 0.0, ErrCode::RangeError, "epsilon must be positive");
  FdReport report;
  for (const ParamView& view : views) {
    GroupReport group;
    group.name = view.name;

    std::vector<std::size_t> coords;
    if (view.size <= per_group) {
      coords.resize(view.size);
      for (std::size_t i = 0; i < view.size; ++i) coords[i] = i;
    } else {
      coords.reserve(per_group);
      for (std::size_t i = 0; i < per_group; ++i) coords.push_back(rng.uniform_int(view.size));
    }

    for (std::size_t idx : coords) {
      const std::size_t i = idx;
      const double saved = view.param[i];
      view.param[i] = saved + epsilon;
      const double up = loss();
      view.param[i] = saved - epsilon;
      const double down = loss();
      view.param[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = view.grad[i];
      const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
      const double rel = std::fabs(numeric - analytic) / denom;
      group.max_rel_err = std::max(group.max_rel_err, rel);
      ++group.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
    report.groups.push_back(std::move(group));
  }
  return report;
}

namespace {

void push_dense(std::vector<ParamView>& out, const std::string& name, Dense& p, const Dense& g) {
  out.push_back({name + ".w", p.w.data(), g.w.data(), p.w.size()});
  out.push_back({name + ".b", p.b.data(), g.b.data(), p.b.size()});
}

}  // namespace

std::vector<ParamView> reward_phase_views(ModelParams& p, const RewardPhaseGrads& g) {
  std::vector<ParamView> out;
  push_dense(out, "trunk.l1", p.trunk.l1, g.trunk.l1);
  push_dense(out, "trunk.l2", p.trunk.l2, g.trunk.l2);
  push_dense(out, "trunk.l3", p.trunk.l3, g.trunk.l3);
  push_dense(out, "decoder.d1", p.decoder.d1, g.decoder.d1);
  push_dense(out, "decoder.d2", p.decoder.d2, g.decoder.d2);
  out.push_back({"w", p.w.data(), g.w.data(), p.w.size()});
  return out;
}

std::vector<ParamView> sr_phase_views(ModelParams& p, const SrPhaseGrads& g) {
  std::vector<ParamView> out;
  for (int a = 0; a < kNumActions; ++a)
    push_dense(out, "heads." + std::to_string(a), p.heads.h[a], g.heads.h[a]);
  return out;
}

}  // namespace dsr
