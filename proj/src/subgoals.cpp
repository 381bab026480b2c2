#include "dsr/subgoals.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dsr/agent.hpp"
#include "dsr/error.hpp"
#include "dsr/kernels.hpp"

namespace dsr {

SRSampleSet collect_sr_samples(const GridMap& map, const ModelParams& params, int n, Rng& rng,
                               int step_limit, bool action_averaged) {
  const ObservationCache cache(map);
  Scratch scratch;
  SRSampleSet out;
  out.policy_tag = "random";
  out.samples.reserve(n);
  EnvState state = reset(map, rng);
  while (static_cast<int>(out.samples.size()) < n) {
    if (state.terminal) state = reset(map, rng);
    const Cell cell = state.agent;
    const int action = static_cast<int>(rng.uniform_int(kNumActions));
    forward_features(params, cache.obs(cell), scratch);
    SRSample sample;
    sample.state_id = cell.row * map.width + cell.col;
    sample.cell = cell;
    sample.action = action;
    if (action_averaged) {
      sample.m.assign(params.feature_dim, 0.0);
      Vec head_out;
      for (int a = 0; a < kNumActions; ++a) {
        forward_successor(params.heads, scratch.phi, a, head_out);
        kernels::ops().axpy(1.0 / kNumActions, head_out.data(), sample.m.data(),
                            params.feature_dim);
      }
    } else {
      forward_successor(params.heads, scratch.phi, action, sample.m);
    }
    out.samples.push_back(std::move(sample));
    step(state, map, static_cast<Action>(action), step_limit);
  }
  return out;
}

SRSampleSet dedupe_by_state(const SRSampleSet& set) {
  SRSampleSet out;
  out.policy_tag = set.policy_tag;
  std::map<int, std::pair<SRSample, int>> grouped;  // state id -> (sum, count)
  for (const SRSample& s : set.samples) {
    auto it = grouped.find(s.state_id);
    if (it == grouped.end()) {
      grouped.emplace(s.state_id, std::make_pair(s, 1));
    } else {
      Vec& acc = it->second.first.m;
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += s.m[j];
      it->second.second += 1;
    }
  }
  for (auto& [id, entry] : grouped) {
    SRSample s = std::move(entry.first);
    const double inv = 1.0 / entry.second;
    for (double& v : s.m) v *= inv;
    out.samples.push_back(std::move(s));
  }
  return out;
}

SRSampleSet normalize_samples(const SRSampleSet& set) {
  SRSampleSet out = set;
  for (SRSample& s : out.samples) {
    double n2 = 0.0;
    for (double v : s.m) n2 += v * v;
    if (n2 > 0.0) {
      const double inv = 1.0 / std::sqrt(n2);
      for (double& v : s.m) v *= inv;
    }
  }
  return out;
}

double median_pairwise_distance(const SRSampleSet& set) {
  const std::size_t n = set.samples.size();
  require(n >= 2, ErrCode::EmptyBatch, "need at least two samples");
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  const auto& k = kernels::ops();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dists.push_back(std::sqrt(k.sq_diff_sum(set.samples[i].m.data(), set.samples[j].m.data(),
                                              set.samples[i].m.size())));
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  return dists[dists.size() / 2];
}

AffinityGraph build_affinity(const SRSampleSet& set, double sigma) {
  require(sigma > 0.0, ErrCode::DegenerateBandwidth, "sigma must be positive");
  const std::size_t n = set.samples.size();
  require(n >= 2, ErrCode::EmptyBatch, "need at least two samples");
  for (const SRSample& s : set.samples)
    require(s.m.size() == set.samples.front().m.size(), ErrCode::DimensionMismatch,
            "inconsistent m-vector dimensions");

  AffinityGraph g;
  g.sigma = sigma;
  g.w = Mat(n, n);
  g.state_ids.reserve(n);
  g.cells.reserve(n);
  for (const SRSample& s : set.samples) {
    g.state_ids.push_back(s.state_id);
    g.cells.push_back(s.cell);
  }
  const auto& k = kernels::ops();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    g.w.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 =
          k.sq_diff_sum(set.samples[i].m.data(), set.samples[j].m.data(), set.samples[i].m.size());
      const double w = std::exp(-d2 * inv);
      g.w.at(i, j) = w;
      g.w.at(j, i) = w;
    }
  }
  g.degree.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += g.w.at(i, j);
    g.degree[i] = sum;
  }
  return g;
}

EigenPairs eigen_smallest(const AffinityGraph& graph, int k, int max_iters) {
  const std::size_t n = graph.size();
  require(k >= 1 && static_cast<std::size_t>(k) <= n, ErrCode::RangeError,
          "k out of range for eigen_smallest");

  // Symmetrized random-walk Laplacian: I - D^-1/2 W D^-1/2.
  Vec dinv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) dinv_sqrt[i] = 1.0 / std::sqrt(graph.degree[i]);
  Mat lsym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lsym.at(i, j) = (i == j ? 1.0 : 0.0) - dinv_sqrt[i] * graph.w.at(i, j) * dinv_sqrt[j];

  // Inverse iteration with a tiny shift; deflation by re-orthogonalizing
  // against the eigenvectors already found.
  Mat shifted = lsym;
  const double shift = 1e-9;
  for (std::size_t i = 0; i < n; ++i) shifted.at(i, i) += shift;
  const LuFactor lu = lu_factor(std::move(shifted));

  const auto& kops = kernels::ops();
  EigenPairs out;
  std::vector<Vec> found;
  Rng rng(0x5eed5);

  const auto project_out = [&](Vec& v) {
    for (const Vec& u : found) {
      const double c = kops.dot(u.data(), v.data(), n);
      kops.axpy(-c, u.data(), v.data(), n);
    }
  };
  const auto normalize = [&](Vec& v) {
    const double norm = std::sqrt(kops.dot(v.data(), v.data(), n));
    if (norm < 1e-300) return false;
    for (double& x : v) x /= norm;
    return true;
  };
  // Rayleigh quotient; lv receives (lsym - lambda I) v and returns ||lv||.
  const auto residual = [&](const Vec& v, double& lambda, Vec& lv) {
    lv = matvec(lsym, v);
    lambda = kops.dot(v.data(), lv.data(), n);
    kops.axpy(-lambda, v.data(), lv.data(), n);
    return std::sqrt(kops.dot(lv.data(), lv.data(), n));
  };
  constexpr double kTol = 1e-11;

  for (int idx = 0; idx < k; ++idx) {
    Vec v(n), lv(n);
    if (idx == 0) {
      // D^(1/2) 1 is the exact 0-eigenvector of the symmetrized operator;
      // starting there keeps the first pair canonical even when the graph is
      // disconnected and the nullspace is degenerate.
      for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 / dinv_sqrt[i];
    } else {
      for (double& x : v) x = rng.uniform_range(-1.0, 1.0);
    }
    project_out(v);
    if (!normalize(v))
      for (double& x : v) x = rng.uniform_range(-1.0, 1.0);
    double lambda = 0.0;
    bool converged = false;

    // Fixed-shift inverse iteration pulls the iterate into the bottom of the
    // spectrum quickly when the next eigenvalue is well separated.
    const int fixed_iters = std::max(1, max_iters / 100);
    for (int it = 0; it < fixed_iters && !converged; ++it) {
      Vec next = lu_solve(lu, v);
      project_out(next);
      if (!normalize(next)) {
        for (double& x : next) x = rng.uniform_range(-1.0, 1.0);
        project_out(next);
        normalize(next);
      }
      v = std::move(next);
      converged = residual(v, lambda, lv) <= kTol;
    }

    // Rayleigh-quotient polish handles clustered eigenvalues, which stall
    // the fixed-shift phase; convergence is cubic once close.
    for (int it = 0; it < 25 && !converged; ++it) {
      Mat shifted_rq = lsym;
      const double mu = lambda + 1e-13;
      for (std::size_t i = 0; i < n; ++i) shifted_rq.at(i, i) -= mu;
      Vec next;
      try {
        const LuFactor f = lu_factor(std::move(shifted_rq));
        next = lu_solve(f, v);
      } catch (const Error&) {
        break;  // exactly singular shift: lambda is already an eigenvalue
      }
      project_out(next);
      if (!normalize(next)) break;
      v = std::move(next);
      converged = residual(v, lambda, lv) <= kTol;
    }
    if (!converged)
      fail(ErrCode::ConvergenceFailure, "eigen iteration exceeded its budget");
    found.push_back(v);
    out.values.push_back(std::max(0.0, lambda));
    // back-transform to a random-walk eigenvector
    Vec rw(n);
    for (std::size_t i = 0; i < n; ++i) rw[i] = dinv_sqrt[i] * v[i];
    out.vectors.push_back(std::move(rw));
  }
  return out;
}

double ncut_value(const AffinityGraph& graph, const std::vector<int>& labels) {
  const std::size_t n = graph.size();
  double cut = 0.0, vol_a = 0.0, vol_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    (labels[i] == 0 ? vol_a : vol_b) += graph.degree[i];
    for (std::size_t j = i + 1; j < n; ++j)
      if (labels[i] != labels[j]) cut += graph.w.at(i, j);
  }
  if (vol_a == 0.0 || vol_b == 0.0) return 0.0;
  return cut * (1.0 / vol_a + 1.0 / vol_b);
}

namespace {

void fill_boundary(const AffinityGraph& graph, CutResult& cut) {
  // Endpoints of the strongest inter-partition edges. The RBF graph is
  // dense, so a median floor admits every node; the top decile keeps the
  // handful of pairs that straddle the cut in successor space.
  const std::size_t n = graph.size();
  std::vector<double> weights;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cut.labels[i] != cut.labels[j]) weights.push_back(graph.w.at(i, j));
  if (weights.empty()) return;
  const std::size_t idx = weights.size() - 1 - (weights.size() - 1) / 10;
  std::nth_element(weights.begin(), weights.begin() + idx, weights.end());
  const double floor = weights[idx];

  std::vector<double> strength(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (cut.labels[i] != cut.labels[j] && graph.w.at(i, j) >= floor) {
        strength[i] += graph.w.at(i, j);
        strength[j] += graph.w.at(i, j);
      }
  for (std::size_t i = 0; i < n; ++i)
    if (strength[i] > 0.0) {
      cut.boundary_states.push_back(graph.state_ids[i]);
      cut.boundary_cells.push_back(graph.cells[i]);
      cut.boundary_strength.push_back(strength[i]);
    }
}

}  // namespace

CutResult normalized_cut_partition(const AffinityGraph& graph, ThresholdMode mode) {
  const std::size_t n = graph.size();
  require(n >= 2, ErrCode::EmptyBatch, "cannot cut fewer than two samples");
  const EigenPairs pairs = eigen_smallest(graph, 2);
  const Vec& fiedler = pairs.vectors[1];

  CutResult cut;
  cut.fiedler_value = pairs.values[1];
  cut.labels.assign(n, 0);

  if (mode == ThresholdMode::Sign) {
    bool any_a = false, any_b = false;
    for (std::size_t i = 0; i < n; ++i) {
      cut.labels[i] = fiedler[i] >= 0.0 ? 0 : 1;
      (cut.labels[i] == 0 ? any_a : any_b) = true;
    }
    if (!any_a || !any_b) {
      // degenerate sign split; separate the extreme coordinate instead
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (fiedler[i] > fiedler[arg]) arg = i;
      cut.labels.assign(n, 0);
      cut.labels[arg] = 1;
    }
  } else {
    // sweep the sorted eigenvector for the threshold minimizing the Ncut
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fiedler[a] < fiedler[b]; });

    const double total_vol = std::accumulate(graph.degree.begin(), graph.degree.end(), 0.0);
    std::vector<std::uint8_t> in_a(n, 0);
    double vol_a = 0.0;
    double cut_w = 0.0;
    double best = -1.0;
    std::size_t best_t = 1;
    for (std::size_t t = 0; t + 1 < n; ++t) {
      const std::size_t node = order[t];
      // moving `node` into A flips its edges: to-A edges leave the cut,
      // to-B edges join it
      double to_a = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (in_a[j]) to_a += graph.w.at(node, j);
      const double to_b = graph.degree[node] - graph.w.at(node, node) - to_a;
      cut_w += to_b - to_a;
      in_a[node] = 1;
      vol_a += graph.degree[node];
      const double vol_b = total_vol - vol_a;
      const double value = cut_w * (1.0 / vol_a + 1.0 / vol_b);
      if (best < 0.0 || value < best) {
        best = value;
        best_t = t + 1;
      }
    }
    for (std::size_t t = 0; t < best_t; ++t) cut.labels[order[t]] = 1;
    // relabel so side 0 is the one holding the first node, for determinism
    if (cut.labels[0] == 1)
      for (auto& l : cut.labels) l ^= 1;
  }

  cut.ncut_value = ncut_value(graph, cut.labels);
  fill_boundary(graph, cut);
  return cut;
}

CutResult brute_force_ncut(const AffinityGraph& graph) {
  const std::size_t n = graph.size();
  require(n >= 2, ErrCode::EmptyBatch, "cannot cut fewer than two samples");
  require(n <= 16, ErrCode::TooLarge, "brute force limited to 16 nodes");

  CutResult best;
  best.ncut_value = -1.0;
  std::vector<int> labels(n, 0);
  // node 0 stays on side 0; enumerate the rest
  const std::uint32_t limit = 1u << (n - 1);
  for (std::uint32_t mask = 1; mask < limit; ++mask) {
    for (std::size_t i = 1; i < n; ++i) labels[i] = (mask >> (i - 1)) & 1u;
    const double value = ncut_value(graph, labels);
    if (best.ncut_value < 0.0 || value < best.ncut_value) {
      best.ncut_value = value;
      best.labels = labels;
    }
  }
  fill_boundary(graph, best);
  return best;
}

RecursiveCutResult recursive_cut_partition(const AffinityGraph& graph, int segments,
                                           ThresholdMode mode) {
  const std::size_t n = graph.size();
  RecursiveCutResult out;
  out.labels.assign(n, 0);
  std::vector<int>& labels = out.labels;
  require(segments >= 1, ErrCode::RangeError, "segments must be >= 1");
  std::map<int, std::pair<Cell, double>> boundary;  // state id -> cell, strength
  int next_label = 1;
  while (next_label < segments) {
    // find the largest segment
    std::vector<int> count(next_label, 0);
    for (int l : labels) count[l] += 1;
    int target = 0;
    for (int l = 1; l < next_label; ++l)
      if (count[l] > count[target]) target = l;
    if (count[target] < 2) break;

    // build the subgraph of that segment
    std::vector<std::size_t> nodes;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == target) nodes.push_back(i);
    AffinityGraph sub;
    sub.sigma = graph.sigma;
    sub.w = Mat(nodes.size(), nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      sub.state_ids.push_back(graph.state_ids[nodes[a]]);
      sub.cells.push_back(graph.cells[nodes[a]]);
      for (std::size_t b = 0; b < nodes.size(); ++b)
        sub.w.at(a, b) = graph.w.at(nodes[a], nodes[b]);
    }
    sub.degree.resize(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      double sum = 0.0;
      for (std::size_t b = 0; b < nodes.size(); ++b) sum += sub.w.at(a, b);
      sub.degree[a] = sum;
    }

    const CutResult cut = normalized_cut_partition(sub, mode);
    for (std::size_t a = 0; a < nodes.size(); ++a)
      if (cut.labels[a] == 1) labels[nodes[a]] = next_label;
    for (std::size_t b = 0; b < cut.boundary_states.size(); ++b) {
      auto& entry = boundary[cut.boundary_states[b]];
      entry.first = cut.boundary_cells[b];
      entry.second += cut.boundary_strength[b];
    }
    ++next_label;
  }
  for (const auto& [id, entry] : boundary) {
    out.boundary_states.push_back(id);
    out.boundary_cells.push_back(entry.first);
    out.boundary_strength.push_back(entry.second);
  }
  return out;
}

std::vector<int> recursive_cuts(const AffinityGraph& graph, int segments) {
  return recursive_cut_partition(graph, segments, ThresholdMode::Sweep).labels;
}

std::vector<SubgoalCandidate> aggregate_topk(const GridMap& map, const ModelParams& params,
                                             int runs, int k, std::uint64_t seed,
                                             const SubgoalConfig& cfg) {
  require(runs >= 1 && k >= 1, ErrCode::RangeError, "runs and k must be >= 1");
  struct Tally {
    Cell cell;
    long long count = 0;
    double strength = 0.0;
  };
  std::map<int, Tally> counts;
  for (int run = 0; run < runs; ++run) {
    Rng rng(derive_seed(seed, 0x600a15 + run));
    SRSampleSet set = collect_sr_samples(map, params, cfg.samples_per_run, rng, cfg.step_limit,
                                         cfg.action_averaged);
    if (cfg.collapse_duplicates) set = dedupe_by_state(set);
    if (cfg.normalize_samples) set = normalize_samples(set);
    const double sigma = cfg.sigma > 0.0 ? cfg.sigma : median_pairwise_distance(set);
    const AffinityGraph graph = build_affinity(set, sigma);
    const RecursiveCutResult cut =
        recursive_cut_partition(graph, cfg.segments, cfg.threshold);
    for (std::size_t i = 0; i < cut.boundary_states.size(); ++i) {
      Tally& t = counts[cut.boundary_states[i]];
      t.cell = cut.boundary_cells[i];
      t.count += 1;
      t.strength += cut.boundary_strength[i];
    }
  }
  std::vector<SubgoalCandidate> ranked;
  for (const auto& [id, t] : counts)
    ranked.push_back({id, t.cell, t.count, t.strength, 0});
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.boundary_count != b.boundary_count) return a.boundary_count > b.boundary_count;
    if (a.strength != b.strength) return a.strength > b.strength;
    return a.state_id < b.state_id;
  });
  if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = static_cast<int>(i + 1);
  return ranked;
}

std::string render_partition(const GridMap& map, const AffinityGraph& graph,
                             const std::vector<int>& labels, const std::vector<Cell>& subgoals) {
  std::vector<std::string> rows(map.height, std::string(map.width, ' '));
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      switch (map.at(r, c)) {
        case Tile::Wall: rows[r][c] = '#'; break;
        case Tile::Water: rows[r][c] = 'W'; break;
        case Tile::Goal: rows[r][c] = 'G'; break;
        case Tile::Empty: rows[r][c] = '.'; break;
      }
    }
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const Cell cell = graph.cells[i];
    rows[cell.row][cell.col] = static_cast<char>('A' + labels[i] % 26);
  }
  for (const Cell& s : subgoals) rows[s.row][s.col] = '*';
  std::string out;
  for (const auto& r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

}  // namespace dsr
