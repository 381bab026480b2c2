#pragma once

#include <string>
#include <vector>

#include "dsr/gridworld.hpp"
#include "dsr/linalg.hpp"
#include "dsr/nn.hpp"
#include "dsr/rng.hpp"
#include "dsr/vec.hpp"

namespace dsr {

/// One collected successor sample: the m-vector for the action actually
/// taken at a visited state.
struct SRSample {
  int state_id = 0;  // row * width + col, stable per map
  Cell cell;
  int action = 0;
  Vec m;
};

struct SRSampleSet {
  std::vector<SRSample> samples;
  std::string policy_tag;  // e.g. "random"
};

/// Rolls out the uniform-random policy (epsilon = 1) and records the
/// successor vector of each visited state: the taken action's head by
/// default, or the mean over all heads in action-averaged mode.
SRSampleSet collect_sr_samples(const GridMap& map, const ModelParams& params, int n, Rng& rng,
                               int step_limit = 500, bool action_averaged = false);

/// Collapses duplicate states, averaging their m-vectors (visit order does
/// not matter). Keeps per-visit samples when collapse = false.
SRSampleSet dedupe_by_state(const SRSampleSet& set);

struct AffinityGraph {
  Mat w;          // symmetric, unit diagonal, entries in (0,1]
  Vec degree;     // row sums
  double sigma = 0.0;
  std::vector<int> state_ids;  // node -> state id
  std::vector<Cell> cells;     // node -> cell

  std::size_t size() const { return w.rows; }
};

double median_pairwise_distance(const SRSampleSet& set);

/// Scales every m-vector to unit length (cosine geometry).
SRSampleSet normalize_samples(const SRSampleSet& set);

/// RBF affinity w_ij = exp(-||m_i - m_j||^2 / (2 sigma^2)).
AffinityGraph build_affinity(const SRSampleSet& set, double sigma);

struct EigenPairs {
  Vec values;                // ascending
  std::vector<Vec> vectors;  // eigenvectors of D^-1 (D - W), unit norm in the
                             // symmetrized coordinates
};

/// First k eigenpairs of the random-walk normalized Laplacian, via inverse
/// iteration with deflation on the symmetrized form D^-1/2 (D - W) D^-1/2.
EigenPairs eigen_smallest(const AffinityGraph& graph, int k, int max_iters = 20000);

struct CutResult {
  std::vector<int> labels;    // 0/1 per node, both sides nonempty
  double ncut_value = 0.0;
  double fiedler_value = 0.0;
  std::vector<int> boundary_states;  // state ids incident to strong cut edges
  std::vector<Cell> boundary_cells;
  std::vector<double> boundary_strength;  // summed weight of those edges
};

enum class ThresholdMode {
  Sweep,  // scan the sorted second eigenvector for the minimum Ncut
  Sign,
};

/// Two-way spectral partition by the second eigenvector; boundary states are
/// the endpoints of inter-partition edges whose affinity exceeds the median
/// inter-partition edge weight.
CutResult normalized_cut_partition(const AffinityGraph& graph,
                                   ThresholdMode mode = ThresholdMode::Sweep);

/// Exact minimum normalized cut by enumerating every bipartition (n <= 16).
CutResult brute_force_ncut(const AffinityGraph& graph);

double ncut_value(const AffinityGraph& graph, const std::vector<int>& labels);

/// Recursive two-way cuts: repeatedly splits the largest current segment
/// until `segments` parts exist (or a split fails). Labels in [0, segments);
/// boundary sets accumulate over the individual splits.
struct RecursiveCutResult {
  std::vector<int> labels;
  std::vector<int> boundary_states;
  std::vector<Cell> boundary_cells;
  std::vector<double> boundary_strength;
};
RecursiveCutResult recursive_cut_partition(const AffinityGraph& graph, int segments,
                                           ThresholdMode mode = ThresholdMode::Sweep);
std::vector<int> recursive_cuts(const AffinityGraph& graph, int segments);

struct SubgoalCandidate {
  int state_id = 0;
  Cell cell;
  long long boundary_count = 0;
  double strength = 0.0;  // accumulated cut-edge weight, breaks count ties
  int rank = 0;
};

struct SubgoalConfig {
  int samples_per_run = 600;
  double sigma = 0.0;  // 0 = median heuristic per run
  bool collapse_duplicates = true;
  int step_limit = 500;
  ThresholdMode threshold = ThresholdMode::Sweep;
  int segments = 2;       // recursive two-way cuts per sampling round
  bool action_averaged = false;
  bool normalize_samples = false;  // unit-norm m-vectors before the affinity
};

/// Repeats collect -> affinity -> cut on freshly resampled rollouts and
/// ranks states by how often they land on the cut boundary.
std::vector<SubgoalCandidate> aggregate_topk(const GridMap& map, const ModelParams& params,
                                             int runs, int k, std::uint64_t seed,
                                             const SubgoalConfig& cfg);

/// Map overlay with one label character per cell ('A'..'Z' per segment,
/// '*' for subgoal cells, tiles elsewhere).
std::string render_partition(const GridMap& map, const AffinityGraph& graph,
                             const std::vector<int>& labels,
                             const std::vector<Cell>& subgoals);

}  // namespace dsr
