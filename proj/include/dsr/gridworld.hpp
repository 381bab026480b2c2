#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsr/rng.hpp"
#include "dsr/vec.hpp"

namespace dsr {

enum class Tile : std::uint8_t { Empty = 0, Wall = 1, Water = 2, Goal = 3 };
inline constexpr int kNumTileKinds = 4;

enum class Action : int { North = 0, South = 1, East = 2, West = 3 };
inline constexpr int kNumActions = 4;
inline constexpr Action kAllActions[kNumActions] = {Action::North, Action::South, Action::East,
                                                    Action::West};
const char* action_name(Action a);

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct MapRewards {
  double step_penalty = -0.5;
  double water_penalty = -1.0;
  double goal_reward = 1.0;
  friend bool operator==(const MapRewards&, const MapRewards&) = default;
};

struct GridMap {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major
  std::vector<Cell> start_cells;
  MapRewards rewards;

  Tile at(int r, int c) const { return tiles[static_cast<std::size_t>(r) * width + c]; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
  bool walkable(int r, int c) const { return in_bounds(r, c) && at(r, c) != Tile::Wall; }
  bool same_topology(const GridMap& other) const {
    return width == other.width && height == other.height && tiles == other.tiles;
  }
};

/// Parses the ASCII map format: '#' wall, '.' empty, 'W' water, 'G' goal,
/// 'S' empty start cell. Rows are newline-separated. When no 'S' appears,
/// every empty cell is a start cell. Validates rectangularity, the presence
/// of a goal, and that every non-wall cell can reach a goal.
GridMap parse_map(const std::string& text, const MapRewards& rewards = MapRewards{});

GridMap load_map_file(const std::string& path, const MapRewards& rewards = MapRewards{});

/// ASCII rendering with start cells marked 'S'; parse_map(render_map(m))
/// reproduces the same tiles and start set.
std::string render_map(const GridMap& map);

struct EnvState {
  Cell agent;
  int steps_taken = 0;
  bool terminal = false;
};

struct StepResult {
  double reward = 0.0;
  bool terminal = false;
};

/// Places the agent uniformly at random over start cells.
EnvState reset(const GridMap& map, Rng& rng);

/// Target cell of a move; walls and the grid edge block (agent stays put).
Cell apply_move(const GridMap& map, Cell from, Action a);

/// Reward received upon arriving in `cell`.
double reward_at(const GridMap& map, Cell cell);

/// Advances the state. Blocked moves keep the agent in place and still pay
/// the arrival reward of the (unchanged) cell. Reaching a goal terminates;
/// so does exhausting the step limit.
StepResult step(EnvState& state, const GridMap& map, Action a, int step_limit = 500);

/// One-hot observation tensor: kNumTileKinds tile channels plus one agent
/// channel, each height x width.
struct Observation {
  int channels = 0;
  int height = 0;
  int width = 0;
  Vec data;  // channel-major, then row-major

  double at(int ch, int r, int c) const {
    return data[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  std::size_t size() const { return data.size(); }
};

inline constexpr int kAgentChannel = kNumTileKinds;

Observation encode_observation(const GridMap& map, const EnvState& state);

/// Recovers the agent cell from an observation (for round-trip checks).
Cell decode_agent_cell(const Observation& obs);

/// The bottom-left-most non-wall cell: the reference state tracked by the
/// distal-reward experiment.
Cell origin_cell(const GridMap& map);

std::size_t observation_size(const GridMap& map);

/// Dense tabular view of the MDP: all non-wall cells enumerated row-major.
/// Transitions are deterministic; goals are absorbing.
struct TabularModel {
  int n_states = 0;
  std::vector<Cell> cells;          // state id -> cell
  std::vector<int> state_at;        // row*width+col -> state id, -1 for walls
  std::vector<int> next;            // [s * kNumActions + a] -> successor id
  Vec reward;                       // R(s): reward received upon arriving in s
  std::vector<std::uint8_t> terminal;

  int id_of(Cell c) const { return state_at[static_cast<std::size_t>(c.row) * width + c.col]; }
  int width = 0;
  int next_of(int s, int a) const { return next[static_cast<std::size_t>(s) * kNumActions + a]; }
};

TabularModel build_transition_model(const GridMap& map);

/// One-hot transition row T(s,a,.) as a dense vector (sums to 1).
Vec dense_transition_row(const TabularModel& model, int s, int a);

}  // namespace dsr
