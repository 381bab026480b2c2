#include "dsr/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "dsr/error.hpp"

namespace dsr {

const char* action_name(Action a) {
  switch (a) {
    case Action::North: return "north";
    case Action::South: return "south";
    case Action::East: return "east";
    case Action::West: return "west";
  }
  return "?";
}

namespace {

constexpr int kRowDelta[kNumActions] = {-1, 1, 0, 0};
constexpr int kColDelta[kNumActions] = {0, 0, 1, -1};

void check_connectivity(const GridMap& map) {
  // BFS from all goals; grid moves are reversible, so reaching a cell from a
  // goal means the goal is reachable from that cell.
  std::vector<std::uint8_t> seen(map.tiles.size(), 0);
  std::deque<Cell> frontier;
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c)
      if (map.at(r, c) == Tile::Goal) {
        seen[static_cast<std::size_t>(r) * map.width + c] = 1;
        frontier.push_back({r, c});
      }
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    for (int a = 0; a < kNumActions; ++a) {
      const int r = cur.row + kRowDelta[a];
      const int c = cur.col + kColDelta[a];
      if (!map.walkable(r, c)) continue;
      std::uint8_t& mark = seen[static_cast<std::size_t>(r) * map.width + c];
      if (!mark) {
        mark = 1;
        frontier.push_back({r, c});
      }
    }
  }
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c)
      if (map.at(r, c) != Tile::Wall && !seen[static_cast<std::size_t>(r) * map.width + c])
        fail(ErrCode::UnreachableGoal, "cell (" + std::to_string(r) + "," + std::to_string(c) +
                                           ") cannot reach a goal");
}

}  // namespace

GridMap parse_map(const std::string& text, const MapRewards& rewards) {
  std::vector<std::string> rows;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  require(!rows.empty(), ErrCode::NonRectangular, "empty map");
  const std::size_t width = rows.front().size();
  for (const auto& r : rows)
    require(r.size() == width, ErrCode::NonRectangular,
            "row length " + std::to_string(r.size()) + " != " + std::to_string(width));

  GridMap map;
  map.width = static_cast<int>(width);
  map.height = static_cast<int>(rows.size());
  map.tiles.resize(width * rows.size(), Tile::Empty);
  map.rewards = rewards;

  bool any_goal = false;
  bool any_explicit_start = false;
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      const char ch = rows[r][c];
      Tile t = Tile::Empty;
      switch (ch) {
        case '#': t = Tile::Wall; break;
        case '.': t = Tile::Empty; break;
        case 'W': t = Tile::Water; break;
        case 'G': t = Tile::Goal; any_goal = true; break;
        case 'S':
          t = Tile::Empty;
          any_explicit_start = true;
          map.start_cells.push_back({r, c});
          break;
        default:
          fail(ErrCode::UnknownChar, std::string("unknown map character '") + ch + "'");
      }
      map.tiles[static_cast<std::size_t>(r) * map.width + c] = t;
    }
  }
  require(any_goal, ErrCode::NoGoal, "map has no goal tile");
  if (!any_explicit_start) {
    for (int r = 0; r < map.height; ++r)
      for (int c = 0; c < map.width; ++c)
        if (map.at(r, c) == Tile::Empty) map.start_cells.push_back({r, c});
  }
  require(!map.start_cells.empty(), ErrCode::UnreachableGoal, "map has no start cell");
  check_connectivity(map);
  return map;
}

GridMap load_map_file(const std::string& path, const MapRewards& rewards) {
  std::ifstream in(path);
  require(in.good(), ErrCode::IoError, "cannot open map file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_map(text.str(), rewards);
}

std::string render_map(const GridMap& map) {
  std::vector<std::string> rows(map.height, std::string(map.width, '.'));
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      switch (map.at(r, c)) {
        case Tile::Wall: rows[r][c] = '#'; break;
        case Tile::Water: rows[r][c] = 'W'; break;
        case Tile::Goal: rows[r][c] = 'G'; break;
        case Tile::Empty: rows[r][c] = '.'; break;
      }
    }
  for (const Cell& s : map.start_cells) rows[s.row][s.col] = 'S';
  std::string out;
  for (const auto& r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

EnvState reset(const GridMap& map, Rng& rng) {
  EnvState s;
  s.agent = map.start_cells[rng.uniform_int(map.start_cells.size())];
  return s;
}

Cell apply_move(const GridMap& map, Cell from, Action a) {
  const int idx = static_cast<int>(a);
  const int r = from.row + kRowDelta[idx];
  const int c = from.col + kColDelta[idx];
  if (!map.walkable(r, c)) return from;
  return {r, c};
}

double reward_at(const GridMap& map, Cell cell) {
  switch (map.at(cell.row, cell.col)) {
    case Tile::Water: return map.rewards.water_penalty;
    case Tile::Goal: return map.rewards.goal_reward;
    default: return map.rewards.step_penalty;
  }
}

StepResult step(EnvState& state, const GridMap& map, Action a, int step_limit) {
  require(!state.terminal, ErrCode::StepOnTerminal, "step() called on a terminal state");
  state.agent = apply_move(map, state.agent, a);
  state.steps_taken += 1;
  StepResult result;
  result.reward = reward_at(map, state.agent);
  const bool at_goal = map.at(state.agent.row, state.agent.col) == Tile::Goal;
  result.terminal = at_goal || state.steps_taken >= step_limit;
  state.terminal = result.terminal;
  return result;
}

std::size_t observation_size(const GridMap& map) {
  return static_cast<std::size_t>(kNumTileKinds + 1) * map.height * map.width;
}

Observation encode_observation(const GridMap& map, const EnvState& state) {
  Observation obs;
  obs.channels = kNumTileKinds + 1;
  obs.height = map.height;
  obs.width = map.width;
  obs.data.assign(observation_size(map), 0.0);
  const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * map.width + c;
      obs.data[static_cast<std::size_t>(map.at(r, c)) * plane + cell] = 1.0;
    }
  obs.data[kAgentChannel * plane + static_cast<std::size_t>(state.agent.row) * map.width +
           state.agent.col] = 1.0;
  return obs;
}

Cell decode_agent_cell(const Observation& obs) {
  const std::size_t plane = static_cast<std::size_t>(obs.height) * obs.width;
  for (int r = 0; r < obs.height; ++r)
    for (int c = 0; c < obs.width; ++c)
      if (obs.data[kAgentChannel * plane + static_cast<std::size_t>(r) * obs.width + c] != 0.0)
        return {r, c};
  fail(ErrCode::ShapeMismatch, "observation has no agent bit set");
}

Cell origin_cell(const GridMap& map) {
  for (int r = map.height - 1; r >= 0; --r)
    for (int c = 0; c < map.width; ++c)
      if (map.at(r, c) != Tile::Wall) return {r, c};
  fail(ErrCode::NoGoal, "map has no walkable cell");
}

TabularModel build_transition_model(const GridMap& map) {
  TabularModel model;
  model.width = map.width;
  model.state_at.assign(map.tiles.size(), -1);
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c)
      if (map.at(r, c) != Tile::Wall) {
        model.state_at[static_cast<std::size_t>(r) * map.width + c] = model.n_states++;
        model.cells.push_back({r, c});
      }
  model.next.resize(static_cast<std::size_t>(model.n_states) * kNumActions);
  model.reward.resize(model.n_states);
  model.terminal.resize(model.n_states);
  for (int s = 0; s < model.n_states; ++s) {
    const Cell cell = model.cells[s];
    model.reward[s] = reward_at(map, cell);
    model.terminal[s] = map.at(cell.row, cell.col) == Tile::Goal ? 1 : 0;
    for (int a = 0; a < kNumActions; ++a) {
      const Cell nxt = model.terminal[s] ? cell : apply_move(map, cell, static_cast<Action>(a));
      model.next[static_cast<std::size_t>(s) * kNumActions + a] = model.id_of(nxt);
    }
  }
  return model;
}

Vec dense_transition_row(const TabularModel& model, int s, int a) {
  Vec row(model.n_states, 0.0);
  row[model.next_of(s, a)] = 1.0;
  return row;
}

}  // namespace dsr
