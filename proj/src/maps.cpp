#include "dsr/maps.hpp"

#include <algorithm>
#include <deque>

namespace dsr {
namespace maps {

const char* kCorridor = "S.G\n";

const char* kOpenRoom5 =
    ".....\n"
    ".....\n"
    ".....\n"
    ".....\n"
    "....G\n";

// Left chamber and right corridor split by a wall; the row-7 passage carries
// a water pool right next to an equally short clean lane along the bottom,
// so the optimal policy has to steer around the water.
const char* kTestMaze10 =
    "##########\n"
    "#....#..G#\n"
    "#....#...#\n"
    "#....#...#\n"
    "#....#...#\n"
    "#....#...#\n"
    "#....#...#\n"
    "#.WW.....#\n"
    "#........#\n"
    "##########\n";

const char* kTwoRoom =
    "#########\n"
    "#...#...#\n"
    "#...#...#\n"
    "#.......#\n"
    "#...#...#\n"
    "#...#..G#\n"
    "#########\n";

const char* kFourRoom =
    "#########\n"
    "#...#...#\n"
    "#.......#\n"
    "#...#...#\n"
    "##.###.##\n"
    "#...#...#\n"
    "#.......#\n"
    "#...#..G#\n"
    "#########\n";

Cell two_room_doorway() { return {3, 4}; }

std::vector<Cell> four_room_doorways() { return {{2, 4}, {6, 4}, {4, 2}, {4, 6}}; }

}  // namespace maps

std::string random_map_text(int width, int height, double wall_frac, double water_frac, Rng& rng) {
  std::vector<std::string> rows(height, std::string(width, '#'));
  for (int r = 1; r < height - 1; ++r)
    for (int c = 1; c < width - 1; ++c) {
      const double u = rng.uniform();
      rows[r][c] = u < wall_frac ? '#' : (u < wall_frac + water_frac ? 'W' : '.');
    }

  std::vector<Cell> open;
  for (int r = 1; r < height - 1; ++r)
    for (int c = 1; c < width - 1; ++c)
      if (rows[r][c] == '.') open.push_back({r, c});
  if (open.empty()) {
    rows[height / 2][width / 2] = '.';
    open.push_back({height / 2, width / 2});
  }
  const Cell goal = open[rng.uniform_int(open.size())];
  rows[goal.row][goal.col] = 'G';

  // Carve straight toward the goal from any pocket the goal cannot reach.
  auto reachable = [&]() {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(width) * height, 0);
    std::deque<Cell> frontier{goal};
    seen[static_cast<std::size_t>(goal.row) * width + goal.col] = 1;
    while (!frontier.empty()) {
      const Cell cur = frontier.front();
      frontier.pop_front();
      const int dr[4] = {-1, 1, 0, 0};
      const int dc[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int r = cur.row + dr[k];
        const int c = cur.col + dc[k];
        if (r < 0 || r >= height || c < 0 || c >= width) continue;
        if (rows[r][c] == '#') continue;
        std::uint8_t& mark = seen[static_cast<std::size_t>(r) * width + c];
        if (!mark) {
          mark = 1;
          frontier.push_back({r, c});
        }
      }
    }
    return seen;
  };

  for (;;) {
    const auto seen = reachable();
    Cell pocket{-1, -1};
    for (int r = 1; r < height - 1 && pocket.row < 0; ++r)
      for (int c = 1; c < width - 1; ++c)
        if (rows[r][c] != '#' && !seen[static_cast<std::size_t>(r) * width + c]) {
          pocket = {r, c};
          break;
        }
    if (pocket.row < 0) break;
    Cell cur = pocket;
    while (!(cur == goal) && !seen[static_cast<std::size_t>(cur.row) * width + cur.col]) {
      if (cur.row != goal.row)
        cur.row += goal.row > cur.row ? 1 : -1;
      else
        cur.col += goal.col > cur.col ? 1 : -1;
      if (rows[cur.row][cur.col] == '#') rows[cur.row][cur.col] = '.';
    }
  }

  bool any_empty = false;
  for (int r = 1; r < height - 1 && !any_empty; ++r)
    for (int c = 1; c < width - 1; ++c)
      if (rows[r][c] == '.') {
        any_empty = true;
        break;
      }
  if (!any_empty) {
    for (int r = 1; r < height - 1 && !any_empty; ++r)
      for (int c = 1; c < width - 1; ++c)
        if (rows[r][c] == 'W') {
          rows[r][c] = '.';
          any_empty = true;
          break;
        }
  }

  std::string out;
  for (const auto& r : rows) {
    out += r;
    out += '\n';
  }
  return out;
}

}  // namespace dsr
