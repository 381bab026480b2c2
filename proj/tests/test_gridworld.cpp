#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "dsr/error.hpp"
#include "dsr/gridworld.hpp"
#include "dsr/maps.hpp"

using namespace dsr;

namespace {

bool throws_code(ErrCode want, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  }
  return false;
}

}  // namespace

TEST_CASE("parse_map rejects malformed maps") {
  CHECK(throws_code(ErrCode::UnreachableGoal, [] { parse_map("###\n#G#\n###\n"); }));
  CHECK(throws_code(ErrCode::UnknownChar, [] { parse_map("SXG\n"); }));
  CHECK(throws_code(ErrCode::NoGoal, [] { parse_map("S..\n"); }));
  CHECK(throws_code(ErrCode::NonRectangular, [] { parse_map("S.G\n#.\n"); }));
  CHECK(throws_code(ErrCode::UnreachableGoal, [] { parse_map("S#G\n###\n#.#\n"); }));
}

TEST_CASE("parse_map accepts a minimal map") {
  const GridMap map = parse_map("####\n#SG#\n####\n");
  CHECK(map.width == 4);
  CHECK(map.height == 3);
  CHECK(map.start_cells.size() == 1);
  CHECK(map.start_cells[0] == Cell{1, 1});
  CHECK(map.at(1, 2) == Tile::Goal);
  CHECK(map.at(0, 0) == Tile::Wall);
}

TEST_CASE("maps without explicit starts spawn from every empty cell") {
  const GridMap map = parse_map(maps::kOpenRoom5);
  CHECK(map.start_cells.size() == 24);  // 25 cells minus the goal
}

TEST_CASE("render_map round-trips tiles and starts") {
  for (const char* text : {maps::kCorridor, maps::kTestMaze10, maps::kTwoRoom, maps::kFourRoom}) {
    const GridMap map = parse_map(text);
    const GridMap again = parse_map(render_map(map));
    CHECK(map.tiles == again.tiles);
    CHECK(map.start_cells == again.start_cells);
  }
}

TEST_CASE("reset uses the seeded generator") {
  const GridMap single = parse_map(maps::kCorridor);
  for (std::uint64_t seed : {1, 2, 77}) {
    Rng rng(seed);
    CHECK(reset(single, rng).agent == Cell{0, 0});
  }

  const GridMap two = parse_map("S.G\nS..\n");
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(reset(two, a).agent == reset(two, b).agent);

  // Empirical spawn frequency over 10k resets: binomial 3 sigma band.
  Rng rng(7);
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    if (reset(two, rng).agent == Cell{0, 0}) ++first;
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::fabs(first - n / 2.0) <= 3.0 * sigma);
}

TEST_CASE("step rewards follow the tile rules") {
  const GridMap map = parse_map(
      "#####\n"
      "#S.W#\n"
      "#..G#\n"
      "#####\n");
  EnvState s{{1, 1}, 0, false};

  SUBCASE("empty to empty costs the step penalty") {
    const auto r = step(s, map, Action::East);
    CHECK(r.reward == -0.5);
    CHECK_FALSE(r.terminal);
  }
  SUBCASE("walking into water replaces the step penalty") {
    s.agent = {1, 2};
    const auto r = step(s, map, Action::East);
    CHECK(r.reward == -1.0);
    CHECK_FALSE(r.terminal);
    CHECK(s.agent == Cell{1, 3});
  }
  SUBCASE("reaching the goal pays out and terminates") {
    s.agent = {2, 2};
    const auto r = step(s, map, Action::East);
    CHECK(r.reward == 1.0);
    CHECK(r.terminal);
    CHECK(throws_code(ErrCode::StepOnTerminal, [&] { step(s, map, Action::East); }));
  }
  SUBCASE("blocked moves stay put and still pay") {
    const auto r = step(s, map, Action::North);
    CHECK(s.agent == Cell{1, 1});
    CHECK(r.reward == -0.5);
  }
  SUBCASE("the step limit forces termination with the normal reward") {
    EnvState t{{1, 1}, 0, false};
    StepResult r{};
    for (int i = 0; i < 3; ++i) r = step(t, map, Action::North, 3);
    CHECK(t.terminal);
    CHECK(r.reward == -0.5);
    CHECK(t.steps_taken == 3);
  }
}

TEST_CASE("map reward parameters are configurable") {
  MapRewards rw{-0.1, -2.0, 5.0};
  const GridMap map = parse_map("S.WG\n", rw);
  EnvState s{{0, 0}, 0, false};
  CHECK(step(s, map, Action::East).reward == -0.1);
  CHECK(step(s, map, Action::East).reward == -2.0);
  CHECK(step(s, map, Action::East).reward == 5.0);
}

TEST_CASE("observations are one-hot channel stacks") {
  const GridMap map = parse_map(maps::kTestMaze10);
  const std::size_t plane = static_cast<std::size_t>(map.height) * map.width;

  EnvState s{{8, 1}, 0, false};
  const Observation obs = encode_observation(map, s);
  CHECK(obs.size() == observation_size(map));
  CHECK(obs.channels == 5);

  int agent_bits = 0;
  for (std::size_t i = 0; i < plane; ++i)
    if (obs.data[kAgentChannel * plane + i] != 0.0) ++agent_bits;
  CHECK(agent_bits == 1);
  CHECK(obs.at(kAgentChannel, 8, 1) == 1.0);

  // Tile channels partition the grid: exactly one channel set per cell.
  for (std::size_t i = 0; i < plane; ++i) {
    double sum = 0.0;
    for (int ch = 0; ch < kNumTileKinds; ++ch) sum += obs.data[ch * plane + i];
    CHECK(sum == 1.0);
  }

  // Two states differing only in agent cell differ only in the agent channel.
  EnvState s2{{8, 2}, 0, false};
  const Observation obs2 = encode_observation(map, s2);
  for (std::size_t i = 0; i < kAgentChannel * plane; ++i) CHECK(obs.data[i] == obs2.data[i]);
  CHECK(decode_agent_cell(obs2) == Cell{8, 2});

  // Round trip over every non-wall cell.
  for (int r = 0; r < map.height; ++r)
    for (int c = 0; c < map.width; ++c) {
      if (map.at(r, c) == Tile::Wall) continue;
      EnvState st{{r, c}, 0, false};
      CHECK(decode_agent_cell(encode_observation(map, st)) == Cell{r, c});
    }
}

TEST_CASE("transition model matches the simulator exhaustively") {
  Rng rng(99);
  std::vector<std::string> texts = {maps::kCorridor, maps::kOpenRoom5, maps::kTestMaze10,
                                    maps::kTwoRoom, maps::kFourRoom,
                                    random_map_text(15, 12, 0.2, 0.1, rng),
                                    random_map_text(20, 20, 0.25, 0.1, rng)};
  for (const auto& text : texts) {
    const GridMap map = parse_map(text);
    const TabularModel model = build_transition_model(map);
    REQUIRE(model.n_states > 0);

    for (int s = 0; s < model.n_states; ++s) {
      for (int a = 0; a < kNumActions; ++a) {
        // Stochastic-matrix property of the dense row.
        const Vec row = dense_transition_row(model, s, a);
        double sum = 0.0;
        for (double v : row) sum += v;
        CHECK(sum == 1.0);

        if (model.terminal[s]) {
          CHECK(model.next_of(s, a) == s);
          continue;
        }
        EnvState st{model.cells[s], 0, false};
        const StepResult res = step(st, map, static_cast<Action>(a), 1 << 30);
        CHECK(model.next_of(s, a) == model.id_of(st.agent));
        CHECK(model.reward[model.next_of(s, a)] == res.reward);
      }
    }
  }
}

TEST_CASE("corridor transition chain") {
  const GridMap map = parse_map(maps::kCorridor);
  const TabularModel model = build_transition_model(map);
  REQUIRE(model.n_states == 3);
  const int s1 = model.id_of({0, 0});
  const int s2 = model.id_of({0, 1});
  const int g = model.id_of({0, 2});
  CHECK(model.next_of(s1, static_cast<int>(Action::East)) == s2);
  CHECK(model.next_of(s2, static_cast<int>(Action::East)) == g);
  CHECK(model.terminal[g] == 1);
  CHECK(model.reward[g] == 1.0);
}

TEST_CASE("default rewards stay in the documented set") {
  const GridMap map = parse_map(maps::kTestMaze10);
  Rng rng(5);
  EnvState s = reset(map, rng);
  const std::set<double> allowed{-1.0, -0.5, 1.0};
  for (int i = 0; i < 2000; ++i) {
    if (s.terminal) s = reset(map, rng);
    const auto r = step(s, map, static_cast<Action>(rng.uniform_int(kNumActions)));
    CHECK(allowed.count(r.reward) == 1);
  }
}

TEST_CASE("episodes are replayable under a fixed seed") {
  const GridMap map = parse_map(maps::kTestMaze10);
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    EnvState s = reset(map, rng);
    std::vector<double> rewards;
    for (int i = 0; i < 300; ++i) {
      if (s.terminal) s = reset(map, rng);
      rewards.push_back(step(s, map, static_cast<Action>(rng.uniform_int(kNumActions))).reward);
    }
    return rewards;
  };
  CHECK(run(123) == run(123));
}
