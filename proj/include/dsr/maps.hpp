#pragma once

#include <string>

#include "dsr/gridworld.hpp"
#include "dsr/rng.hpp"

namespace dsr {

/// The built-in maps used by tests and the shipped experiments. The same
/// layouts live under maps/ as plain files for the CLI.
namespace maps {

/// 1x3 corridor: start, empty, goal.
extern const char* kCorridor;

/// 5x5 open room, goal in a corner, spawn anywhere.
extern const char* kOpenRoom5;

/// 10x10 maze with interior walls and a water pool; single start at the
/// bottom-left origin, goal in the upper right.
extern const char* kTestMaze10;

/// Two rooms joined by a single doorway.
extern const char* kTwoRoom;

/// Four rooms in a 2x2 arrangement joined by four doorways.
extern const char* kFourRoom;

/// Doorway cells of the built-in room maps (for tests).
Cell two_room_doorway();
std::vector<Cell> four_room_doorways();

}  // namespace maps

/// Procedurally generated map: scatters walls and water at the requested
/// densities, places one goal, and carves until every non-wall cell reaches
/// the goal. Deterministic given the generator state.
std::string random_map_text(int width, int height, double wall_frac, double water_frac, Rng& rng);

}  // namespace dsr
