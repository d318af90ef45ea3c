#pragma once

#include <string>
#include <utility>
#include <vector>

#include "epls/env.hpp"

namespace epls {

using WorldPoint = std::pair<float, float>;

// SVG 1.1 document with one <g> layer per ingredient: the track ribbon, the
// executed trajectory, and (when present) imagined plan trajectories drawn
// fainter. All coordinates are written with fixed precision so identical
// inputs give identical bytes.
std::string trajectory_svg(const TrackSpec& track, const std::vector<WorldPoint>& executed,
                           const std::vector<std::vector<WorldPoint>>& plans);

} // namespace epls
