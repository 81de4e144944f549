#pragma once

#include <cstdint>

#include "trajclone/geometry.hpp"

namespace trajclone {

// Closed convex loops: alternating straights and left-hand arcs whose turning angles sum to 2*pi.
struct TrackGenConfig {
  double lane_width = 3.5;
  int num_lanes = 3;
  int corners_min = 4;
  int corners_max = 6;
  double radius_min = 80.0;
  double radius_max = 150.0;
  double straight_min = 400.0;
  double straight_max = 1200.0;
};

// Deterministic in (seed, track_id).
TrackSpec generate_track(const TrackGenConfig& cfg, std::uint64_t seed, int track_id);

}  // namespace trajclone
