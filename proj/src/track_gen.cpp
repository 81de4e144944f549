#include "trajclone/track_gen.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "trajclone/random.hpp"

namespace trajclone {

namespace {
constexpr std::uint64_t kTrackStream = 0x7ac0000ULL;
}

TrackSpec generate_track(const TrackGenConfig& cfg, std::uint64_t seed, int track_id) {
  if (cfg.corners_min < 3 || cfg.corners_max < cfg.corners_min) throw std::invalid_argument("bad corner range");
  Rng rng = make_rng(seed ^ kTrackStream, static_cast<std::uint64_t>(track_id));
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int n = uniform_int(rng, cfg.corners_min, cfg.corners_max);
    std::vector<double> turn(static_cast<std::size_t>(n));
    double total = 0.0;
    for (double& t : turn) {
      t = uniform(rng, 0.5, 1.5);
      total += t;
    }
    for (double& t : turn) t *= 2.0 * std::numbers::pi / total;
    std::vector<double> radius(static_cast<std::size_t>(n));
    for (double& r : radius) r = uniform(rng, cfg.radius_min, cfg.radius_max);
    std::vector<double> straight(static_cast<std::size_t>(n));
    for (double& l : straight) l = uniform(rng, cfg.straight_min, cfg.straight_max);

    // Closure: sum of straight vectors plus arc chords must vanish; solve for the first two straights.
    double heading = 0.0;
    Vec2 rest{0.0, 0.0};
    std::vector<double> straight_heading(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      straight_heading[ui] = heading;
      if (i >= 2) rest = rest + straight[ui] * Vec2{std::cos(heading), std::sin(heading)};
      const double h1 = heading + turn[ui];
      rest = rest + radius[ui] * Vec2{std::sin(h1) - std::sin(heading), -(std::cos(h1) - std::cos(heading))};
      heading = h1;
    }
    const Vec2 a{std::cos(straight_heading[0]), std::sin(straight_heading[0])};
    const Vec2 b{std::cos(straight_heading[1]), std::sin(straight_heading[1])};
    const double det = cross(a, b);
    if (std::abs(det) < 0.2) continue;
    const Vec2 rhs{-rest.x, -rest.y};
    const double l0 = cross(rhs, b) / det;
    const double l1 = cross(a, rhs) / det;
    if (l0 < cfg.straight_min || l1 < cfg.straight_min || l0 > 2.0 * cfg.straight_max || l1 > 2.0 * cfg.straight_max) {
      continue;
    }
    straight[0] = l0;
    straight[1] = l1;
    TrackSpec spec;
    spec.lane_width = cfg.lane_width;
    spec.num_lanes = cfg.num_lanes;
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      spec.segments.push_back({SegmentKind::Straight, straight[ui], 0.0});
      spec.segments.push_back({SegmentKind::Arc, turn[ui] * radius[ui], 1.0 / radius[ui]});
    }
    return spec;
  }
  throw std::runtime_error("could not generate a closed track for id " + std::to_string(track_id));
}

}  // namespace trajclone
