#include "trajclone/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trajclone {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smallest positive hit of ray o + t*u (|u| = 1) with segment [a, b].
double ray_segment(Vec2 o, Vec2 u, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double denom = cross(u, e);
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  const Vec2 ao = a - o;
  const double t = cross(ao, e) / denom;
  const double s = cross(ao, u) / denom;
  if (t < 0.0 || s < 0.0 || s > 1.0) return std::numeric_limits<double>::infinity();
  return t;
}

// Angle swept from r0 to r around an arc turning with the sign of `curvature`, in [0, 2pi).
double arc_sweep(Vec2 r0, Vec2 r, double curvature) {
  double sweep = std::atan2(cross(r0, r), dot(r0, r));
  if (curvature < 0.0) sweep = -sweep;
  if (sweep < 0.0) sweep += kTwoPi;
  return sweep;
}

double ray_arc_edge(Vec2 o, Vec2 u, const Track::Segment& seg, double edge_radius) {
  const Vec2 oc = o - seg.center;
  const double b = dot(u, oc);
  const double c = dot(oc, oc) - edge_radius * edge_radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double sq = std::sqrt(disc);
  const double span = seg.spec.length / seg.radius;
  const Vec2 r0 = seg.start.position() - seg.center;
  for (double t : {-b - sq, -b + sq}) {
    if (t < 0.0) continue;
    const Vec2 q = o + t * u;
    const double sweep = arc_sweep(r0, q - seg.center, seg.spec.curvature);
    if (sweep <= span + 1e-12 || sweep >= kTwoPi - 1e-12) return t;
  }
  return std::numeric_limits<double>::infinity();
}

double ray_box(Vec2 o, Vec2 u, const Box& box) {
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const Vec2 r = o - box.center;
  const double ox = c * r.x + s * r.y;
  const double oy = -s * r.x + c * r.y;
  const double ux = c * u.x + s * u.y;
  const double uy = -s * u.x + c * u.y;
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  auto slab = [&](double p, double v, double h) {
    if (v == 0.0) {
      if (p < -h || p > h) t0 = std::numeric_limits<double>::infinity();
      return;
    }
    double a = (-h - p) / v;
    double b = (h - p) / v;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  };
  slab(ox, ux, box.half_length);
  slab(oy, uy, box.half_width);
  if (t0 > t1 || t1 < 0.0) return std::numeric_limits<double>::infinity();
  return std::max(t0, 0.0);
}

}  // namespace

Action clamp_action(Action a, const VehicleParams& vp) {
  return {std::clamp(a.steer, -vp.steer_max, vp.steer_max), std::clamp(a.accel, vp.accel_min, vp.accel_max)};
}

VehicleState step(const VehicleState& state, const Action& action, double dt, double v_hard_max) {
  VehicleState next = state;
  const double v = state.speed;
  const double h = state.pose.heading;
  next.pose.x = state.pose.x + v * std::cos(h) * dt;
  next.pose.y = state.pose.y + v * std::sin(h) * dt;
  next.pose.heading = wrap_angle(h + (v / state.wheelbase) * std::tan(action.steer) * dt);
  next.speed = std::clamp(v + action.accel * dt, 0.0, v_hard_max);
  return next;
}

std::array<Vec2, 4> Box::corners() const {
  const Vec2 f{std::cos(heading), std::sin(heading)};
  const Vec2 l{-f.y, f.x};
  return {center + half_length * f + half_width * l, center + half_length * f - half_width * l,
          center - half_length * f - half_width * l, center - half_length * f + half_width * l};
}

Box obstacle_box(const Track& track, const Obstacle& ob) {
  const Pose c = track.centerline_pose(ob.frenet.s);
  return {track.frenet_to_world(ob.frenet), c.heading, ob.half_length, ob.half_width};
}

Box vehicle_box(const Pose& pose, const VehicleParams& vp) {
  return {pose.position(), pose.heading, vp.half_length, vp.half_width};
}

bool boxes_overlap(const Box& a, const Box& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  for (const Box* box : {&a, &b}) {
    const Vec2 f{std::cos(box->heading), std::sin(box->heading)};
    for (Vec2 axis : {f, Vec2{-f.y, f.x}}) {
      double amin = std::numeric_limits<double>::infinity(), amax = -amin;
      double bmin = amin, bmax = -amin;
      for (Vec2 p : ca) {
        amin = std::min(amin, dot(p, axis));
        amax = std::max(amax, dot(p, axis));
      }
      for (Vec2 p : cb) {
        bmin = std::min(bmin, dot(p, axis));
        bmax = std::max(bmax, dot(p, axis));
      }
      if (amax < bmin || bmax < amin) return false;
    }
  }
  return true;
}

std::vector<Obstacle> place_obstacles(const Track& track, Rng& rng, const ObstacleConfig& cfg,
                                      double s_origin) {
  if (cfg.count_min < 0 || cfg.count_max < cfg.count_min) throw std::invalid_argument("bad obstacle count range");
  if (!(cfg.spacing_min > 0.0) || cfg.spacing_max < cfg.spacing_min) {
    throw std::invalid_argument("bad obstacle spacing range");
  }
  if (cfg.spacing_min <= 2.0 * cfg.half_length) {
    throw std::invalid_argument("spacing_min must exceed the obstacle length");
  }
  const double usable = track.total_length() - cfg.clear_zone;
  const int max_fit = usable > 0.0 ? static_cast<int>(std::floor(usable / cfg.spacing_min)) : 0;
  if (cfg.count_min > max_fit) {
    throw std::invalid_argument("track of length " + std::to_string(track.total_length()) +
                                " cannot hold " + std::to_string(cfg.count_min) + " obstacles");
  }
  // Offsets stay inside [clear_zone, L - clear_zone] so the spawn point is clear from both sides.
  const double last_allowed = track.total_length() - cfg.clear_zone;
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const int count = uniform_int(rng, cfg.count_min, std::min(cfg.count_max, max_fit));
    std::vector<Obstacle> out;
    double offset = cfg.clear_zone;
    for (int i = 0; i < count; ++i) {
      if (i > 0) offset += uniform(rng, cfg.spacing_min, cfg.spacing_max);
      if (offset > last_allowed + 1e-9) break;
      const int lane = uniform_int(rng, 0, track.num_lanes() - 1);
      const double s = track.closed() ? track.wrap_s(s_origin + offset) : s_origin + offset;
      if (!track.closed() && s > track.total_length()) break;
      out.push_back({{s, track.lane_center(lane)}, cfg.half_length, cfg.half_width});
    }
    if (static_cast<int>(out.size()) >= cfg.count_min) return out;
  }
  throw std::runtime_error("failed to place the minimum obstacle count");
}

WorldState::WorldState(std::shared_ptr<const Track> t, std::vector<Obstacle> obs, VehicleState e, VehicleParams vp)
    : track(std::move(t)), obstacles(std::move(obs)), ego(e), vehicle(vp) {
  obstacle_boxes.reserve(obstacles.size());
  for (const Obstacle& ob : obstacles) obstacle_boxes.push_back(obstacle_box(*track, ob));
}

double cast_ray(const WorldState& world, Vec2 origin, double bearing, double max_range) {
  const Track& track = *world.track;
  const Vec2 u{std::cos(bearing), std::sin(bearing)};
  const double hw = track.half_width();
  double best = max_range;
  for (const Track::Segment& seg : track.segments()) {
    // Cull segments whose bounding circle is out of reach.
    const Pose mid = segment_pose(seg, 0.5 * seg.spec.length);
    if (norm(mid.position() - origin) > 0.5 * seg.spec.length + hw + best) continue;
    for (double e : {hw, -hw}) {
      double t;
      if (seg.spec.kind == SegmentKind::Straight) {
        const Vec2 n{-std::sin(seg.start.heading), std::cos(seg.start.heading)};
        const Vec2 a = seg.start.position() + e * n;
        const Vec2 b = a + seg.spec.length * Vec2{std::cos(seg.start.heading), std::sin(seg.start.heading)};
        t = ray_segment(origin, u, a, b);
      } else {
        const double sign = seg.spec.curvature > 0.0 ? 1.0 : -1.0;
        t = ray_arc_edge(origin, u, seg, seg.radius - sign * e);
      }
      best = std::min(best, t);
    }
  }
  for (const Box& box : world.obstacle_boxes) {
    if (norm(box.center - origin) > best + box.half_length + box.half_width) continue;
    best = std::min(best, ray_box(origin, u, box));
  }
  return best;
}

std::vector<double> cast_rays(const WorldState& world, const Pose& pose, const SensorConfig& sensor) {
  std::vector<double> ranges(static_cast<std::size_t>(sensor.n_beams));
  const double step = sensor.fov / (sensor.n_beams - 1);
  for (int i = 0; i < sensor.n_beams; ++i) {
    const double bearing = pose.heading - 0.5 * sensor.fov + i * step;
    ranges[static_cast<std::size_t>(i)] = cast_ray(world, pose.position(), bearing, sensor.max_range);
  }
  return ranges;
}

Observation observe(const WorldState& world, const SensorConfig& sensor) {
  return {cast_rays(world, world.ego.pose, sensor), world.ego.speed};
}

std::string to_string(CollisionKind k) {
  switch (k) {
    case CollisionKind::None: return "none";
    case CollisionKind::Obstacle: return "obstacle";
    case CollisionKind::OffRoad: return "offroad";
  }
  return "unknown";
}

CollisionKind check_collision(const WorldState& world) {
  const Box ego = vehicle_box(world.ego.pose, world.vehicle);
  const double reach = std::hypot(ego.half_length, ego.half_width);
  for (const Box& box : world.obstacle_boxes) {
    if (norm(box.center - ego.center) > reach + std::hypot(box.half_length, box.half_width)) continue;
    if (boxes_overlap(ego, box)) return CollisionKind::Obstacle;
  }
  const Track& track = *world.track;
  for (Vec2 corner : ego.corners()) {
    try {
      if (std::abs(track.world_to_frenet(corner).d) > track.half_width()) return CollisionKind::OffRoad;
    } catch (const GeometryError&) {
      return CollisionKind::OffRoad;
    }
  }
  return CollisionKind::None;
}

}  // namespace trajclone
