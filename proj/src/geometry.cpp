#include "trajclone/geometry.hpp"

#include <algorithm>
#include <limits>

namespace trajclone {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClosureTol = 1e-6;
constexpr double kParamTol = 1e-9;

Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

}  // namespace

double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Pose segment_pose(const Track::Segment& seg, double t) {
  const Pose& p0 = seg.start;
  if (seg.spec.kind == SegmentKind::Straight) {
    return {p0.x + t * std::cos(p0.heading), p0.y + t * std::sin(p0.heading), p0.heading};
  }
  const double k = seg.spec.curvature;
  const double h = p0.heading + k * t;
  return {p0.x + (std::sin(h) - std::sin(p0.heading)) / k,
          p0.y - (std::cos(h) - std::cos(p0.heading)) / k, wrap_angle(h)};
}

Track::Track(TrackSpec spec) : spec_(std::move(spec)) {
  if (spec_.segments.empty()) throw GeometryError("track has no segments");
  if (spec_.num_lanes < 2) throw GeometryError("track needs at least 2 lanes");
  if (!(spec_.lane_width > 0.0)) throw GeometryError("lane_width must be positive");
  const double width = spec_.lane_width * spec_.num_lanes;

  Pose pose{0.0, 0.0, 0.0};
  double s = 0.0;
  for (std::size_t i = 0; i < spec_.segments.size(); ++i) {
    const SegmentSpec& ss = spec_.segments[i];
    if (!(ss.length > 0.0) || !std::isfinite(ss.length)) {
      throw GeometryError("segment " + std::to_string(i) + " has non-positive length");
    }
    if (ss.kind == SegmentKind::Straight && ss.curvature != 0.0) {
      throw GeometryError("straight segment " + std::to_string(i) + " has nonzero curvature");
    }
    if (ss.kind == SegmentKind::Arc && ss.curvature == 0.0) {
      throw GeometryError("arc segment " + std::to_string(i) + " has zero curvature");
    }
    if (std::abs(ss.curvature) * width >= 1.0) {
      throw GeometryError("segment " + std::to_string(i) + " is too tight for the road width");
    }
    Segment seg;
    seg.spec = ss;
    seg.s0 = s;
    seg.start = pose;
    if (ss.kind == SegmentKind::Arc) {
      seg.radius = 1.0 / std::abs(ss.curvature);
      seg.center = pose.position() + (1.0 / ss.curvature) * left_normal(pose.heading);
    }
    segments_.push_back(seg);
    pose = segment_pose(seg, ss.length);
    s += ss.length;
  }
  total_length_ = s;
  end_pose_ = pose;
  closed_ = norm(pose.position()) < kClosureTol && std::abs(wrap_angle(pose.heading)) < kClosureTol;
}

double Track::lane_center(int lane) const {
  return (lane - 0.5 * (spec_.num_lanes - 1)) * spec_.lane_width;
}

int Track::lane_of(double d) const {
  const int lane = static_cast<int>(std::floor((d + half_width()) / spec_.lane_width));
  return std::clamp(lane, 0, spec_.num_lanes - 1);
}

double Track::wrap_s(double s) const {
  if (closed_) {
    double w = std::fmod(s, total_length_);
    if (w < 0.0) w += total_length_;
    if (w >= total_length_) w = 0.0;
    return w;
  }
  if (s < 0.0 || s > total_length_) {
    throw GeometryError("arc length " + std::to_string(s) + " outside open track");
  }
  return s;
}

double Track::forward_gap(double from, double to) const {
  const double g = to - from;
  if (!closed_) return g;
  double w = std::fmod(g, total_length_);
  if (w < 0.0) w += total_length_;
  return w;
}

double Track::signed_gap(double from, double to) const {
  double g = forward_gap(from, to);
  if (closed_ && g > 0.5 * total_length_) g -= total_length_;
  return g;
}

std::size_t Track::segment_index(double s) const {
  const double w = wrap_s(s);
  // Half-open intervals [s0, s0 + length): a join belongs to the following segment.
  auto it = std::upper_bound(segments_.begin(), segments_.end(), w,
                             [](double v, const Segment& seg) { return v < seg.s0; });
  std::size_t idx = static_cast<std::size_t>(std::distance(segments_.begin(), it));
  return idx == 0 ? 0 : idx - 1;
}

double Track::curvature_at(double s) const { return segments_[segment_index(s)].spec.curvature; }

Pose Track::centerline_pose(double s) const {
  const double w = wrap_s(s);
  const Segment& seg = segments_[segment_index(w)];
  return segment_pose(seg, w - seg.s0);
}

Vec2 Track::frenet_to_world(FrenetCoord fc) const {
  const Pose c = centerline_pose(fc.s);
  return c.position() + fc.d * left_normal(c.heading);
}

FrenetCoord Track::world_to_frenet(Vec2 p) const {
  double best_abs_d = std::numeric_limits<double>::infinity();
  FrenetCoord best{};
  for (const Segment& seg : segments_) {
    const double len = seg.spec.length;
    double t = 0.0;
    double d = 0.0;
    if (seg.spec.kind == SegmentKind::Straight) {
      const Vec2 dir{std::cos(seg.start.heading), std::sin(seg.start.heading)};
      const Vec2 rel = p - seg.start.position();
      t = dot(rel, dir);
      d = cross(dir, rel);
    } else {
      const double k = seg.spec.curvature;
      const Vec2 r = p - seg.center;
      const double rn = norm(r);
      if (rn == 0.0) continue;
      const Vec2 r0 = seg.start.position() - seg.center;
      double sweep = std::atan2(cross(r0, r), dot(r0, r));  // (-pi, pi]
      if (k < 0.0) sweep = -sweep;
      if (sweep < 0.0) sweep += kTwoPi;  // [0, 2pi)
      t = sweep * seg.radius;
      // A point just before the start should project slightly negative, not near 2pi*R.
      if (t > len && (kTwoPi - sweep) * seg.radius < (t - len)) t -= kTwoPi * seg.radius;
      d = (k > 0.0 ? 1.0 : -1.0) * (seg.radius - rn);
    }
    const double tol = kParamTol * std::max(1.0, len);
    if (t < -tol || t > len + tol) continue;
    if (std::abs(d) < best_abs_d) {
      best_abs_d = std::abs(d);
      best = {seg.s0 + std::clamp(t, 0.0, len), d};
    }
  }
  if (!(best_abs_d <= max_projection_distance())) {
    throw GeometryError("point does not project onto the track within max_projection_distance");
  }
  if (closed_) {
    best.s = wrap_s(best.s);
  }
  return best;
}

Vec2 world_to_car_frame(const Pose& pose, Vec2 world_point) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const Vec2 r = world_point - pose.position();
  return {c * r.x + s * r.y, -s * r.x + c * r.y};
}

Vec2 car_to_world_frame(const Pose& pose, Vec2 car_point) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  return {pose.x + c * car_point.x - s * car_point.y, pose.y + s * car_point.x + c * car_point.y};
}

}  // namespace trajclone
