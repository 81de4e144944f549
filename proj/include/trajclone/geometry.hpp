#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajclone {

struct Vec2 {
  double x{};
  double y{};
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Pose {
  double x{};
  double y{};
  double heading{};  // radians, (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

struct FrenetCoord {
  double s{};  // arc length along the centerline
  double d{};  // signed lateral offset, positive to the left
};

enum class SegmentKind { Straight, Arc };

struct SegmentSpec {
  SegmentKind kind = SegmentKind::Straight;
  double length = 0.0;
  double curvature = 0.0;  // 0 for straights, signed for arcs (positive turns left)
};

struct TrackSpec {
  std::vector<SegmentSpec> segments;
  double lane_width = 3.5;
  int num_lanes = 3;
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Piecewise straight/arc centerline with a fixed number of equal-width lanes.
// Immutable after construction; every query is const and thread-safe.
class Track {
 public:
  struct Segment {
    SegmentSpec spec;
    double s0 = 0.0;  // cumulative arc length at segment start
    Pose start;
    Vec2 center;        // arc center (arcs only)
    double radius = 0;  // 1/|curvature| (arcs only)
  };

  explicit Track(TrackSpec spec);

  const TrackSpec& spec() const { return spec_; }
  const std::vector<Segment>& segments() const { return segments_; }
  double total_length() const { return total_length_; }
  bool closed() const { return closed_; }
  Pose end_pose() const { return end_pose_; }

  double half_width() const { return 0.5 * spec_.lane_width * spec_.num_lanes; }
  double max_projection_distance() const { return 3.0 * half_width(); }
  int num_lanes() const { return spec_.num_lanes; }
  double lane_width() const { return spec_.lane_width; }
  // Lane 0 is the rightmost lane.
  double lane_center(int lane) const;
  // Lane containing offset d, clamped to [0, num_lanes).
  int lane_of(double d) const;

  // Closed tracks wrap s modulo the length; open tracks throw outside [0, L].
  double wrap_s(double s) const;
  // Forward arc-length distance from `from` to `to` (closed tracks wrap).
  double forward_gap(double from, double to) const;
  // Signed gap in (-L/2, L/2] on closed tracks, plain difference on open ones.
  double signed_gap(double from, double to) const;

  double curvature_at(double s) const;
  Pose centerline_pose(double s) const;
  Vec2 frenet_to_world(FrenetCoord fc) const;
  FrenetCoord world_to_frenet(Vec2 p) const;

  std::size_t segment_index(double s) const;

 private:
  TrackSpec spec_;
  std::vector<Segment> segments_;
  double total_length_ = 0.0;
  bool closed_ = false;
  Pose end_pose_;
};

// Point on a segment `t` meters past its start, with the tangent heading.
Pose segment_pose(const Track::Segment& seg, double t);

// Rigid transform into the ego frame: x along the heading, y to the left.
Vec2 world_to_car_frame(const Pose& pose, Vec2 world_point);
Vec2 car_to_world_frame(const Pose& pose, Vec2 car_point);

}  // namespace trajclone
