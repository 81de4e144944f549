#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "trajclone/geometry.hpp"
#include "trajclone/track_gen.hpp"

using namespace trajclone;

namespace {

Track straight(double len) { return Track(TrackSpec{{{SegmentKind::Straight, len, 0.0}}, 3.5, 3}); }

Track circle(double radius) {
  return Track(TrackSpec{{{SegmentKind::Arc, 2.0 * std::numbers::pi * radius, 1.0 / radius}}, 3.5, 3});
}

}  // namespace

TEST(Track, SingleStraight) {
  const Track t = straight(100.0);
  EXPECT_DOUBLE_EQ(t.total_length(), 100.0);
  const Pose a = t.centerline_pose(0.0);
  const Pose b = t.centerline_pose(100.0);
  EXPECT_NEAR(a.x, 0.0, 1e-12);
  EXPECT_NEAR(a.y, 0.0, 1e-12);
  EXPECT_NEAR(b.x, 100.0, 1e-12);
  EXPECT_NEAR(b.y, 0.0, 1e-12);
  EXPECT_FALSE(t.closed());
}

TEST(Track, FullCircleCloses) {
  const Track t = circle(100.0);
  EXPECT_TRUE(t.closed());
  const Pose e = t.end_pose();
  EXPECT_NEAR(e.x, 0.0, 1e-9);
  EXPECT_NEAR(e.y, 0.0, 1e-9);
  EXPECT_NEAR(std::abs(wrap_angle(e.heading)), 0.0, 1e-9);
}

TEST(Track, ArcEndHeadingIntegratesCurvature) {
  const Track t(TrackSpec{{{SegmentKind::Straight, 50.0, 0.0}, {SegmentKind::Arc, 78.5398, 0.02}}, 3.5, 3});
  EXPECT_NEAR(t.end_pose().heading, 0.02 * 78.5398, 1e-12);
  // Quarter circle of radius 50 after a 50 m straight.
  EXPECT_NEAR(t.end_pose().x, 50.0 + 50.0 * std::sin(0.02 * 78.5398), 1e-9);
  EXPECT_NEAR(t.end_pose().y, 50.0 * (1.0 - std::cos(0.02 * 78.5398)), 1e-9);
}

TEST(Track, CurvatureIsPiecewiseConstantAndJoinsTakeTheNextSegment) {
  const Track t(TrackSpec{{{SegmentKind::Straight, 50.0, 0.0}, {SegmentKind::Arc, 50.0, 0.02},
                           {SegmentKind::Straight, 50.0, 0.0}},
                          3.5, 3});
  EXPECT_EQ(t.curvature_at(10.0), 0.0);
  EXPECT_EQ(t.curvature_at(70.0), 0.02);
  EXPECT_EQ(t.curvature_at(50.0), 0.02);
  EXPECT_EQ(t.curvature_at(50.0 - 1e-9), 0.0);
  EXPECT_EQ(t.curvature_at(100.0), 0.0);
}

TEST(Track, RejectsInvalidSpecs) {
  EXPECT_THROW(Track(TrackSpec{{{SegmentKind::Straight, -1.0, 0.0}}, 3.5, 3}), GeometryError);
  EXPECT_THROW(Track(TrackSpec{{{SegmentKind::Straight, 10.0, 0.0}}, 3.5, 1}), GeometryError);
  // Inner edge would self-intersect: |kappa| * total width >= 1.
  EXPECT_THROW(Track(TrackSpec{{{SegmentKind::Arc, 10.0, 0.1}}, 3.5, 3}), GeometryError);
}

TEST(Frenet, StraightRoundTrip) {
  const Track t = straight(100.0);
  const FrenetCoord c = t.world_to_frenet({10.0, 0.0});
  EXPECT_NEAR(c.s, 10.0, 1e-12);
  EXPECT_NEAR(c.d, 0.0, 1e-12);
  const FrenetCoord l = t.world_to_frenet({10.0, 2.0});
  EXPECT_NEAR(l.s, 10.0, 1e-12);
  EXPECT_NEAR(l.d, 2.0, 1e-12);
}

TEST(Frenet, CircleOffsetMatchesRadius) {
  const Track t = circle(100.0);
  // Left-turning circle centered at (0, 100); radius 98 lies toward the center, i.e. to the left.
  const double ang = 0.7;
  const Vec2 p{98.0 * std::sin(ang), 100.0 - 98.0 * std::cos(ang)};
  const FrenetCoord f = t.world_to_frenet(p);
  EXPECT_NEAR(f.d, 2.0, 1e-9);
  EXPECT_NEAR(f.s, 100.0 * ang, 1e-9);
  const Vec2 back = t.frenet_to_world(f);
  EXPECT_NEAR(back.x, p.x, 1e-9);
  EXPECT_NEAR(back.y, p.y, 1e-9);
}

TEST(Frenet, GeneratedTrackRoundTrip) {
  const Track t(generate_track(TrackGenConfig{}, 3, 0));
  for (double s = 0.0; s < t.total_length(); s += t.total_length() / 37.0) {
    for (double d : {-4.0, 0.0, 3.1}) {
      const FrenetCoord f = t.world_to_frenet(t.frenet_to_world({s, d}));
      EXPECT_NEAR(t.signed_gap(s, f.s), 0.0, 1e-6);
      EXPECT_NEAR(f.d, d, 1e-6);
    }
  }
}

TEST(Frenet, LanesAndWrapping) {
  const Track t = circle(100.0);
  EXPECT_DOUBLE_EQ(t.lane_center(0), -3.5);
  EXPECT_DOUBLE_EQ(t.lane_center(1), 0.0);
  EXPECT_DOUBLE_EQ(t.lane_center(2), 3.5);
  EXPECT_EQ(t.lane_of(-3.0), 0);
  EXPECT_EQ(t.lane_of(9.0), 2);
  const double L = t.total_length();
  EXPECT_NEAR(t.wrap_s(L + 5.0), 5.0, 1e-9);
  EXPECT_NEAR(t.forward_gap(L - 5.0, 5.0), 10.0, 1e-9);
  EXPECT_NEAR(t.signed_gap(5.0, L - 5.0), -10.0, 1e-9);
  EXPECT_THROW(straight(10.0).wrap_s(11.0), GeometryError);
}

TEST(CarFrame, Transforms) {
  const Vec2 a = world_to_car_frame({0, 0, 0}, {5, 0});
  EXPECT_NEAR(a.x, 5.0, 1e-12);
  EXPECT_NEAR(a.y, 0.0, 1e-12);
  const Pose p{1, 1, std::numbers::pi / 2};
  const Vec2 b = world_to_car_frame(p, {1, 3});
  EXPECT_NEAR(b.x, 2.0, 1e-12);
  EXPECT_NEAR(b.y, 0.0, 1e-12);
  const Pose q{-3.2, 7.1, 2.4};
  const Vec2 w{4.4, -1.9};
  const Vec2 r = car_to_world_frame(q, world_to_car_frame(q, w));
  EXPECT_NEAR(r.x, w.x, 1e-12);
  EXPECT_NEAR(r.y, w.y, 1e-12);
}

TEST(CarFrame, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3.0 * std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-15);
}

TEST(TrackGen, DeterministicClosedAndValid) {
  const TrackGenConfig cfg;
  for (int id = 0; id < 12; ++id) {
    const TrackSpec a = generate_track(cfg, 11, id);
    const TrackSpec b = generate_track(cfg, 11, id);
    ASSERT_EQ(a.segments.size(), b.segments.size());
    for (std::size_t i = 0; i < a.segments.size(); ++i) EXPECT_EQ(a.segments[i].length, b.segments[i].length);
    const Track t(a);
    EXPECT_TRUE(t.closed());
    double turn = 0.0;
    for (const auto& s : a.segments) turn += s.curvature * s.length;
    EXPECT_NEAR(turn, 2.0 * std::numbers::pi, 1e-9);
  }
  EXPECT_NE(generate_track(cfg, 11, 0).segments[0].length, generate_track(cfg, 11, 1).segments[0].length);
}
