#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "trajclone/simulator.hpp"

using namespace trajclone;

namespace {

std::shared_ptr<const Track> straight_road(double len = 1000.0) {
  return std::make_shared<const Track>(TrackSpec{{{SegmentKind::Straight, len, 0.0}}, 3.5, 3});
}

WorldState world_at(std::shared_ptr<const Track> t, Pose p, std::vector<Obstacle> obs = {}) {
  VehicleState ego;
  ego.pose = p;
  ego.speed = 10.0;
  return WorldState(std::move(t), std::move(obs), ego, VehicleParams{});
}

}  // namespace

TEST(Step, StraightCoasting) {
  VehicleState s;
  s.speed = 10.0;
  const VehicleState n = step(s, {0.0, 0.0}, 0.1, 30.0);
  EXPECT_NEAR(n.pose.x, 1.0, 1e-12);
  EXPECT_NEAR(n.pose.y, 0.0, 1e-12);
  EXPECT_NEAR(n.pose.heading, 0.0, 1e-12);
  EXPECT_NEAR(n.speed, 10.0, 1e-12);
}

TEST(Step, ConstantSteerTracesBicycleCircle) {
  const double delta = 0.2;
  VehicleState s;
  s.speed = 5.0;
  const double dt = 1e-4;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  const double expected = s.wheelbase / std::tan(delta);
  const int n = static_cast<int>(2.0 * std::numbers::pi * expected / s.speed / dt);
  for (int i = 0; i < n; ++i) {
    s = step(s, {delta, 0.0}, dt, 30.0);
    xmin = std::min(xmin, s.pose.x);
    xmax = std::max(xmax, s.pose.x);
    ymin = std::min(ymin, s.pose.y);
    ymax = std::max(ymax, s.pose.y);
  }
  EXPECT_NEAR(0.5 * (xmax - xmin), expected, 0.01 * expected);
  EXPECT_NEAR(0.5 * (ymax - ymin), expected, 0.01 * expected);
}

TEST(Step, NoReverseAndSpeedCap) {
  VehicleState s;
  s.speed = 0.0;
  EXPECT_EQ(step(s, {0.0, -1.0}, 0.1, 30.0).speed, 0.0);
  s.speed = 29.99;
  EXPECT_EQ(step(s, {0.0, 3.0}, 0.1, 30.0).speed, 30.0);
}

TEST(Step, ClampAction) {
  const VehicleParams vp;
  const Action a = clamp_action({2.0, -20.0}, vp);
  EXPECT_EQ(a.steer, vp.steer_max);
  EXPECT_EQ(a.accel, vp.accel_min);
}

TEST(Obstacles, DegenerateSpacingIsExact) {
  const auto t = straight_road(1000.0);
  ObstacleConfig cfg;
  cfg.count_min = cfg.count_max = 5;
  cfg.spacing_min = cfg.spacing_max = 100.0;
  Rng rng(3);
  const auto obs = place_obstacles(*t, rng, cfg);
  ASSERT_EQ(obs.size(), 5u);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_NEAR(obs[i].frenet.s, cfg.clear_zone + 100.0 * static_cast<double>(i), 1e-9);
    const int lane = t->lane_of(obs[i].frenet.d);
    EXPECT_NEAR(obs[i].frenet.d, t->lane_center(lane), 1e-12);
  }
}

TEST(Obstacles, GapsAreUniform) {
  const auto t = std::make_shared<const Track>(TrackSpec{{{SegmentKind::Straight, 100000.0, 0.0}}, 3.5, 3});
  ObstacleConfig cfg;
  cfg.count_min = cfg.count_max = 101;
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto obs = place_obstacles(*t, rng, cfg);
    for (std::size_t i = 1; i < obs.size(); ++i) {
      const double g = obs[i].frenet.s - obs[i - 1].frenet.s;
      EXPECT_GE(g, 50.0);
      EXPECT_LE(g, 200.0);
      sum += g;
      ++n;
    }
  }
  EXPECT_EQ(n, 10000);
  EXPECT_NEAR(sum / n, 125.0, 5.0);
}

TEST(Obstacles, InfeasibleCountThrows) {
  const auto t = straight_road(1000.0);
  ObstacleConfig cfg;
  cfg.count_min = cfg.count_max = 19;  // floor((1000 - 100) / 50) = 18
  Rng rng(1);
  EXPECT_THROW(place_obstacles(*t, rng, cfg), std::invalid_argument);
}

TEST(Rays, EmptyRoadForwardBeamIsMaxRange) {
  const auto w = world_at(straight_road(), {100.0, 0.0, 0.0});
  EXPECT_NEAR(cast_ray(w, {100.0, 0.0}, 0.0, 60.0), 60.0, 1e-12);
}

TEST(Rays, ObstacleFaceAhead) {
  // Obstacle center at s = 122.25: near face at 120, i.e. 20 m ahead.
  const auto t = straight_road();
  const auto w = world_at(t, {100.0, 0.0, 0.0}, {Obstacle{{122.25, 0.0}, 2.25, 0.9}});
  EXPECT_NEAR(cast_ray(w, {100.0, 0.0}, 0.0, 60.0), 20.0, 1e-6);
  // Oblique beam hitting the same face: 20 / cos(a) while it stays on the face.
  const double a = 0.03;
  EXPECT_NEAR(cast_ray(w, {100.0, 0.0}, a, 60.0), 20.0 / std::cos(a), 1e-6);
}

TEST(Rays, RoadEdge) {
  // Road half width 5.25: ego at d = -3.75 is 1.5 m from the right edge.
  const auto w = world_at(straight_road(), {100.0, -3.75, 0.0});
  EXPECT_NEAR(cast_ray(w, {100.0, -3.75}, -std::numbers::pi / 2, 60.0), 1.5, 1e-6);
  EXPECT_NEAR(cast_ray(w, {100.0, -3.75}, std::numbers::pi / 2, 60.0), 9.0, 1e-6);
}

TEST(Rays, BeamLayoutAndClipping) {
  const auto w = world_at(straight_road(), {100.0, 0.0, 0.0});
  const SensorConfig sensor;
  const Observation o = observe(w, sensor);
  ASSERT_EQ(o.ranges.size(), 19u);
  EXPECT_NEAR(o.ranges.front(), 5.25, 1e-6);  // -pi/2
  EXPECT_NEAR(o.ranges.back(), 5.25, 1e-6);   // +pi/2
  for (double r : o.ranges) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, sensor.max_range);
  }
  EXPECT_EQ(o.speed, 10.0);
}

TEST(Collision, Cases) {
  const auto t = straight_road();
  EXPECT_EQ(check_collision(world_at(t, {100.0, 0.0, 0.0})), CollisionKind::None);
  EXPECT_EQ(check_collision(world_at(t, {100.0, 0.0, 0.0}, {Obstacle{{100.0, 0.0}, 2.25, 0.9}})),
            CollisionKind::Obstacle);
  // Corner at |d| = 5.25 + 0.01.
  EXPECT_EQ(check_collision(world_at(t, {100.0, 5.26 - 0.9, 0.0})), CollisionKind::OffRoad);
  EXPECT_EQ(check_collision(world_at(t, {100.0, 5.24 - 0.9, 0.0})), CollisionKind::None);
}

TEST(Collision, SeparatingAxis) {
  const Box a{{0, 0}, 0.0, 2.0, 1.0};
  EXPECT_TRUE(boxes_overlap(a, Box{{3.9, 0}, 0.0, 2.0, 1.0}));
  EXPECT_FALSE(boxes_overlap(a, Box{{4.1, 0}, 0.0, 2.0, 1.0}));
  // Rotated box whose bounding box overlaps but whose edges do not.
  EXPECT_FALSE(boxes_overlap(a, Box{{3.2, 2.2}, std::numbers::pi / 4, 1.0, 0.2}));
}
