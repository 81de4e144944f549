#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "trajclone/geometry.hpp"
#include "trajclone/random.hpp"

namespace trajclone {

struct VehicleParams {
  double wheelbase = 2.7;
  double half_length = 2.25;
  double half_width = 0.9;
  double steer_max = 0.5;
  double accel_min = -6.0;
  double accel_max = 3.0;
  double v_hard_max = 30.0;
};

struct VehicleState {
  Pose pose;
  double speed = 0.0;
  double wheelbase = 2.7;
};

struct Action {
  double steer = 0.0;
  double accel = 0.0;
};

// Actions are always clamped to the vehicle's actuation bounds before use.
Action clamp_action(Action a, const VehicleParams& vp);

// One forward-Euler step of the kinematic bicycle model.
VehicleState step(const VehicleState& state, const Action& action, double dt, double v_hard_max);

struct Obstacle {
  FrenetCoord frenet;
  double half_length = 2.25;
  double half_width = 0.9;
};

// Oriented rectangle in world coordinates.
struct Box {
  Vec2 center;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const;
};

Box obstacle_box(const Track& track, const Obstacle& ob);
Box vehicle_box(const Pose& pose, const VehicleParams& vp);
bool boxes_overlap(const Box& a, const Box& b);

struct ObstacleConfig {
  int count_min = 3;
  int count_max = 10;
  double spacing_min = 50.0;
  double spacing_max = 200.0;
  double clear_zone = 100.0;
  double half_length = 2.25;
  double half_width = 0.9;
};

// Obstacles start at clear_zone past s_origin and follow with uniform gaps; all are
// lane-centered in a uniformly chosen lane. Throws when the count cannot fit.
std::vector<Obstacle> place_obstacles(const Track& track, Rng& rng, const ObstacleConfig& cfg,
                                      double s_origin = 0.0);

struct SensorConfig {
  int n_beams = 19;
  double fov = std::numbers::pi;
  double max_range = 60.0;
};

struct Observation {
  std::vector<double> ranges;  // meters, clipped to max_range
  double speed = 0.0;
};

struct WorldState {
  std::shared_ptr<const Track> track;
  std::vector<Obstacle> obstacles;
  std::vector<Box> obstacle_boxes;  // cached world rectangles, same order as obstacles
  VehicleState ego;
  VehicleParams vehicle;
  double sim_time = 0.0;

  WorldState() = default;
  WorldState(std::shared_ptr<const Track> t, std::vector<Obstacle> obs, VehicleState e, VehicleParams vp);
};

// Distance along the ray to the first road edge or obstacle face, or max_range.
double cast_ray(const WorldState& world, Vec2 origin, double bearing, double max_range);
std::vector<double> cast_rays(const WorldState& world, const Pose& pose, const SensorConfig& sensor);
Observation observe(const WorldState& world, const SensorConfig& sensor);

enum class CollisionKind { None, Obstacle, OffRoad };
std::string to_string(CollisionKind k);

CollisionKind check_collision(const WorldState& world);

}  // namespace trajclone
