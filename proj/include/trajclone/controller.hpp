#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "trajclone/simulator.hpp"

namespace trajclone {

struct RiccatiSolution {
  Eigen::MatrixXd K;
  Eigen::MatrixXd P;
  int iterations = 0;
};

// Fixed-point iteration of the discrete algebraic Riccati equation starting at P = Q.
// Throws std::runtime_error when ||P_{t+1} - P_t||_inf stays above tol for max_iter steps.
RiccatiSolution solve_discrete_riccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                                       const Eigen::MatrixXd& R, double tol = 1e-12, int max_iter = 200000);

struct LqrConfig {
  double q_lateral = 1.0;
  double q_heading = 0.5;
  double r_steer = 8.0;
  double riccati_tol = 1e-12;
  int riccati_max_iter = 200000;
  double t_lookahead = 0.45;
  double label_dt = 0.3;
  double speed_gain = 0.8;
  double dt = 0.02;
  double resolve_speed_delta = 1.0;  // re-solve gains when speed drifts this far
  double min_model_speed = 1.0;
  double degenerate_radius = 0.05;   // plans entirely within this radius are treated as "stop"
  double stop_accel = -3.0;
  VehicleParams vehicle;

  void validate() const;
};

// Error-state model (lateral error, heading error) of the kinematic bicycle at speed v.
void lateral_error_model(double v, double wheelbase, double dt, Eigen::Matrix2d& A, Eigen::Vector2d& B);

struct ReferencePoint {
  Vec2 position;        // ego frame
  double heading = 0;   // path tangent, relative to ego heading
  double curvature = 0;
  double target_speed = 0;
};

// Speed-scheduled LQR path follower. A plan is a K-point trajectory in the ego frame of the
// pose it was issued at, evenly spaced by label_dt; it is held until the next plan.
class LqrFollower {
 public:
  explicit LqrFollower(LqrConfig cfg = {});

  void set_plan(const std::vector<Vec2>& trajectory, const Pose& plan_pose);
  // Action at `elapsed` seconds after the current plan was issued.
  Action act(const VehicleState& state, double elapsed);
  std::optional<ReferencePoint> reference(const Pose& pose, double elapsed) const;

  const LqrConfig& config() const { return cfg_; }
  const Eigen::RowVector2d& gain() const { return gain_; }
  int gain_solves() const { return solves_; }

 private:
  void update_gain(double v);

  LqrConfig cfg_;
  std::vector<Vec2> plan_world_;  // includes the plan origin at t = 0
  bool degenerate_ = true;
  Eigen::RowVector2d gain_ = Eigen::RowVector2d::Zero();
  double gain_speed_ = -1.0;
  int solves_ = 0;
};

// One-shot follow: the trajectory is in the current ego frame.
Action follow(const std::vector<Vec2>& trajectory, const VehicleState& state, const LqrConfig& cfg = {});

}  // namespace trajclone
