#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trajclone/random.hpp"
#include "trajclone/simulator.hpp"

namespace trajclone {

inline constexpr double kGravity = 9.81;

struct ExpertConfig {
  double v_cruise = 20.0;
  double friction_mu = 0.7;
  double kappa_floor = 1e-4;
  // Curve preview: the speed target respects upcoming limits with this deceleration.
  double preview_decel = 3.0;
  double preview_distance = 120.0;

  // Lateral loop: critically-damped-ish second-order response of the lateral error.
  double lat_omega = 1.6;
  double lat_zeta = 0.9;
  double lat_v_floor = 3.0;
  double speed_gain = 1.5;

  // Obstacle speed governor.
  double brake_decel = 5.0;
  double stop_margin = 4.0;
  double creep_speed = 1.5;
  double lateral_margin = 0.4;

  double steer_noise = 0.01;  // rad, per sim step
  double speed_noise = 0.5;   // m/s on v_target, redrawn every noise_period steps
  int noise_period = 5;

  double trigger_min = 25.0;
  double trigger_max = 45.0;
  double return_min = 8.0;
  double return_max = 20.0;
  double pass_window = 15.0;       // adjacent lane must be free this far past the blocking obstacle
  double return_lookahead = 55.0;  // home lane must be free this far ahead before returning
  double merge_lookahead = 20.0;   // shorter window used when the passing lane is blocked
  double center_tol = 0.3;
};

enum class FsmPhase { LaneKeep, Initiate, Passing, Return };
std::string to_string(FsmPhase p);
FsmPhase fsm_phase_from_string(const std::string& s);

struct FsmState {
  FsmPhase phase = FsmPhase::LaneKeep;
  double overtake_trigger_dist = 35.0;
  double return_clear_dist = 14.0;
  int home_lane = 0;
  int target_lane = 0;
};

// Draws fresh overtake distances from the configured ranges.
FsmState initial_fsm_state(int home_lane, Rng& rng, const ExpertConfig& cfg);

double speed_limit(double curvature, double friction_mu, double v_cruise, double kappa_floor = 1e-4);

// Speed target from the curvature limit over the preview window.
double curve_speed_target(const Track& track, double s, const ExpertConfig& cfg);

// PD steering toward the lane center plus curvature feed-forward; P control on speed.
// `noise_rng` adds exploration noise on steering when non-null.
Action lane_keep_action(const WorldState& world, int target_lane, double v_target, Rng* noise_rng,
                        const ExpertConfig& cfg);

// Bumper-to-bumper gap to the nearest obstacle ahead whose lane is `lane`, or +inf.
double gap_ahead_in_lane(const WorldState& world, FrenetCoord ego, int lane);

FsmState fsm_step(const FsmState& fsm, const WorldState& world, Rng& rng, const ExpertConfig& cfg);

struct AffordanceVector {
  double heading_error = 0.0;
  double lateral_offset = 0.0;
  double dist_left_mark = 0.0;
  double dist_right_mark = 0.0;
  double dist_ahead_same_lane = 0.0;
  double dist_ahead_adjacent_lane = 0.0;

  static constexpr int kSize = 6;
  std::vector<double> to_vector() const;
  static AffordanceVector from_vector(const std::vector<double>& v);
};

AffordanceVector compute_affordance(const WorldState& world, double max_range);

// Rule-based driver: FSM + lane keeping + obstacle governor.
class Expert {
 public:
  Expert(const ExpertConfig& cfg, int home_lane, Rng rng, bool noise = true);

  // Advances the FSM and returns the action for the next sim step.
  Action act(const WorldState& world);
  const FsmState& fsm() const { return fsm_; }
  void force_trigger(double dist) { fsm_.overtake_trigger_dist = dist; }

 private:
  ExpertConfig cfg_;
  FsmState fsm_;
  Rng rng_;
  bool noise_;
  int step_count_ = 0;
  double speed_offset_ = 0.0;
};

// Governor: fastest speed that still stops stop_margin short of any obstacle
// overlapping the corridor between the ego footprint and the target lane.
double obstacle_speed_cap(const WorldState& world, FrenetCoord ego, int target_lane, const ExpertConfig& cfg);

}  // namespace trajclone
