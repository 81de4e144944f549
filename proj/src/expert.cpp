#include "trajclone/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace trajclone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double draw_trigger(Rng& rng, const ExpertConfig& cfg) { return uniform(rng, cfg.trigger_min, cfg.trigger_max); }
double draw_return(Rng& rng, const ExpertConfig& cfg) { return uniform(rng, cfg.return_min, cfg.return_max); }

// True when every obstacle in `lane` is either at least `behind_clear` behind the ego's rear
// bumper or at least `ahead_clear` ahead of its front bumper.
bool lane_free(const WorldState& world, FrenetCoord ego, int lane, double behind_clear, double ahead_clear) {
  const Track& track = *world.track;
  for (const Obstacle& ob : world.obstacles) {
    if (track.lane_of(ob.frenet.d) != lane) continue;
    const double g = track.signed_gap(ego.s, ob.frenet.s);
    const double hl = world.vehicle.half_length + ob.half_length;
    if (g > -(hl + behind_clear) && g < hl + ahead_clear) return false;
  }
  return true;
}

}  // namespace

std::string to_string(FsmPhase p) {
  switch (p) {
    case FsmPhase::LaneKeep: return "LaneKeep";
    case FsmPhase::Initiate: return "Initiate";
    case FsmPhase::Passing: return "Passing";
    case FsmPhase::Return: return "Return";
  }
  return "?";
}

FsmPhase fsm_phase_from_string(const std::string& s) {
  if (s == "LaneKeep") return FsmPhase::LaneKeep;
  if (s == "Initiate") return FsmPhase::Initiate;
  if (s == "Passing") return FsmPhase::Passing;
  if (s == "Return") return FsmPhase::Return;
  throw std::invalid_argument("unknown fsm phase '" + s + "'");
}

FsmState initial_fsm_state(int home_lane, Rng& rng, const ExpertConfig& cfg) {
  FsmState f;
  f.home_lane = home_lane;
  f.target_lane = home_lane;
  f.overtake_trigger_dist = draw_trigger(rng, cfg);
  f.return_clear_dist = draw_return(rng, cfg);
  return f;
}

double speed_limit(double curvature, double friction_mu, double v_cruise, double kappa_floor) {
  return std::min(v_cruise, std::sqrt(friction_mu * kGravity / std::max(std::abs(curvature), kappa_floor)));
}

double curve_speed_target(const Track& track, double s, const ExpertConfig& cfg) {
  double v = kInf;
  constexpr double kStep = 5.0;
  for (double ahead = 0.0; ahead <= cfg.preview_distance; ahead += kStep) {
    const double sp = s + ahead;
    if (!track.closed() && sp > track.total_length()) break;
    const double lim = speed_limit(track.curvature_at(sp), cfg.friction_mu, cfg.v_cruise, cfg.kappa_floor);
    v = std::min(v, std::sqrt(lim * lim + 2.0 * cfg.preview_decel * ahead));
  }
  return std::min(v, cfg.v_cruise);
}

Action lane_keep_action(const WorldState& world, int target_lane, double v_target, Rng* noise_rng,
                        const ExpertConfig& cfg) {
  const Track& track = *world.track;
  const VehicleState& ego = world.ego;
  const FrenetCoord fc = track.world_to_frenet(ego.pose.position());
  const Pose road = track.centerline_pose(fc.s);
  const double kappa = track.curvature_at(fc.s);
  const double e = fc.d - track.lane_center(target_lane);
  const double he = wrap_angle(ego.pose.heading - road.heading);
  const double v = std::max(ego.speed, cfg.lat_v_floor);
  const double L = ego.wheelbase;
  const double kappa_eff = kappa / (1.0 - kappa * fc.d);
  const double lat_acc = -cfg.lat_omega * cfg.lat_omega * e - 2.0 * cfg.lat_zeta * cfg.lat_omega * v * std::sin(he);
  double steer = std::atan(L * kappa_eff + L * lat_acc / (v * v));
  if (noise_rng != nullptr) steer += gaussian(*noise_rng, cfg.steer_noise);
  const Action a{steer, cfg.speed_gain * (v_target - ego.speed)};
  return clamp_action(a, world.vehicle);
}

double gap_ahead_in_lane(const WorldState& world, FrenetCoord ego, int lane) {
  const Track& track = *world.track;
  double best = kInf;
  for (const Obstacle& ob : world.obstacles) {
    if (track.lane_of(ob.frenet.d) != lane) continue;
    const double g = track.signed_gap(ego.s, ob.frenet.s);
    if (g <= 0.0) continue;
    best = std::min(best, std::max(0.0, g - world.vehicle.half_length - ob.half_length));
  }
  return best;
}

double obstacle_speed_cap(const WorldState& world, FrenetCoord ego, int target_lane, const ExpertConfig& cfg) {
  const Track& track = *world.track;
  const double he = wrap_angle(world.ego.pose.heading - track.centerline_pose(ego.s).heading);
  const double ext = world.vehicle.half_width * std::abs(std::cos(he)) + world.vehicle.half_length * std::abs(std::sin(he));
  const double target_d = track.lane_center(target_lane);
  const double lo = std::min(ego.d, target_d) - ext - cfg.lateral_margin;
  const double hi = std::max(ego.d, target_d) + ext + cfg.lateral_margin;
  double cap = kInf;
  for (const Obstacle& ob : world.obstacles) {
    if (ob.frenet.d + ob.half_width < lo || ob.frenet.d - ob.half_width > hi) continue;
    const double g = track.signed_gap(ego.s, ob.frenet.s);
    if (g <= 0.0) continue;
    const double gap = g - world.vehicle.half_length - ob.half_length;
    double v = std::sqrt(2.0 * cfg.brake_decel * std::max(0.0, gap - cfg.stop_margin));
    if (gap > 1.5) v = std::max(v, cfg.creep_speed);
    cap = std::min(cap, v);
  }
  return cap;
}

FsmState fsm_step(const FsmState& fsm, const WorldState& world, Rng& rng, const ExpertConfig& cfg) {
  const Track& track = *world.track;
  const FrenetCoord ego = track.world_to_frenet(world.ego.pose.position());
  FsmState next = fsm;
  switch (fsm.phase) {
    case FsmPhase::LaneKeep: {
      const double gap = gap_ahead_in_lane(world, ego, fsm.home_lane);
      if (gap >= fsm.overtake_trigger_dist) break;
      std::vector<int> options;
      for (int lane : {fsm.home_lane - 1, fsm.home_lane + 1}) {
        if (lane < 0 || lane >= track.num_lanes()) continue;
        if (lane_free(world, ego, lane, 2.0, gap + cfg.pass_window)) options.push_back(lane);
      }
      if (options.empty()) break;
      next.phase = FsmPhase::Initiate;
      next.target_lane = options.size() == 1 ? options[0] : options[uniform_int(rng, 0, static_cast<int>(options.size()) - 1)];
      next.overtake_trigger_dist = draw_trigger(rng, cfg);
      next.return_clear_dist = draw_return(rng, cfg);
      break;
    }
    case FsmPhase::Initiate:
      if (std::abs(ego.d - track.lane_center(fsm.target_lane)) < cfg.center_tol) next.phase = FsmPhase::Passing;
      break;
    case FsmPhase::Passing:
      // Return once the home lane is clear for a long stretch; if the passing lane itself is
      // blocked ahead, settle for a short merge window instead.
      if (lane_free(world, ego, fsm.home_lane, fsm.return_clear_dist, cfg.return_lookahead) ||
          (gap_ahead_in_lane(world, ego, fsm.target_lane) < cfg.trigger_max &&
           lane_free(world, ego, fsm.home_lane, fsm.return_clear_dist, cfg.merge_lookahead))) {
        next.phase = FsmPhase::Return;
      }
      break;
    case FsmPhase::Return:
      if (std::abs(ego.d - track.lane_center(fsm.home_lane)) < cfg.center_tol) {
        next.phase = FsmPhase::LaneKeep;
        next.target_lane = fsm.home_lane;
      }
      break;
  }
  return next;
}

std::vector<double> AffordanceVector::to_vector() const {
  return {heading_error, lateral_offset, dist_left_mark, dist_right_mark, dist_ahead_same_lane, dist_ahead_adjacent_lane};
}

AffordanceVector AffordanceVector::from_vector(const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(kSize)) throw std::invalid_argument("affordance vector must have 6 entries");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

AffordanceVector compute_affordance(const WorldState& world, double max_range) {
  const Track& track = *world.track;
  const FrenetCoord fc = track.world_to_frenet(world.ego.pose.position());
  const int lane = track.lane_of(fc.d);
  const double center = track.lane_center(lane);
  AffordanceVector a;
  a.heading_error = wrap_angle(world.ego.pose.heading - track.centerline_pose(fc.s).heading);
  a.lateral_offset = fc.d;
  a.dist_left_mark = std::max(0.0, center + 0.5 * track.lane_width() - fc.d);
  a.dist_right_mark = std::max(0.0, fc.d - (center - 0.5 * track.lane_width()));
  a.dist_ahead_same_lane = std::min(max_range, gap_ahead_in_lane(world, fc, lane));
  double adj = kInf;
  for (int l : {lane - 1, lane + 1}) {
    if (l < 0 || l >= track.num_lanes()) continue;
    adj = std::min(adj, gap_ahead_in_lane(world, fc, l));
  }
  a.dist_ahead_adjacent_lane = std::min(max_range, adj);
  return a;
}

Expert::Expert(const ExpertConfig& cfg, int home_lane, Rng rng, bool noise)
    : cfg_(cfg), rng_(std::move(rng)), noise_(noise) {
  fsm_ = initial_fsm_state(home_lane, rng_, cfg_);
}

Action Expert::act(const WorldState& world) {
  const Track& track = *world.track;
  fsm_ = fsm_step(fsm_, world, rng_, cfg_);
  if (noise_ && step_count_ % std::max(1, cfg_.noise_period) == 0) speed_offset_ = gaussian(rng_, cfg_.speed_noise);
  ++step_count_;
  const FrenetCoord ego = track.world_to_frenet(world.ego.pose.position());
  const int lane = (fsm_.phase == FsmPhase::Initiate || fsm_.phase == FsmPhase::Passing) ? fsm_.target_lane : fsm_.home_lane;
  const double v_curve = curve_speed_target(track, ego.s, cfg_) + (noise_ ? speed_offset_ : 0.0);
  const double v_target = std::max(0.0, std::min(v_curve, obstacle_speed_cap(world, ego, lane, cfg_)));
  return lane_keep_action(world, lane, v_target, noise_ ? &rng_ : nullptr, cfg_);
}

}  // namespace trajclone
