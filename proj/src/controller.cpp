#include "trajclone/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trajclone {

RiccatiSolution solve_discrete_riccati(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                                       const Eigen::MatrixXd& R, double tol, int max_iter) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw std::invalid_argument("solve_discrete_riccati: inconsistent dimensions");
  }
  Eigen::MatrixXd P = Q;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd BtP = B.transpose() * P;
    const Eigen::MatrixXd S = R + BtP * B;
    const Eigen::MatrixXd K = S.ldlt().solve(BtP * A);
    Eigen::MatrixXd next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    next = 0.5 * (next + next.transpose());
    const double diff = (next - P).cwiseAbs().rowwise().sum().maxCoeff();
    P = std::move(next);
    if (diff < tol) {
      const Eigen::MatrixXd BtPn = B.transpose() * P;
      return {(R + BtPn * B).ldlt().solve(BtPn * A), P, it};
    }
  }
  throw std::runtime_error("Riccati iteration did not converge in " + std::to_string(max_iter) + " iterations");
}

void LqrConfig::validate() const {
  if (q_lateral < 0 || q_heading < 0) throw std::invalid_argument("LQR state costs must be nonnegative");
  if (!(r_steer > 0)) throw std::invalid_argument("LQR steering cost must be positive");
  if (!(dt > 0) || !(label_dt > 0)) throw std::invalid_argument("LQR time steps must be positive");
  if (t_lookahead < 0) throw std::invalid_argument("lookahead must be nonnegative");
}

void lateral_error_model(double v, double wheelbase, double dt, Eigen::Matrix2d& A, Eigen::Vector2d& B) {
  A << 1.0, v * dt, 0.0, 1.0;
  B << v * v * dt * dt / (2.0 * wheelbase), v * dt / wheelbase;
}

LqrFollower::LqrFollower(LqrConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

void LqrFollower::set_plan(const std::vector<Vec2>& trajectory, const Pose& plan_pose) {
  if (trajectory.size() < 2) throw std::invalid_argument("trajectory needs at least 2 points");
  plan_world_.clear();
  plan_world_.push_back(plan_pose.position());
  degenerate_ = true;
  for (const Vec2& p : trajectory) {
    if (norm(p) > cfg_.degenerate_radius) degenerate_ = false;
    plan_world_.push_back(car_to_world_frame(plan_pose, p));
  }
}

std::optional<ReferencePoint> LqrFollower::reference(const Pose& pose, double elapsed) const {
  if (plan_world_.empty() || degenerate_) return std::nullopt;
  const int n = static_cast<int>(plan_world_.size()) - 1;  // segments
  std::vector<Vec2> pts(plan_world_.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = world_to_car_frame(pose, plan_world_[i]);

  std::vector<double> seg_heading(static_cast<std::size_t>(n)), seg_len(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Vec2 d = pts[static_cast<std::size_t>(k) + 1] - pts[static_cast<std::size_t>(k)];
    seg_len[static_cast<std::size_t>(k)] = norm(d);
    seg_heading[static_cast<std::size_t>(k)] = std::atan2(d.y, d.x);
  }
  // Segments too short to define a direction inherit the nearest usable heading.
  constexpr double kMinLen = 1e-3;
  for (int k = 1; k < n; ++k) {
    if (seg_len[static_cast<std::size_t>(k)] < kMinLen) seg_heading[static_cast<std::size_t>(k)] = seg_heading[static_cast<std::size_t>(k) - 1];
  }
  for (int k = n - 2; k >= 0; --k) {
    if (seg_len[static_cast<std::size_t>(k)] < kMinLen) seg_heading[static_cast<std::size_t>(k)] = seg_heading[static_cast<std::size_t>(k) + 1];
  }

  const double T = std::max(0.0, elapsed + cfg_.t_lookahead);
  const int k = std::min(n - 1, static_cast<int>(std::floor(T / cfg_.label_dt)));
  const double u = T / cfg_.label_dt - k;  // may exceed 1 on the last segment (extrapolation)
  const std::size_t ks = static_cast<std::size_t>(k);

  ReferencePoint ref;
  ref.position = pts[ks] + u * (pts[ks + 1] - pts[ks]);
  ref.heading = seg_heading[ks];
  ref.target_speed = seg_len[ks] / cfg_.label_dt;

  // Knot curvature from heading change across adjacent segments, linear in time between knots.
  auto knot_kappa = [&](int j) {
    const std::size_t a = static_cast<std::size_t>(j) - 1, b = static_cast<std::size_t>(j);
    const double len = 0.5 * (seg_len[a] + seg_len[b]);
    return len < kMinLen ? 0.0 : wrap_angle(seg_heading[b] - seg_heading[a]) / len;
  };
  if (n < 2) {
    ref.curvature = 0.0;
  } else {
    const double tk = T / cfg_.label_dt;
    const int j0 = std::clamp(static_cast<int>(std::floor(tk)), 1, n - 1);
    const int j1 = std::min(j0 + 1, n - 1);
    const double w = std::clamp(tk - j0, 0.0, 1.0);
    ref.curvature = (1.0 - w) * knot_kappa(j0) + w * knot_kappa(j1);
  }
  return ref;
}

void LqrFollower::update_gain(double v) {
  if (gain_speed_ >= 0.0 && std::abs(v - gain_speed_) <= cfg_.resolve_speed_delta) return;
  const double v_model = std::max(v, cfg_.min_model_speed);
  Eigen::Matrix2d A;
  Eigen::Vector2d B;
  lateral_error_model(v_model, cfg_.vehicle.wheelbase, cfg_.dt, A, B);
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  Q(0, 0) = cfg_.q_lateral;
  Q(1, 1) = cfg_.q_heading;
  Eigen::MatrixXd R(1, 1);
  R(0, 0) = cfg_.r_steer;
  const RiccatiSolution sol = solve_discrete_riccati(A, B, Q, R, cfg_.riccati_tol, cfg_.riccati_max_iter);
  gain_ = sol.K.row(0);
  gain_speed_ = v;
  ++solves_;
}

Action LqrFollower::act(const VehicleState& state, double elapsed) {
  const std::optional<ReferencePoint> ref = reference(state.pose, elapsed);
  if (!ref) return clamp_action({0.0, cfg_.stop_accel}, cfg_.vehicle);
  update_gain(state.speed);

  const Vec2 normal{-std::sin(ref->heading), std::cos(ref->heading)};
  Eigen::Vector2d x;
  x << -dot(ref->position, normal), -ref->heading;
  const double feedforward = std::atan(cfg_.vehicle.wheelbase * ref->curvature);
  Action a;
  a.steer = feedforward - gain_.dot(x);
  a.accel = cfg_.speed_gain * (ref->target_speed - state.speed);
  return clamp_action(a, cfg_.vehicle);
}

Action follow(const std::vector<Vec2>& trajectory, const VehicleState& state, const LqrConfig& cfg) {
  LqrFollower f(cfg);
  f.set_plan(trajectory, state.pose);
  return f.act(state, 0.0);
}

}  // namespace trajclone
