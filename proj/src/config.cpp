#include "trajclone/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "trajclone/model.hpp"
#include "json.hpp"

namespace trajclone {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackGenConfig, lane_width, num_lanes, corners_min, corners_max,
                                                radius_min, radius_max, straight_min, straight_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackSetConfig, gen, train_ids, val_ids)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ObstacleConfig, count_min, count_max, spacing_min, spacing_max,
                                                clear_zone, half_length, half_width)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SensorConfig, n_beams, fov, max_range)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(VehicleParams, wheelbase, half_length, half_width, steer_max,
                                                accel_min, accel_max, v_hard_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExpertConfig, v_cruise, friction_mu, kappa_floor, preview_decel,
                                                preview_distance, lat_omega, lat_zeta, lat_v_floor, speed_gain,
                                                brake_decel, stop_margin, creep_speed, lateral_margin, steer_noise,
                                                speed_noise, noise_period, trigger_min, trigger_max, return_min,
                                                return_max, pass_window, return_lookahead, merge_lookahead,
                                                center_tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataConfig, sample_count, horizon, label_dt, sample_dt, dt_sim,
                                                episode_duration, train_fraction, empty_episode_prob,
                                                start_speed_min, start_speed_max, expert_noise)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, kind, modes, fusion_layers, w_traj, w_aff)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, batch_size, lr, clip_norm, freeze_epochs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CvarConfig, alpha, finetune_epochs, batch_size, lr)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GridConfig, w_aff, epochs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, agent, miles_target, episode_mile_cap, replan_interval,
                                                max_episodes, stall_speed, stall_time, start_speed, expert_noise,
                                                trace_ticks)
// The controller's vehicle limits always come from the top-level vehicle section.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LqrConfig, q_lateral, q_heading, r_steer, riccati_tol,
                                                riccati_max_iter, t_lookahead, speed_gain, resolve_speed_delta,
                                                min_model_speed, degenerate_radius, stop_accel)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AblationRun, label, model, eval)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AblationConfig, runs, dataset, w_aff)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, seed, tracks, obstacles, sensor, vehicle, expert,
                                                data, model, train, cvar, grid, eval, controller, ablation)

namespace {

void reject_unknown_keys(const json& given, const json& known, const std::string& where) {
  if (given.is_array() && known.is_array() && !known.empty()) {
    for (std::size_t i = 0; i < given.size(); ++i) {
      reject_unknown_keys(given[i], known[0], where + "[" + std::to_string(i) + "]");
    }
    return;
  }
  if (!given.is_object()) return;
  if (!known.is_object()) throw ConfigError(where + ": expected a value, found an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    reject_unknown_keys(value, known.at(key), path);
  }
}

bool is_multiple(double a, double b) {
  const double r = a / b;
  return r >= 1.0 - 1e-9 && std::abs(r - std::round(r)) < 1e-6;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (tracks.train_ids.empty() || tracks.val_ids.empty()) fail("tracks: need at least one train and one val track");
  std::set<int> train_set(tracks.train_ids.begin(), tracks.train_ids.end());
  for (int id : tracks.val_ids) {
    if (train_set.count(id)) fail("tracks: track " + std::to_string(id) + " is in both the train and val sets");
  }
  for (int id : tracks.train_ids) {
    if (id < 0) fail("tracks: ids must be nonnegative");
  }
  if (!is_multiple(data.sample_dt, data.dt_sim)) fail("data.sample_dt must be a multiple of data.dt_sim");
  if (!is_multiple(data.label_dt, data.sample_dt)) fail("data.label_dt must be a multiple of data.sample_dt");
  if (!is_multiple(eval.replan_interval, data.dt_sim)) fail("eval.replan_interval must be a multiple of data.dt_sim");
  if (data.sample_count < 1 || data.horizon < 2) fail("data: sample_count >= 1 and horizon >= 2 required");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) fail("data.train_fraction must lie in (0, 1)");
  try {
    model_kind_from_string(model.kind);
  } catch (const std::invalid_argument& e) {
    fail(std::string("model.kind: ") + e.what());
  }
  if (eval.agent != "expert") {
    try {
      model_kind_from_string(eval.agent);
    } catch (const std::invalid_argument&) {
      fail("eval.agent must be expert, trajectory-gmm, trajectory-l2 or baseline-actuation");
    }
  }
  if (model.modes < 1) fail("model.modes must be >= 1");
  if (!(model.w_traj > 0.0) || !(model.w_aff >= 0.0)) fail("model: w_traj > 0 and w_aff >= 0 required");
  for (int w : model.fusion_layers) {
    if (w < 1) fail("model.fusion_layers: widths must be positive");
  }
  if (train.epochs < 0 || train.batch_size < 1 || !(train.lr > 0.0) || !(train.clip_norm > 0.0) ||
      train.freeze_epochs < 0) {
    fail("train: epochs >= 0, batch_size >= 1, lr > 0, clip_norm > 0, freeze_epochs >= 0 required");
  }
  if (!(cvar.alpha >= 0.0 && cvar.alpha < 1.0)) fail("cvar.alpha must lie in [0, 1)");
  if (cvar.batch_size < static_cast<int>(cvar_min_batch(cvar.alpha))) {
    fail("cvar.batch_size must be at least " + std::to_string(cvar_min_batch(cvar.alpha)) + " for alpha " +
         std::to_string(cvar.alpha));
  }
  if (cvar.finetune_epochs < 0 || !(cvar.lr > 0.0)) fail("cvar: finetune_epochs >= 0 and lr > 0 required");
  if (grid.w_aff.empty()) fail("grid.w_aff must not be empty");
  for (double w : grid.w_aff) {
    if (!(w >= 0.0)) fail("grid.w_aff entries must be nonnegative");
  }
  if (!(eval.miles_target > 0.0) || !(eval.episode_mile_cap > 0.0) || eval.max_episodes < 1) {
    fail("eval: miles_target > 0, episode_mile_cap > 0, max_episodes >= 1 required");
  }
  if (ablation.runs.size() != 4) fail("ablation.runs must list exactly four runs");
  std::set<std::string> labels;
  for (const AblationRun& r : ablation.runs) {
    if (r.label.empty() || r.model.empty() || r.eval.empty()) fail("ablation.runs: label, model and eval are required");
    if (!labels.insert(r.label).second) fail("ablation.runs: duplicate label '" + r.label + "'");
  }
  if (!(ablation.w_aff >= 0.0)) fail("ablation.w_aff must be nonnegative");
  try {
    controller.validate();
  } catch (const std::invalid_argument& e) {
    fail(std::string("controller: ") + e.what());
  }
}

void ExperimentConfig::resolve() {
  controller.vehicle = vehicle;
  controller.label_dt = data.label_dt;
  controller.dt = data.dt_sim;
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json given;
  try {
    given = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!given.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(given, json(ExperimentConfig{}), "");
  ExperimentConfig cfg;
  try {
    cfg = given.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.resolve();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ExperimentConfig& cfg, int indent) { return json(cfg).dump(indent); }

std::vector<TrackEntry> build_tracks(const ExperimentConfig& cfg, const std::vector<int>& ids) {
  std::vector<TrackEntry> out;
  for (int id : ids) {
    out.push_back({id, std::make_shared<const Track>(generate_track(cfg.tracks.gen, cfg.seed, id))});
  }
  return out;
}

RecordingConfig recording_config(const ExperimentConfig& cfg) {
  RecordingConfig rc;
  rc.train_tracks = build_tracks(cfg, cfg.tracks.train_ids);
  rc.val_tracks = build_tracks(cfg, cfg.tracks.val_ids);
  rc.vehicle = cfg.vehicle;
  rc.sensor = cfg.sensor;
  rc.obstacles = cfg.obstacles;
  rc.expert = cfg.expert;
  rc.sample_count = cfg.data.sample_count;
  rc.horizon = cfg.data.horizon;
  rc.label_dt = cfg.data.label_dt;
  rc.sample_dt = cfg.data.sample_dt;
  rc.dt_sim = cfg.data.dt_sim;
  rc.episode_duration = cfg.data.episode_duration;
  rc.train_fraction = cfg.data.train_fraction;
  rc.empty_episode_prob = cfg.data.empty_episode_prob;
  rc.start_speed_min = cfg.data.start_speed_min;
  rc.start_speed_max = cfg.data.start_speed_max;
  rc.expert_noise = cfg.data.expert_noise;
  return rc;
}

}  // namespace trajclone
