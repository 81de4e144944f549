#include "trajclone/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>
#include <stdexcept>

#include "json.hpp"

namespace trajclone {

using nlohmann::json;

namespace {

constexpr std::uint64_t kExpertStream = 0x5eed0001ULL;

int ratio(double a, double b) {
  const double r = a / b;
  const int n = static_cast<int>(std::lround(r));
  if (n <= 0 || std::abs(r - n) > 1e-9) {
    throw std::invalid_argument("time steps must be integer multiples of each other");
  }
  return n;
}

json record_to_json(const Demonstration& d, const std::string& split) {
  json j;
  j["split"] = split;
  j["track_id"] = d.track_id;
  j["episode"] = d.episode;
  j["t"] = d.t;
  j["fsm"] = to_string(d.fsm_phase);
  j["ranges"] = d.observation.ranges;
  j["speed"] = d.observation.speed;
  json traj = json::array();
  for (const Vec2& p : d.trajectory) traj.push_back({p.x, p.y});
  j["traj"] = traj;
  j["aff"] = d.affordance.to_vector();
  j["pose"] = {d.pose.x, d.pose.y, d.pose.heading};
  if (d.expert_action) j["action"] = {d.expert_action->steer, d.expert_action->accel};
  if (d.actuation_label) j["actuation"] = {d.actuation_label->steer, d.actuation_label->accel};
  return j;
}

Demonstration record_from_json(const json& j) {
  Demonstration d;
  d.track_id = j.at("track_id").get<int>();
  d.episode = j.at("episode").get<int>();
  d.t = j.at("t").get<double>();
  d.fsm_phase = fsm_phase_from_string(j.at("fsm").get<std::string>());
  d.observation.ranges = j.at("ranges").get<std::vector<double>>();
  d.observation.speed = j.at("speed").get<double>();
  for (const json& p : j.at("traj")) d.trajectory.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  d.affordance = AffordanceVector::from_vector(j.at("aff").get<std::vector<double>>());
  const auto pose = j.at("pose").get<std::vector<double>>();
  d.pose = {pose.at(0), pose.at(1), pose.at(2)};
  if (j.contains("action")) d.expert_action = Action{j["action"].at(0).get<double>(), j["action"].at(1).get<double>()};
  if (j.contains("actuation")) {
    d.actuation_label = Action{j["actuation"].at(0).get<double>(), j["actuation"].at(1).get<double>()};
  }
  return d;
}

}  // namespace

std::vector<double> observation_features(const Observation& obs, const DatasetHeader& header) {
  std::vector<double> f;
  f.reserve(obs.ranges.size() + 1);
  for (double r : obs.ranges) f.push_back(r / header.max_range);
  f.push_back(obs.speed / header.speed_scale);
  return f;
}

std::vector<double> flatten_trajectory(const std::vector<Vec2>& traj) {
  std::vector<double> flat;
  flat.reserve(2 * traj.size());
  for (const Vec2& p : traj) {
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  return flat;
}

std::vector<Vec2> unflatten_trajectory(const std::vector<double>& flat) {
  if (flat.size() % 2 != 0) throw std::invalid_argument("flattened trajectory must have even length");
  std::vector<Vec2> traj(flat.size() / 2);
  for (std::size_t k = 0; k < traj.size(); ++k) traj[k] = {flat[2 * k], flat[2 * k + 1]};
  return traj;
}

int home_lane_for(int num_lanes) { return (num_lanes - 1) / 2; }

EpisodeRecording record_episode(const RecordingConfig& cfg, const TrackEntry& entry, int episode,
                                std::uint64_t master_seed, const std::optional<std::vector<Obstacle>>& obstacles) {
  const Track& track = *entry.track;
  Rng rng = make_rng(master_seed, static_cast<std::uint64_t>(episode));
  const int home = home_lane_for(track.num_lanes());

  // With explicit obstacles the episode spawns deterministically at the track start; open tracks
  // leave room for the rear overhang.
  const double start = track.closed() ? 0.0 : cfg.vehicle.half_length + 1.0;
  double s0 = start;
  double v0 = cfg.start_speed_max * cfg.expert.v_cruise;
  std::vector<Obstacle> obs;
  if (obstacles) {
    obs = *obstacles;
  } else {
    s0 = track.closed() ? uniform(rng, 0.0, track.total_length()) : start;
    v0 = uniform(rng, cfg.start_speed_min, cfg.start_speed_max) * cfg.expert.v_cruise;
    if (uniform(rng, 0.0, 1.0) >= cfg.empty_episode_prob) obs = place_obstacles(track, rng, cfg.obstacles, s0);
  }

  VehicleState ego;
  const Pose c = track.centerline_pose(s0);
  const Vec2 p = track.frenet_to_world({s0, track.lane_center(home)});
  ego.pose = {p.x, p.y, c.heading};
  ego.speed = v0;
  ego.wheelbase = cfg.vehicle.wheelbase;
  WorldState world(entry.track, std::move(obs), ego, cfg.vehicle);

  Expert expert(cfg.expert, home, make_rng(master_seed ^ kExpertStream, static_cast<std::uint64_t>(episode)),
                cfg.expert_noise);

  const int steps_per_tick = ratio(cfg.sample_dt, cfg.dt_sim);
  const int ticks_per_label = ratio(cfg.label_dt, cfg.sample_dt);
  const int last_tick = static_cast<int>(std::lround(cfg.episode_duration / cfg.sample_dt));

  EpisodeRecording out;
  std::vector<Demonstration> ticks;
  ticks.reserve(static_cast<std::size_t>(last_tick) + 1);
  const int total_steps = last_tick * steps_per_tick;
  for (int i = 0; i <= total_steps; ++i) {
    const bool at_tick = i % steps_per_tick == 0;
    Demonstration rec;
    if (at_tick) {
      rec.observation = observe(world, cfg.sensor);
      rec.affordance = compute_affordance(world, cfg.sensor.max_range);
      rec.pose = world.ego.pose;
      rec.t = i * cfg.dt_sim;
      rec.track_id = entry.id;
      rec.episode = episode;
    }
    if (i == total_steps) {
      rec.fsm_phase = expert.fsm().phase;
      ticks.push_back(std::move(rec));
      break;
    }
    const Action a = expert.act(world);
    if (at_tick) {
      rec.fsm_phase = expert.fsm().phase;
      rec.expert_action = a;
      ticks.push_back(std::move(rec));
    }
    world.ego = step(world.ego, a, cfg.dt_sim, cfg.vehicle.v_hard_max);
    world.sim_time += cfg.dt_sim;
    const CollisionKind ck = check_collision(world);
    if (ck != CollisionKind::None) {
      out.collision = ck;
      out.collision_time = world.sim_time;
      return out;
    }
  }

  const int horizon_ticks = cfg.horizon * ticks_per_label;
  for (int j = 0; j + horizon_ticks <= last_tick; ++j) {
    Demonstration rec = ticks[static_cast<std::size_t>(j)];
    rec.trajectory.resize(static_cast<std::size_t>(cfg.horizon));
    for (int k = 0; k < cfg.horizon; ++k) {
      const Pose& future = ticks[static_cast<std::size_t>(j + (k + 1) * ticks_per_label)].pose;
      rec.trajectory[static_cast<std::size_t>(k)] = world_to_car_frame(rec.pose, future.position());
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

RecordingResult record_demonstrations(const RecordingConfig& cfg, std::uint64_t master_seed) {
  if (cfg.train_tracks.empty() || cfg.val_tracks.empty()) {
    throw std::invalid_argument("recording needs at least one training and one validation track");
  }
  for (const TrackEntry& a : cfg.train_tracks) {
    for (const TrackEntry& b : cfg.val_tracks) {
      if (a.id == b.id) throw std::invalid_argument("track " + std::to_string(a.id) + " is in both splits");
    }
  }
  const int ticks_per_label = ratio(cfg.label_dt, cfg.sample_dt);
  const int last_tick = static_cast<int>(std::lround(cfg.episode_duration / cfg.sample_dt));
  const int per_episode = last_tick + 1 - cfg.horizon * ticks_per_label;
  if (per_episode <= 0) throw std::invalid_argument("episode shorter than the label horizon");
  const int episodes = (cfg.sample_count + per_episode - 1) / per_episode;
  const int train_eps = static_cast<int>(std::lround(cfg.train_fraction * episodes));

  RecordingResult result;
  Dataset& ds = result.dataset;
  ds.header.horizon = cfg.horizon;
  ds.header.label_dt = cfg.label_dt;
  ds.header.sample_dt = cfg.sample_dt;
  ds.header.n_beams = cfg.sensor.n_beams;
  ds.header.fov = cfg.sensor.fov;
  ds.header.max_range = cfg.sensor.max_range;
  ds.header.speed_scale = cfg.vehicle.v_hard_max;
  ds.header.lane_width = cfg.train_tracks.front().track->lane_width();

  result.report.episodes = episodes;
  result.report.train_episodes = train_eps;
  result.report.val_episodes = episodes - train_eps;
  for (int e = 0; e < episodes; ++e) {
    const bool is_train = e < train_eps;
    const auto& pool = is_train ? cfg.train_tracks : cfg.val_tracks;
    const int local = is_train ? e : e - train_eps;
    const TrackEntry& entry = pool[static_cast<std::size_t>(local) % pool.size()];
    EpisodeRecording rec = record_episode(cfg, entry, e, master_seed);
    if (rec.collision != CollisionKind::None) {
      ++result.report.aborted_episodes;
      result.report.abort_reasons.push_back("episode " + std::to_string(e) + " track " + std::to_string(entry.id) +
                                            ": " + to_string(rec.collision) + " at t=" +
                                            std::to_string(rec.collision_time));
      continue;
    }
    auto& dst = is_train ? ds.train : ds.val;
    dst.insert(dst.end(), std::make_move_iterator(rec.records.begin()), std::make_move_iterator(rec.records.end()));
  }
  auto order = [](const Demonstration& a, const Demonstration& b) {
    if (a.track_id != b.track_id) return a.track_id < b.track_id;
    if (a.episode != b.episode) return a.episode < b.episode;
    return a.t < b.t;
  };
  std::stable_sort(ds.train.begin(), ds.train.end(), order);
  std::stable_sort(ds.val.begin(), ds.val.end(), order);
  return result;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  json h;
  h["schema"] = "traj-clone/dataset";
  h["version"] = ds.header.version;
  h["K"] = ds.header.horizon;
  h["label_dt"] = ds.header.label_dt;
  h["sample_dt"] = ds.header.sample_dt;
  h["n_beams"] = ds.header.n_beams;
  h["fov"] = ds.header.fov;
  h["lane_width"] = ds.header.lane_width;
  h["normalization"] = {{"range_scale", ds.header.max_range}, {"speed_scale", ds.header.speed_scale}};
  h["counts"] = {{"train", ds.train.size()}, {"val", ds.val.size()}};
  out << h.dump() << '\n';
  for (const auto& d : ds.train) out << record_to_json(d, "train").dump() << '\n';
  for (const auto& d : ds.val) out << record_to_json(d, "val").dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset " + path + " is empty");
  const json h = json::parse(line);
  if (h.value("schema", "") != "traj-clone/dataset") throw std::runtime_error(path + " is not a traj-clone dataset");
  Dataset ds;
  ds.header.version = h.at("version").get<int>();
  if (ds.header.version != 1) throw std::runtime_error("unsupported dataset version");
  ds.header.horizon = h.at("K").get<int>();
  ds.header.label_dt = h.at("label_dt").get<double>();
  ds.header.sample_dt = h.at("sample_dt").get<double>();
  ds.header.n_beams = h.at("n_beams").get<int>();
  ds.header.fov = h.at("fov").get<double>();
  ds.header.lane_width = h.at("lane_width").get<double>();
  ds.header.max_range = h.at("normalization").at("range_scale").get<double>();
  ds.header.speed_scale = h.at("normalization").at("speed_scale").get<double>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string split = j.at("split").get<std::string>();
    Demonstration d = record_from_json(j);
    if (split == "train") {
      ds.train.push_back(std::move(d));
    } else if (split == "val") {
      ds.val.push_back(std::move(d));
    } else {
      throw std::runtime_error("unknown split '" + split + "'");
    }
  }
  return ds;
}

double trajectory_curvature(const std::vector<Vec2>& traj) {
  if (traj.empty()) return 0.0;
  const Vec2 p = traj.back();
  const double r2 = dot(p, p);
  return r2 > 1e-9 ? 2.0 * p.y / r2 : 0.0;
}

double rare_fraction(const std::vector<Demonstration>& records, double curvature_threshold) {
  if (records.empty()) return 0.0;
  std::size_t rare = 0;
  for (const Demonstration& d : records) {
    if (d.fsm_phase != FsmPhase::LaneKeep || std::abs(trajectory_curvature(d.trajectory)) > curvature_threshold) {
      ++rare;
    }
  }
  return static_cast<double>(rare) / static_cast<double>(records.size());
}

ModalityStats overtake_modality(const std::vector<Demonstration>& records, double near, double far,
                                double min_separation, int min_count) {
  std::map<std::tuple<long, long, long>, std::vector<double>> bins;
  for (const Demonstration& d : records) {
    const AffordanceVector& a = d.affordance;
    if (d.trajectory.empty() || a.dist_ahead_same_lane < near || a.dist_ahead_same_lane > far) continue;
    if (std::min(a.dist_left_mark, a.dist_right_mark) < 0.5 * (a.dist_left_mark + a.dist_right_mark) - 0.5) continue;
    const auto key = std::make_tuple(std::lround(std::floor(a.dist_ahead_same_lane / 5.0)),
                                     std::lround(std::floor(d.observation.speed / 2.0)),
                                     std::lround(a.lateral_offset / 0.5));
    bins[key].push_back(d.trajectory.back().y);
  }
  ModalityStats st;
  for (auto& [key, ys] : bins) {
    if (static_cast<int>(ys.size()) < min_count) continue;
    ++st.bins;
    std::sort(ys.begin(), ys.end());
    std::size_t split = 1;
    for (std::size_t i = 1; i < ys.size(); ++i) {
      if (ys[i] - ys[i - 1] > ys[split] - ys[split - 1]) split = i;
    }
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) (i < split ? lo : hi) += ys[i];
    lo /= static_cast<double>(split);
    hi /= static_cast<double>(ys.size() - split);
    if (hi - lo >= min_separation) ++st.bimodal_bins;
  }
  return st;
}

}  // namespace trajclone
