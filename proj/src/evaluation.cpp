#include "trajclone/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>

#include "json.hpp"
#include "trajclone/baseline.hpp"
#include "trajclone/controller.hpp"

namespace trajclone {

using nlohmann::json;

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr double kMphPerMps = 3600.0 / kMetersPerMile;

}  // namespace

std::string to_string(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::ObstacleCollision: return "collision-obstacle";
    case EpisodeOutcome::OffRoad: return "collision-offroad";
    case EpisodeOutcome::MileCap: return "mile-cap";
    case EpisodeOutcome::Stall: return "stall";
    case EpisodeOutcome::TargetReached: return "target-reached";
  }
  return "?";
}

EpisodeOutcome episode_outcome_from_string(const std::string& s) {
  for (EpisodeOutcome o : {EpisodeOutcome::ObstacleCollision, EpisodeOutcome::OffRoad, EpisodeOutcome::MileCap,
                           EpisodeOutcome::Stall, EpisodeOutcome::TargetReached}) {
    if (to_string(o) == s) return o;
  }
  throw std::invalid_argument("unknown episode outcome '" + s + "'");
}

EvalReport summarize(const std::string& agent, std::vector<EpisodeTrace> episodes) {
  EvalReport r;
  r.agent = agent;
  double meters = 0.0, seconds = 0.0;
  for (const EpisodeTrace& e : episodes) {
    meters += e.distance_m;
    seconds += e.duration_s;
    r.obstacle_collisions += e.outcome == EpisodeOutcome::ObstacleCollision;
    r.offroad_collisions += e.outcome == EpisodeOutcome::OffRoad;
    r.stalls += e.outcome == EpisodeOutcome::Stall;
  }
  r.collisions = r.obstacle_collisions + r.offroad_collisions;
  r.miles = meters / kMetersPerMile;
  r.collisions_per_100mi = r.miles > 0.0 ? 100.0 * r.collisions / r.miles : 0.0;
  r.mean_speed_mph = seconds > 0.0 ? meters / seconds * kMphPerMps : 0.0;
  r.episodes = std::move(episodes);
  return r;
}

EvalReport eval_closed_loop(const ExperimentConfig& cfg, const std::string& agent, const Model* model) {
  const bool is_expert = agent == "expert";
  std::optional<ModelKind> kind;
  if (!is_expert) {
    kind = model_kind_from_string(agent);
    if (model == nullptr) throw std::invalid_argument("agent " + agent + " needs a model");
    if (model->kind != *kind) {
      throw std::invalid_argument("model of kind " + to_string(model->kind) + " cannot drive as " + agent);
    }
  }

  const std::vector<TrackEntry> tracks = build_tracks(cfg, cfg.tracks.val_ids);
  const double dt = cfg.data.dt_sim;
  const int steps_per_replan = static_cast<int>(std::lround(cfg.eval.replan_interval / dt));
  const int home = home_lane_for(cfg.tracks.gen.num_lanes);
  const double target_m = cfg.eval.miles_target * kMetersPerMile;
  const double cap_m = cfg.eval.episode_mile_cap * kMetersPerMile;
  const std::uint64_t stream_seed = mix_seed(cfg.seed, kEvalStream);

  std::vector<EpisodeTrace> traces;
  double driven = 0.0;
  for (int ep = 0; ep < cfg.eval.max_episodes && driven < target_m; ++ep) {
    const TrackEntry& entry = tracks[static_cast<std::size_t>(ep) % tracks.size()];
    const Track& track = *entry.track;
    Rng rng = make_rng(stream_seed, static_cast<std::uint64_t>(ep));
    const double s0 = track.closed() ? uniform(rng, 0.0, track.total_length()) : 0.0;
    std::vector<Obstacle> obs = place_obstacles(track, rng, cfg.obstacles, s0);

    VehicleState ego;
    const Pose c = track.centerline_pose(s0);
    const Vec2 p = track.frenet_to_world({s0, track.lane_center(home)});
    ego.pose = {p.x, p.y, c.heading};
    ego.speed = cfg.eval.start_speed * cfg.expert.v_cruise;
    ego.wheelbase = cfg.vehicle.wheelbase;

    EpisodeTrace tr;
    tr.episode = ep;
    tr.track_id = entry.id;
    tr.obstacles = static_cast<int>(obs.size());
    WorldState world(entry.track, std::move(obs), ego, cfg.vehicle);

    std::optional<Expert> expert;
    if (is_expert) {
      expert.emplace(cfg.expert, home, make_rng(stream_seed ^ 0x5eed0001ULL, static_cast<std::uint64_t>(ep)),
                     cfg.eval.expert_noise);
    }
    LqrFollower follower(cfg.controller);
    Action held;
    double plan_time = 0.0;
    double slow_time = 0.0;
    const double episode_cap = std::min(cap_m, target_m - driven);

    for (long i = 0;; ++i) {
      const double t = static_cast<double>(i) * dt;
      if (i % steps_per_replan == 0 && !is_expert) {
        const Observation o = observe(world, cfg.sensor);
        if (*kind == ModelKind::Actuation) {
          held = baseline_policy(*model, o, cfg.vehicle);
        } else {
          follower.set_plan(predict_trajectory(*model, o), world.ego.pose);
          plan_time = t;
        }
      }
      Action a;
      if (is_expert) {
        a = expert->act(world);
      } else if (*kind == ModelKind::Actuation) {
        a = held;
      } else {
        a = follower.act(world.ego, t - plan_time);
      }
      if (cfg.eval.trace_ticks && i % steps_per_replan == 0) tr.ticks.push_back({t, world.ego.pose, world.ego.speed, a});

      const Vec2 before = world.ego.pose.position();
      world.ego = step(world.ego, a, dt, cfg.vehicle.v_hard_max);
      world.sim_time += dt;
      tr.distance_m += norm(world.ego.pose.position() - before);
      tr.duration_s += dt;

      const CollisionKind ck = check_collision(world);
      if (ck == CollisionKind::Obstacle) {
        tr.outcome = EpisodeOutcome::ObstacleCollision;
        break;
      }
      if (ck == CollisionKind::OffRoad) {
        tr.outcome = EpisodeOutcome::OffRoad;
        break;
      }
      slow_time = world.ego.speed < cfg.eval.stall_speed ? slow_time + dt : 0.0;
      if (slow_time >= cfg.eval.stall_time) {
        tr.outcome = EpisodeOutcome::Stall;
        break;
      }
      if (tr.distance_m >= episode_cap) {
        tr.outcome = episode_cap < cap_m ? EpisodeOutcome::TargetReached : EpisodeOutcome::MileCap;
        break;
      }
    }
    driven += tr.distance_m;
    traces.push_back(std::move(tr));
  }
  return summarize(agent, std::move(traces));
}

void write_eval(const std::string& report_path, const std::string& traces_path, const EvalReport& r) {
  {
    std::ofstream out(traces_path);
    if (!out) throw std::runtime_error("cannot write " + traces_path);
    for (const EpisodeTrace& e : r.episodes) {
      json j = {{"episode", e.episode},       {"track_id", e.track_id},     {"obstacles", e.obstacles},
                {"outcome", to_string(e.outcome)}, {"distance_m", e.distance_m}, {"duration_s", e.duration_s}};
      if (!e.ticks.empty()) {
        json ticks = json::array();
        for (const TickRow& t : e.ticks) {
          ticks.push_back({t.t, t.pose.x, t.pose.y, t.pose.heading, t.speed, t.action.steer, t.action.accel});
        }
        j["ticks"] = std::move(ticks);
      }
      out << j.dump() << '\n';
    }
  }
  json j = {{"agent", r.agent},
            {"miles", r.miles},
            {"collisions", r.collisions},
            {"obstacle_collisions", r.obstacle_collisions},
            {"offroad_collisions", r.offroad_collisions},
            {"stalls", r.stalls},
            {"episodes", r.episodes.size()},
            {"collisions_per_100mi", r.collisions_per_100mi},
            {"mean_speed_mph", r.mean_speed_mph}};
  std::ofstream out(report_path);
  if (!out) throw std::runtime_error("cannot write " + report_path);
  out << j.dump(2) << '\n';
}

EvalReport read_eval_traces(const std::string& agent, const std::string& traces_path) {
  std::ifstream in(traces_path);
  if (!in) throw std::runtime_error("cannot read " + traces_path);
  std::vector<EpisodeTrace> eps;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    EpisodeTrace e;
    e.episode = j.at("episode").get<int>();
    e.track_id = j.at("track_id").get<int>();
    e.obstacles = j.at("obstacles").get<int>();
    e.outcome = episode_outcome_from_string(j.at("outcome").get<std::string>());
    e.distance_m = j.at("distance_m").get<double>();
    e.duration_s = j.at("duration_s").get<double>();
    eps.push_back(e);
  }
  return summarize(agent, std::move(eps));
}

}  // namespace trajclone
