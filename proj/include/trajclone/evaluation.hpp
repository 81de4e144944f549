#pragma once

#include <string>
#include <vector>

#include "trajclone/config.hpp"
#include "trajclone/model.hpp"

namespace trajclone {

inline constexpr double kMetersPerMile = 1609.344;

struct TickRow {
  double t = 0.0;
  Pose pose;
  double speed = 0.0;
  Action action;
};

enum class EpisodeOutcome { ObstacleCollision, OffRoad, MileCap, Stall, TargetReached };
std::string to_string(EpisodeOutcome o);
EpisodeOutcome episode_outcome_from_string(const std::string& s);

struct EpisodeTrace {
  int episode = 0;
  int track_id = 0;
  int obstacles = 0;
  EpisodeOutcome outcome = EpisodeOutcome::MileCap;
  double distance_m = 0.0;
  double duration_s = 0.0;
  std::vector<TickRow> ticks;  // replan ticks, only when requested

  bool collided() const {
    return outcome == EpisodeOutcome::ObstacleCollision || outcome == EpisodeOutcome::OffRoad;
  }
};

struct EvalReport {
  std::string agent;
  double miles = 0.0;
  int collisions = 0;
  int obstacle_collisions = 0;
  int offroad_collisions = 0;
  int stalls = 0;
  double collisions_per_100mi = 0.0;
  double mean_speed_mph = 0.0;  // distance over time; episodes end at the first contact
  std::vector<EpisodeTrace> episodes;
};

// Aggregate metrics derived purely from the traces.
EvalReport summarize(const std::string& agent, std::vector<EpisodeTrace> episodes);

// Drives episodes on the validation tracks until eval.miles_target is reached or eval.max_episodes
// have run. `model` may be null for the expert agent.
EvalReport eval_closed_loop(const ExperimentConfig& cfg, const std::string& agent, const Model* model);

void write_eval(const std::string& report_path, const std::string& traces_path, const EvalReport& r);
EvalReport read_eval_traces(const std::string& agent, const std::string& traces_path);

}  // namespace trajclone
