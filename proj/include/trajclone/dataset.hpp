#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trajclone/expert.hpp"
#include "trajclone/simulator.hpp"

namespace trajclone {

struct Demonstration {
  Observation observation;
  std::vector<Vec2> trajectory;  // ego-frame positions at t + (k+1)*label_dt
  AffordanceVector affordance;
  int track_id = 0;
  int episode = 0;
  double t = 0.0;
  FsmPhase fsm_phase = FsmPhase::LaneKeep;
  Pose pose;
  std::optional<Action> expert_action;
  std::optional<Action> actuation_label;
};

struct DatasetHeader {
  int version = 1;
  int horizon = 5;
  double label_dt = 0.3;
  double sample_dt = 0.1;
  int n_beams = 19;
  double fov = std::numbers::pi;
  double max_range = 60.0;
  double speed_scale = 30.0;  // observation speed is divided by this at the network input
  double lane_width = 3.5;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Demonstration> train;
  std::vector<Demonstration> val;
};

// Network input: ranges / max_range followed by speed / speed_scale.
std::vector<double> observation_features(const Observation& obs, const DatasetHeader& header);
// Flattened [x0, y0, x1, y1, ...] trajectory target.
std::vector<double> flatten_trajectory(const std::vector<Vec2>& traj);
std::vector<Vec2> unflatten_trajectory(const std::vector<double>& flat);

struct TrackEntry {
  int id = 0;
  std::shared_ptr<const Track> track;
};

struct RecordingConfig {
  std::vector<TrackEntry> train_tracks;
  std::vector<TrackEntry> val_tracks;
  VehicleParams vehicle;
  SensorConfig sensor;
  ObstacleConfig obstacles;
  ExpertConfig expert;
  int sample_count = 50000;
  int horizon = 5;
  double label_dt = 0.3;
  double sample_dt = 0.1;
  double dt_sim = 0.02;
  double episode_duration = 50.0;
  double train_fraction = 0.7;
  double empty_episode_prob = 0.3;
  double start_speed_min = 0.6;  // fractions of v_cruise
  double start_speed_max = 1.0;
  bool expert_noise = true;
};

struct RecordingReport {
  int episodes = 0;
  int train_episodes = 0;
  int val_episodes = 0;
  int aborted_episodes = 0;
  std::vector<std::string> abort_reasons;
};

struct RecordingResult {
  Dataset dataset;
  RecordingReport report;
};

int home_lane_for(int num_lanes);

// Runs expert episodes and labels each sample tick with the realized future trajectory.
RecordingResult record_demonstrations(const RecordingConfig& cfg, std::uint64_t master_seed);

struct EpisodeRecording {
  std::vector<Demonstration> records;
  CollisionKind collision = CollisionKind::None;
  double collision_time = 0.0;
};
// One expert episode. `obstacles` overrides the random placement when given. On collision the
// records are discarded and the collision is reported.
EpisodeRecording record_episode(const RecordingConfig& cfg, const TrackEntry& track, int episode,
                                std::uint64_t master_seed,
                                const std::optional<std::vector<Obstacle>>& obstacles = std::nullopt);

// Curvature of the circle tangent to the ego heading that passes through the last label point.
double trajectory_curvature(const std::vector<Vec2>& traj);

// Share of records with |trajectory_curvature| above the threshold or a non-LaneKeep phase.
double rare_fraction(const std::vector<Demonstration>& records, double curvature_threshold = 1.0 / 200.0);

struct ModalityStats {
  int bins = 0;          // bins with at least min_count records
  int bimodal_bins = 0;  // bins whose final lateral offsets split into two groups >= min_separation apart
  double fraction() const { return bins > 0 ? static_cast<double>(bimodal_bins) / bins : 0.0; }
};

// Records still in their lane with a same-lane obstacle between near and far meters ahead, binned
// on (gap, speed, lateral offset). The last label point's lateral coordinate is split at its
// largest gap; a bin is bimodal when the two group means differ by at least min_separation.
ModalityStats overtake_modality(const std::vector<Demonstration>& records, double near, double far,
                                double min_separation, int min_count = 4);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path);

}  // namespace trajclone
