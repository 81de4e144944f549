#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajclone/controller.hpp"
#include "trajclone/dataset.hpp"
#include "trajclone/losses.hpp"
#include "trajclone/track_gen.hpp"

namespace trajclone {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrackSetConfig {
  TrackGenConfig gen;
  std::vector<int> train_ids{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> val_ids{8, 9, 10, 11};
};

struct DataConfig {
  int sample_count = 50000;
  int horizon = 5;
  double label_dt = 0.3;
  double sample_dt = 0.1;
  double dt_sim = 0.02;
  double episode_duration = 50.0;
  double train_fraction = 0.7;
  double empty_episode_prob = 0.3;
  double start_speed_min = 0.6;
  double start_speed_max = 1.0;
  bool expert_noise = true;
};

struct ModelConfig {
  std::string kind = "trajectory-gmm";  // trajectory-gmm | trajectory-l2 | baseline-actuation
  int modes = 2;
  std::vector<int> fusion_layers{128, 128, 64};
  double w_traj = 1.0;
  double w_aff = 0.0;  // > 0 adds the affordance head
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-3;
  double clip_norm = 10.0;
  int freeze_epochs = 5;
};

struct CvarConfig {
  double alpha = 0.9;
  int finetune_epochs = 1;
  int batch_size = 64;
  double lr = 3e-4;
};

struct GridConfig {
  std::vector<double> w_aff{0.1, 0.3, 1.0};
  int epochs = 8;
};

struct EvalConfig {
  std::string agent = "trajectory-gmm";  // expert | trajectory-gmm | trajectory-l2 | baseline-actuation
  double miles_target = 100.0;
  double episode_mile_cap = 10.0;
  double replan_interval = 0.1;
  int max_episodes = 2000;
  double stall_speed = 0.5;
  double stall_time = 10.0;
  double start_speed = 0.8;  // fraction of v_cruise
  bool expert_noise = false;
  bool trace_ticks = false;  // per-tick rows in the trace file
};

struct AblationRun {
  std::string label;
  std::string model;  // model file, relative to the output directory
  std::string eval;   // eval name: eval_<name>.json / traces_<name>.jsonl
};

// Four runs in ablation order: actuation baseline, trajectory GMM, GMM + affordance, GMM +
// affordance + CVaR fine-tuning. Collision rates must not increase down the list.
struct AblationConfig {
  std::vector<AblationRun> runs{{"baseline", "baseline.json", "baseline"},
                                {"gmm", "gmm.json", "gmm"},
                                {"gmm-aff", "gmm-aff.json", "gmm-aff"},
                                {"gmm-aff-cvar", "gmm-aff-cvar.json", "gmm-aff-cvar"}};
  std::string dataset = "dataset.jsonl";
  double w_aff = 0.0;  // affordance weight of the multitask runs; 0 picks it by grid search
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  TrackSetConfig tracks;
  ObstacleConfig obstacles;
  SensorConfig sensor;
  VehicleParams vehicle;
  ExpertConfig expert;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  CvarConfig cvar;
  GridConfig grid;
  EvalConfig eval;
  LqrConfig controller;
  AblationConfig ablation;

  // Throws ConfigError on inconsistent values (overlapping track ids, replan interval not a
  // multiple of dt_sim, ...).
  void validate() const;
  // Copies shared settings (vehicle limits, time steps) into the controller section.
  void resolve();
};

// Strict: unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& cfg, int indent = 2);

std::vector<TrackEntry> build_tracks(const ExperimentConfig& cfg, const std::vector<int>& ids);
RecordingConfig recording_config(const ExperimentConfig& cfg);

}  // namespace trajclone
