#pragma once

#include <functional>
#include <string>
#include <vector>

#include "trajclone/config.hpp"
#include "trajclone/evaluation.hpp"
#include "trajclone/training.hpp"

namespace trajclone {

struct AblationRow {
  std::string label;
  std::string agent;
  double miles = 0.0;
  int collisions = 0;
  int obstacle_collisions = 0;
  int offroad_collisions = 0;
  double collisions_per_100mi = 0.0;
  double mean_speed_mph = 0.0;
};

struct OrderingCheck {
  bool holds = false;
  bool baseline_strictly_worst = false;
  bool non_increasing = false;
  std::string detail;
};

// Rows in ablation order: rates must not increase down the list and the first row must be
// strictly worse than every other.
OrderingCheck check_ablation_ordering(const std::vector<AblationRow>& rows);

struct ReportResult {
  std::vector<AblationRow> rows;
  OrderingCheck ordering;
  std::vector<std::string> files;  // written, relative to the output directory
};

// Reads the models, eval traces and dataset named by cfg.ablation from out_dir and writes
// ablation.csv, ablation.txt, loss_curves.csv, cvar_percentiles_<label>_<split>.csv and summary.json.
// Throws listing every missing input.
ReportResult write_report(const ExperimentConfig& cfg, const std::string& out_dir);

std::string csv_number(double v);
std::string utc_timestamp();

// Model file and loss curve CSV for a trained model.
void write_loss_csv(const std::string& path, const Model& m);
void write_percentile_csv(const std::string& path, const std::vector<PercentilePoint>& curve);

using ProgressFn = std::function<void(const std::string&)>;

struct AblationResult {
  double w_aff = 0.0;
  GridResult grid;
  SplitEvaluation before_cvar;
  SplitEvaluation after_cvar;
  ReportResult report;
};

// Full pipeline in one process: record data, train the four agents, fine-tune, evaluate each
// over eval.miles_target and write the report, all under out_dir.
AblationResult run_ablation(const ExperimentConfig& cfg, const std::string& out_dir, const ProgressFn& progress = {});

}  // namespace trajclone
