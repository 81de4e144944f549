#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trajclone/config.hpp"
#include "trajclone/model.hpp"

namespace trajclone {

// Normalized network inputs and targets for one split.
struct TrainingSet {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  std::vector<std::vector<double>> affordances;  // empty without an affordance head

  std::size_t size() const { return inputs.size(); }
};

// Fits normalizers on `train`, builds the network and initializes its weights.
Model init_model(ModelKind kind, const ExperimentConfig& cfg, const DatasetHeader& header,
                 const std::vector<Demonstration>& train, double w_aff, std::uint64_t seed);

TrainingSet make_training_set(const Model& m, const std::vector<Demonstration>& records);

struct SampleLoss {
  double primary = 0.0;
  double affordance = 0.0;
  double total = 0.0;
};

// Loss of one sample; when head_grads is non-null it receives the per-head output gradients of
// the total loss (log_var entries zeroed while epoch < freeze_epochs).
SampleLoss sample_loss(const Model& m, const ForwardCache& cache, const TrainingSet& set, std::size_t i,
                       std::vector<std::vector<double>>* head_grads = nullptr, int epoch = 0,
                       int freeze_epochs = 0);

struct SplitEvaluation {
  double mean_primary = 0.0;
  double cvar_primary = 0.0;
  double mean_affordance = 0.0;
  std::vector<double> primary_losses;
};

SplitEvaluation evaluate_split(const Model& m, const TrainingSet& set, double alpha);

struct TrainOutcome {
  bool diverged = false;
  int epochs_run = 0;
};

using EpochCallback = std::function<void(const Model&, const EpochLog&)>;

// Minibatch Adam on the multitask loss. Continues from m.epochs_trained; shuffling is seeded by
// (m.seed, epoch). On a non-finite loss the parameters of the last completed epoch are restored.
TrainOutcome train_model(Model& m, const TrainingSet& train, const TrainingSet& val, const TrainConfig& tc,
                         double report_alpha, const EpochCallback& on_epoch = {});

// Tail fine-tuning: per batch only the samples selected by cvar_batch_mask contribute.
// A trailing batch smaller than the mask minimum is skipped.
TrainOutcome finetune_cvar(Model& m, const TrainingSet& train, const TrainingSet& val, const CvarConfig& cc,
                           const TrainConfig& tc, const EpochCallback& on_epoch = {});

struct GridRow {
  double w_aff = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;        // primary (trajectory) loss
  double val_aff_loss = 0.0;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;
};

// One GMM + affordance model per grid value; picks the lowest validation trajectory loss,
// first grid entry on ties.
GridResult grid_search_weights(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<double>& grid);

}  // namespace trajclone
