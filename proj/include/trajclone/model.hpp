#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajclone/dataset.hpp"
#include "trajclone/losses.hpp"
#include "trajclone/network.hpp"

namespace trajclone {

enum class ModelKind { TrajectoryGmm, TrajectoryL2, Actuation };
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct EpochLog {
  std::string phase;  // "train" or "finetune"
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;       // mean per-sample primary loss on validation
  double val_cvar = 0.0;       // CVaR at the configured alpha of the same losses
  double val_aff_loss = 0.0;   // mean affordance MSE, 0 without an affordance head
};

// Trained network plus everything needed to map observations to outputs.
struct Model {
  ModelKind kind = ModelKind::TrajectoryGmm;
  Network net{NetSpec{1, {}, {HeadSpec{HeadKind::Linear, 1, 1}}}};
  DatasetHeader header;
  Normalizer input_norm;
  Normalizer target_norm;  // trajectory (or actuation) targets
  Normalizer aff_norm;     // empty without an affordance head
  MultiTaskWeights weights;
  AdamState adam;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  int finetune_epochs = 0;
  std::vector<EpochLog> log;

  int primary_head() const;
  int affordance_head() const { return net.spec().find_head(HeadKind::Affordance); }
  GmmLayout gmm_layout() const;
};

NetSpec make_net_spec(ModelKind kind, int input_dim, int target_dim, int modes, const std::vector<int>& fusion,
                      bool affordance);

void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

std::vector<double> model_input(const Model& m, const Observation& obs);
// Planned trajectory in ego-frame meters (trajectory models only).
std::vector<Vec2> predict_trajectory(const Model& m, const Observation& obs);

}  // namespace trajclone
