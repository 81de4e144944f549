#include "trajclone/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace trajclone {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5f;

std::vector<double> primary_target(ModelKind kind, const Demonstration& d) {
  if (kind != ModelKind::Actuation) return flatten_trajectory(d.trajectory);
  if (!d.actuation_label) {
    throw std::invalid_argument("record (track " + std::to_string(d.track_id) + ", episode " +
                                std::to_string(d.episode) + ") has no actuation label");
  }
  return {d.actuation_label->steer, d.actuation_label->accel};
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(mix_seed(seed, kShuffleStream), static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

EpochLog make_log(const Model& m, const std::string& phase, int epoch, double train_loss, const TrainingSet& val,
                  double alpha) {
  const SplitEvaluation ev = evaluate_split(m, val, alpha);
  return {phase, epoch, train_loss, ev.mean_primary, ev.cvar_primary, ev.mean_affordance};
}

// Adds the batch-mean gradient of the selected samples to the optimizer.
void apply_update(Model& m, std::vector<double>& grad, double clip_norm, double lr) {
  clip_gradient_norm(grad, clip_norm);
  AdamConfig ac;
  ac.lr = lr;
  adam_step(m.net.params(), grad, m.adam, ac);
}

}  // namespace

Model init_model(ModelKind kind, const ExperimentConfig& cfg, const DatasetHeader& header,
                 const std::vector<Demonstration>& train, double w_aff, std::uint64_t seed) {
  if (train.size() < 2) throw std::invalid_argument("training split needs at least 2 records");
  Model m;
  m.kind = kind;
  m.header = header;
  m.seed = seed;
  m.weights = {cfg.model.w_traj, w_aff};
  m.weights.validate();

  std::vector<std::vector<double>> inputs, targets, affs;
  for (const Demonstration& d : train) {
    inputs.push_back(observation_features(d.observation, header));
    targets.push_back(primary_target(kind, d));
    if (w_aff > 0.0) affs.push_back(d.affordance.to_vector());
  }
  // Beams that never see anything within range are constant; flooring keeps them usable.
  m.input_norm = Normalizer::fit(inputs, 1e-3);
  m.target_norm = Normalizer::fit(targets);
  if (w_aff > 0.0) m.aff_norm = Normalizer::fit(affs, 1e-3);

  const int target_dim = static_cast<int>(targets.front().size());
  m.net = Network(make_net_spec(kind, static_cast<int>(inputs.front().size()), target_dim, cfg.model.modes,
                                cfg.model.fusion_layers, w_aff > 0.0));
  Rng rng = make_rng(seed, kInitStream);
  m.net.init_he_uniform(rng);
  // Unit variances while the log-variance outputs are frozen.
  if (kind == ModelKind::TrajectoryGmm) {
    const GmmLayout layout = m.gmm_layout();
    const DenseLayer& head = m.net.heads()[static_cast<std::size_t>(m.primary_head())];
    std::vector<double>& p = m.net.params();
    for (std::size_t o = layout.log_var(0, 0); o < layout.size(); ++o) {
      const std::size_t row = head.weight_offset + o * static_cast<std::size_t>(head.in);
      std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(row), head.in, 0.0);
    }
  }
  m.adam = AdamState(m.net.num_params());
  return m;
}

TrainingSet make_training_set(const Model& m, const std::vector<Demonstration>& records) {
  TrainingSet s;
  const bool aff = m.affordance_head() >= 0;
  for (const Demonstration& d : records) {
    s.inputs.push_back(model_input(m, d.observation));
    s.targets.push_back(m.target_norm.apply(primary_target(m.kind, d)));
    if (aff) s.affordances.push_back(m.aff_norm.apply(d.affordance.to_vector()));
  }
  return s;
}

SampleLoss sample_loss(const Model& m, const ForwardCache& cache, const TrainingSet& set, std::size_t i,
                       std::vector<std::vector<double>>* head_grads, int epoch, int freeze_epochs) {
  SampleLoss out;
  const int ph = m.primary_head();
  const std::vector<double>& raw = cache.head_outputs[static_cast<std::size_t>(ph)];
  LossAndGrad primary;
  std::optional<GmmLayout> layout;
  if (m.kind == ModelKind::TrajectoryGmm) {
    layout = m.gmm_layout();
    primary = gmm_nll(raw, set.targets[i], *layout);
  } else {
    primary = mse_loss(raw, set.targets[i]);
  }
  out.primary = primary.loss;

  const int ah = m.affordance_head();
  LossAndGrad aff;
  if (ah >= 0) {
    aff = mse_loss(cache.head_outputs[static_cast<std::size_t>(ah)], set.affordances[i]);
    out.affordance = aff.loss;
  }
  out.total = multitask_loss(out.primary, out.affordance, m.weights);

  if (head_grads != nullptr) {
    head_grads->assign(m.net.heads().size(), {});
    for (double& g : primary.grad) g *= m.weights.w_traj;
    if (layout) sigma_freeze(primary.grad, *layout, epoch, freeze_epochs);
    (*head_grads)[static_cast<std::size_t>(ph)] = std::move(primary.grad);
    if (ah >= 0 && m.weights.w_aff > 0.0) {
      for (double& g : aff.grad) g *= m.weights.w_aff;
      (*head_grads)[static_cast<std::size_t>(ah)] = std::move(aff.grad);
    }
  }
  return out;
}

SplitEvaluation evaluate_split(const Model& m, const TrainingSet& set, double alpha) {
  if (set.size() == 0) throw std::invalid_argument("cannot evaluate an empty split");
  SplitEvaluation ev;
  ev.primary_losses.reserve(set.size());
  double aff_sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ForwardCache c = forward(m.net, set.inputs[i]);
    const SampleLoss l = sample_loss(m, c, set, i);
    ev.primary_losses.push_back(l.primary);
    aff_sum += l.affordance;
  }
  ev.mean_primary = std::accumulate(ev.primary_losses.begin(), ev.primary_losses.end(), 0.0) /
                    static_cast<double>(set.size());
  ev.cvar_primary = cvar_estimate(ev.primary_losses, alpha);
  ev.mean_affordance = aff_sum / static_cast<double>(set.size());
  return ev;
}

TrainOutcome train_model(Model& m, const TrainingSet& train, const TrainingSet& val, const TrainConfig& tc,
                         double report_alpha, const EpochCallback& on_epoch) {
  TrainOutcome outcome;
  if (train.size() == 0) throw std::invalid_argument("empty training split");
  std::vector<double> grad(m.net.num_params());
  std::vector<std::vector<double>> head_grads;
  for (int k = 0; k < tc.epochs; ++k) {
    const int epoch = m.epochs_trained;
    const std::vector<double> last_params = m.net.params();
    const AdamState last_adam = m.adam;
    const std::vector<std::size_t> order = epoch_order(train.size(), m.seed, epoch);
    double loss_sum = 0.0;
    bool finite = true;
    for (std::size_t b = 0; b < order.size() && finite; b += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size));
      const double scale = 1.0 / static_cast<double>(e - b);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = b; j < e; ++j) {
        const ForwardCache c = forward(m.net, train.inputs[order[j]]);
        const SampleLoss l = sample_loss(m, c, train, order[j], &head_grads, epoch, tc.freeze_epochs);
        if (!std::isfinite(l.total)) {
          finite = false;
          break;
        }
        loss_sum += l.total;
        for (auto& hg : head_grads) {
          for (double& g : hg) g *= scale;
        }
        backward(m.net, c, head_grads, grad);
      }
      if (finite) apply_update(m, grad, tc.clip_norm, tc.lr);
    }
    if (!finite) {
      m.net.set_params(last_params);
      m.adam = last_adam;
      outcome.diverged = true;
      return outcome;
    }
    ++m.epochs_trained;
    ++outcome.epochs_run;
    m.log.push_back(make_log(m, "train", epoch, loss_sum / static_cast<double>(train.size()), val, report_alpha));
    if (on_epoch) on_epoch(m, m.log.back());
  }
  return outcome;
}

TrainOutcome finetune_cvar(Model& m, const TrainingSet& train, const TrainingSet& val, const CvarConfig& cc,
                           const TrainConfig& tc, const EpochCallback& on_epoch) {
  TrainOutcome outcome;
  const std::size_t min_batch = cvar_min_batch(cc.alpha);
  if (static_cast<std::size_t>(cc.batch_size) < min_batch) {
    throw std::invalid_argument("CVaR batch size " + std::to_string(cc.batch_size) + " is below the minimum " +
                                std::to_string(min_batch) + " for alpha " + std::to_string(cc.alpha));
  }
  std::vector<double> grad(m.net.num_params());
  std::vector<std::vector<double>> head_grads;
  std::vector<ForwardCache> caches;
  std::vector<std::vector<std::vector<double>>> grads;
  std::vector<double> losses;
  for (int k = 0; k < cc.finetune_epochs; ++k) {
    const int epoch = m.epochs_trained + m.finetune_epochs;
    const std::vector<double> last_params = m.net.params();
    const AdamState last_adam = m.adam;
    const std::vector<std::size_t> order = epoch_order(train.size(), m.seed, epoch);
    double tail_sum = 0.0;
    std::size_t tail_count = 0;
    bool finite = true;
    for (std::size_t b = 0; b < order.size() && finite; b += static_cast<std::size_t>(cc.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cc.batch_size));
      if (e - b < min_batch) break;
      caches.clear();
      grads.clear();
      losses.clear();
      for (std::size_t j = b; j < e; ++j) {
        caches.push_back(forward(m.net, train.inputs[order[j]]));
        const SampleLoss l = sample_loss(m, caches.back(), train, order[j], &head_grads, epoch, tc.freeze_epochs);
        if (!std::isfinite(l.total)) {
          finite = false;
          break;
        }
        losses.push_back(l.total);
        grads.push_back(head_grads);
      }
      if (!finite) break;
      const std::vector<char> mask = cvar_batch_mask(losses, cc.alpha);
      const std::size_t selected = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
      const double scale = 1.0 / static_cast<double>(selected);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = 0; j < losses.size(); ++j) {
        if (!mask[j]) continue;
        tail_sum += losses[j];
        ++tail_count;
        for (auto& hg : grads[j]) {
          for (double& g : hg) g *= scale;
        }
        backward(m.net, caches[j], grads[j], grad);
      }
      apply_update(m, grad, tc.clip_norm, cc.lr);
    }
    if (!finite) {
      m.net.set_params(last_params);
      m.adam = last_adam;
      outcome.diverged = true;
      return outcome;
    }
    ++m.finetune_epochs;
    ++outcome.epochs_run;
    const double train_tail = tail_count > 0 ? tail_sum / static_cast<double>(tail_count) : 0.0;
    m.log.push_back(make_log(m, "finetune", epoch, train_tail, val, cc.alpha));
    if (on_epoch) on_epoch(m, m.log.back());
  }
  return outcome;
}

GridResult grid_search_weights(const ExperimentConfig& cfg, const Dataset& ds, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("grid search needs at least one weight");
  GridResult res;
  TrainConfig tc = cfg.train;
  tc.epochs = cfg.grid.epochs;
  for (double w : grid) {
    Model m = init_model(ModelKind::TrajectoryGmm, cfg, ds.header, ds.train, w, cfg.seed);
    const TrainingSet train = make_training_set(m, ds.train);
    const TrainingSet val = make_training_set(m, ds.val);
    train_model(m, train, val, tc, cfg.cvar.alpha);
    GridRow row;
    row.w_aff = w;
    row.train_loss = evaluate_split(m, train, cfg.cvar.alpha).mean_primary;
    const SplitEvaluation ev = evaluate_split(m, val, cfg.cvar.alpha);
    row.val_loss = ev.mean_primary;
    row.val_aff_loss = ev.mean_affordance;
    res.rows.push_back(row);
  }
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    if (res.rows[i].val_loss < res.rows[res.best].val_loss) res.best = i;
  }
  return res;
}

}  // namespace trajclone
