#include "trajclone/baseline.hpp"

#include <stdexcept>

namespace trajclone {

namespace {

void label(std::vector<Demonstration>& records, const VehicleParams& vp, const char* split) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    Demonstration& d = records[i];
    if (!d.expert_action) {
      throw std::invalid_argument(std::string(split) + " record " + std::to_string(i) + " (track " +
                                  std::to_string(d.track_id) + ", episode " + std::to_string(d.episode) +
                                  ") has no executed expert action");
    }
    d.actuation_label = clamp_action(*d.expert_action, vp);
  }
}

}  // namespace

void record_actuation_labels(Dataset& ds, const VehicleParams& vp) {
  label(ds.train, vp, "train");
  label(ds.val, vp, "val");
}

Action baseline_policy(const Model& m, const Observation& obs, const VehicleParams& vp) {
  if (m.kind != ModelKind::Actuation) throw std::invalid_argument("baseline policy needs an actuation model");
  const ForwardCache c = forward(m.net, model_input(m, obs));
  const std::vector<double> a = m.target_norm.invert(c.head_outputs[static_cast<std::size_t>(m.primary_head())]);
  return clamp_action({a[0], a[1]}, vp);
}

}  // namespace trajclone
