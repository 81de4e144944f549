#pragma once

#include "trajclone/dataset.hpp"
#include "trajclone/model.hpp"

namespace trajclone {

// Copies each record's executed expert action, clamped, into its actuation label.
// Throws when a record carries no executed action.
void record_actuation_labels(Dataset& ds, const VehicleParams& vp = {});

// Direct actuation prediction: inverse-normalized actuation head output, clamped.
Action baseline_policy(const Model& m, const Observation& obs, const VehicleParams& vp = {});

}  // namespace trajclone
