#include "trajclone/model.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace trajclone {

using nlohmann::json;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::TrajectoryGmm: return "trajectory-gmm";
    case ModelKind::TrajectoryL2: return "trajectory-l2";
    case ModelKind::Actuation: return "baseline-actuation";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "trajectory-gmm") return ModelKind::TrajectoryGmm;
  if (s == "trajectory-l2") return ModelKind::TrajectoryL2;
  if (s == "baseline-actuation") return ModelKind::Actuation;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

int Model::primary_head() const {
  switch (kind) {
    case ModelKind::TrajectoryGmm: return net.spec().find_head(HeadKind::Gmm);
    case ModelKind::TrajectoryL2: return net.spec().find_head(HeadKind::Linear);
    case ModelKind::Actuation: return net.spec().find_head(HeadKind::Actuation);
  }
  return -1;
}

GmmLayout Model::gmm_layout() const {
  const int h = net.spec().find_head(HeadKind::Gmm);
  if (h < 0) throw std::logic_error("model has no GMM head");
  const HeadSpec& hs = net.spec().heads[static_cast<std::size_t>(h)];
  return {hs.modes, hs.dim};
}

NetSpec make_net_spec(ModelKind kind, int input_dim, int target_dim, int modes, const std::vector<int>& fusion,
                      bool affordance) {
  NetSpec s;
  s.input_dim = input_dim;
  s.fusion_layers = fusion;
  switch (kind) {
    case ModelKind::TrajectoryGmm: s.heads.push_back({HeadKind::Gmm, target_dim, modes}); break;
    case ModelKind::TrajectoryL2: s.heads.push_back({HeadKind::Linear, target_dim, 1}); break;
    case ModelKind::Actuation: s.heads.push_back({HeadKind::Actuation, target_dim, 1}); break;
  }
  if (affordance) s.heads.push_back({HeadKind::Affordance, AffordanceVector::kSize, 1});
  s.validate();
  return s;
}

namespace {

json norm_to_json(const Normalizer& n) {
  if (n.dim() == 0) return nullptr;
  return {{"mean", n.mean()}, {"std", n.stddev()}};
}

Normalizer norm_from_json(const json& j) {
  if (j.is_null()) return {};
  return Normalizer(j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>());
}

}  // namespace

void save_model(const std::string& path, const Model& m) {
  json spec;
  spec["input_dim"] = m.net.spec().input_dim;
  spec["fusion_layers"] = m.net.spec().fusion_layers;
  spec["heads"] = json::array();
  for (const HeadSpec& h : m.net.spec().heads) {
    spec["heads"].push_back({{"kind", to_string(h.kind)}, {"dim", h.dim}, {"modes", h.modes}});
  }
  json log = json::array();
  for (const EpochLog& e : m.log) {
    log.push_back({{"phase", e.phase},
                   {"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_cvar", e.val_cvar},
                   {"val_aff_loss", e.val_aff_loss}});
  }
  const DatasetHeader& h = m.header;
  json j;
  j["schema"] = "traj-clone/model";
  j["version"] = 1;
  j["kind"] = to_string(m.kind);
  j["spec"] = spec;
  j["header"] = {{"horizon", h.horizon},     {"label_dt", h.label_dt},   {"sample_dt", h.sample_dt},
                 {"n_beams", h.n_beams},     {"fov", h.fov},             {"max_range", h.max_range},
                 {"speed_scale", h.speed_scale}, {"lane_width", h.lane_width}};
  j["normalizers"] = {{"input", norm_to_json(m.input_norm)},
                      {"target", norm_to_json(m.target_norm)},
                      {"affordance", norm_to_json(m.aff_norm)}};
  j["weights"] = {{"w_traj", m.weights.w_traj}, {"w_aff", m.weights.w_aff}};
  j["meta"] = {{"seed", m.seed}, {"epochs_trained", m.epochs_trained}, {"finetune_epochs", m.finetune_epochs},
               {"log", log}};
  j["adam"] = {{"step", m.adam.step}, {"m", m.adam.m}, {"v", m.adam.v}};
  j["params"] = m.net.params();

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  out << j.dump() << '\n';
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file " + path);
  const json j = json::parse(in);
  if (j.value("schema", "") != "traj-clone/model") throw std::runtime_error(path + " is not a model file");
  if (j.at("version").get<int>() != 1) throw std::runtime_error(path + ": unsupported model version");

  Model m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  NetSpec spec;
  spec.input_dim = j.at("spec").at("input_dim").get<int>();
  spec.fusion_layers = j.at("spec").at("fusion_layers").get<std::vector<int>>();
  for (const json& hj : j.at("spec").at("heads")) {
    spec.heads.push_back({head_kind_from_string(hj.at("kind").get<std::string>()), hj.at("dim").get<int>(),
                          hj.at("modes").get<int>()});
  }
  m.net = Network(spec);
  m.net.set_params(j.at("params").get<std::vector<double>>());

  const json& h = j.at("header");
  m.header.horizon = h.at("horizon").get<int>();
  m.header.label_dt = h.at("label_dt").get<double>();
  m.header.sample_dt = h.at("sample_dt").get<double>();
  m.header.n_beams = h.at("n_beams").get<int>();
  m.header.fov = h.at("fov").get<double>();
  m.header.max_range = h.at("max_range").get<double>();
  m.header.speed_scale = h.at("speed_scale").get<double>();
  m.header.lane_width = h.at("lane_width").get<double>();

  m.input_norm = norm_from_json(j.at("normalizers").at("input"));
  m.target_norm = norm_from_json(j.at("normalizers").at("target"));
  m.aff_norm = norm_from_json(j.at("normalizers").at("affordance"));
  m.weights.w_traj = j.at("weights").at("w_traj").get<double>();
  m.weights.w_aff = j.at("weights").at("w_aff").get<double>();

  const json& meta = j.at("meta");
  m.seed = meta.at("seed").get<std::uint64_t>();
  m.epochs_trained = meta.at("epochs_trained").get<int>();
  m.finetune_epochs = meta.at("finetune_epochs").get<int>();
  for (const json& e : meta.at("log")) {
    m.log.push_back({e.at("phase").get<std::string>(), e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                     e.at("val_loss").get<double>(), e.at("val_cvar").get<double>(),
                     e.at("val_aff_loss").get<double>()});
  }
  m.adam.step = j.at("adam").at("step").get<long>();
  m.adam.m = j.at("adam").at("m").get<std::vector<double>>();
  m.adam.v = j.at("adam").at("v").get<std::vector<double>>();
  if (m.adam.m.size() != m.net.num_params() || m.adam.v.size() != m.net.num_params()) {
    throw std::runtime_error(path + ": optimizer state does not match the parameter count");
  }
  return m;
}

std::vector<double> model_input(const Model& m, const Observation& obs) {
  return m.input_norm.apply(observation_features(obs, m.header));
}

std::vector<Vec2> predict_trajectory(const Model& m, const Observation& obs) {
  const ForwardCache c = forward(m.net, model_input(m, obs));
  const std::vector<double>& out = c.head_outputs[static_cast<std::size_t>(m.primary_head())];
  switch (m.kind) {
    case ModelKind::TrajectoryGmm: return select_trajectory(out, m.gmm_layout(), m.target_norm);
    case ModelKind::TrajectoryL2: return unflatten_trajectory(m.target_norm.invert(out));
    case ModelKind::Actuation: break;
  }
  throw std::invalid_argument("actuation models do not predict trajectories");
}

}  // namespace trajclone
