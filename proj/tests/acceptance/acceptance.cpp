// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../common/synthetic.hpp"
#include "json.hpp"
#include "trajclone/config.hpp"
#include "trajclone/controller.hpp"
#include "trajclone/report.hpp"
#include "trajclone/training.hpp"
#include "trajclone/verify.hpp"

using namespace trajclone;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trajclone_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome from_check(const CheckResult& r, double time_limit) {
  const bool fast = r.seconds < time_limit;
  return {r.passed && fast, "worst " + fmt("%.3g", r.metric) + " vs " + fmt("%.0e", r.tolerance) + ", " +
                                fmt("%.2f s", r.seconds) + " (limit " + fmt("%.0f s", time_limit) + "); " + r.detail};
}

Outcome gradient_correctness() { return from_check(check_network_gradients(20, 1), 30.0); }
Outcome gmm_oracle() { return from_check(check_gmm_oracle(100, 1), 5.0); }
Outcome cvar_oracle() { return from_check(check_cvar_oracle(1000, 1), 5.0); }
Outcome cvar_gradient() { return from_check(check_cvar_gradient({0.0, 0.5, 0.9}, 1000000, 1), 60.0); }

Outcome bimodality() {
  const synth::BimodalFit f = synth::fit_left_right(1);
  const bool ok = std::abs(f.mode_lo + 3.0) < 0.1 && std::abs(f.mode_hi - 3.0) < 0.1 && std::abs(f.pi_lo - 0.5) < 0.05 &&
                  std::abs(f.l2_prediction) < 0.2;
  return {ok, "modes " + fmt("%.3f", f.mode_lo) + " / " + fmt("%.3f", f.mode_hi) + ", pi " + fmt("%.3f", f.pi_lo) +
                  ", L2 prediction " + fmt("%.3f", f.l2_prediction)};
}

Outcome expert_premises() {
  const ExperimentConfig cfg;
  const RecordingResult rec = record_demonstrations(recording_config(cfg), cfg.seed);
  std::vector<Demonstration> all = rec.dataset.train;
  all.insert(all.end(), rec.dataset.val.begin(), rec.dataset.val.end());
  const double rare = rare_fraction(all);
  const ModalityStats mm =
      overtake_modality(all, cfg.expert.trigger_min, cfg.sensor.max_range, cfg.tracks.gen.lane_width);
  // Labels are realized futures: spot-check them against the recorded poses.
  bool labels_ok = true;
  const int step = static_cast<int>(std::lround(cfg.data.label_dt / cfg.data.sample_dt));
  for (std::size_t i = 0; i + 5 * step < rec.dataset.train.size(); i += 997) {
    const Demonstration& d = rec.dataset.train[i];
    const Demonstration& f = rec.dataset.train[i + 5 * step];
    if (f.episode != d.episode || f.track_id != d.track_id) continue;
    const Vec2 e = world_to_car_frame(d.pose, f.pose.position());
    labels_ok = labels_ok && e.x == d.trajectory[4].x && e.y == d.trajectory[4].y;
  }
  const bool ok = rec.report.episodes >= 100 && rec.report.aborted_episodes == 0 && rare < 0.3 &&
                  mm.fraction() >= 0.05 && labels_ok;
  std::ostringstream s;
  s << rec.report.episodes << " episodes, " << rec.report.aborted_episodes << " expert collisions; rare fraction "
    << fmt("%.3f", rare) << " (< 0.30); bimodal onset bins " << mm.bimodal_bins << "/" << mm.bins << " = "
    << fmt("%.3f", mm.fraction()) << " (>= 0.05); labels " << (labels_ok ? "consistent" : "INCONSISTENT");
  return {ok, s.str()};
}

std::vector<double> log_var_rows(const Model& m) {
  const DenseLayer& head = m.net.heads()[static_cast<std::size_t>(m.primary_head())];
  const GmmLayout layout = m.gmm_layout();
  std::vector<double> out;
  for (int k = 0; k < layout.modes; ++k) {
    for (int d = 0; d < layout.dim; ++d) {
      const std::size_t row = layout.log_var(k, d);
      for (int i = 0; i < head.in; ++i) out.push_back(m.net.params()[head.weight_offset + row * head.in + i]);
      out.push_back(m.net.params()[head.bias_offset + row]);
    }
  }
  return out;
}

Outcome sigma_freeze_schedule() {
  ExperimentConfig cfg;
  cfg.data.sample_count = 6000;
  const RecordingResult rec = record_demonstrations(recording_config(cfg), cfg.seed);
  Model m = init_model(ModelKind::TrajectoryGmm, cfg, rec.dataset.header, rec.dataset.train, 0.0, cfg.seed);
  const TrainingSet tr = make_training_set(m, rec.dataset.train);
  const TrainingSet va = make_training_set(m, rec.dataset.val);
  const std::vector<double> initial = log_var_rows(m);
  std::vector<bool> same;
  TrainConfig tc = cfg.train;
  tc.epochs = 7;
  train_model(m, tr, va, tc, cfg.cvar.alpha, [&](const Model& mm, const EpochLog&) { same.push_back(log_var_rows(mm) == initial); });
  bool frozen = true;
  for (int e = 0; e <= 4; ++e) frozen = frozen && same[static_cast<std::size_t>(e)];
  const bool released = !same[6];
  std::ostringstream s;
  s << "freeze_epochs " << tc.freeze_epochs << "; identical after epochs 0-4: " << (frozen ? "yes" : "no")
    << "; changed by epoch 6: " << (released ? "yes" : "no");
  return {frozen && released, s.str()};
}

Outcome controller_competence() {
  const RiccatiSolution s = solve_discrete_riccati(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1),
                                                   Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  const double dare_err = std::abs(s.P(0, 0) - (1.0 + std::sqrt(5.0)) / 2.0);

  const ExperimentConfig cfg;
  const RecordingConfig rc = recording_config(cfg);
  double sq = 0.0, worst = 0.0;
  long n = 0;
  for (int e = 0; e < 16; ++e) {
    const EpisodeRecording r = record_episode(rc, rc.train_tracks[static_cast<std::size_t>(e) % rc.train_tracks.size()], e, cfg.seed);
    if (r.records.empty()) continue;
    VehicleState st;
    st.pose = r.records[0].pose;
    st.speed = r.records[0].observation.speed;
    st.wheelbase = cfg.vehicle.wheelbase;
    LqrFollower f(cfg.controller);
    const int steps = static_cast<int>(std::lround(cfg.data.sample_dt / cfg.data.dt_sim));
    double ep_sq = 0.0;
    long ep_n = 0;
    for (std::size_t i = 0; i + 1 < r.records.size(); ++i) {
      f.set_plan(r.records[i].trajectory, r.records[i].pose);
      for (int j = 0; j < steps; ++j) {
        st = step(st, f.act(st, j * cfg.data.dt_sim), cfg.data.dt_sim, cfg.vehicle.v_hard_max);
        // Distance to the recorded path near the current record.
        double dmin = 1e9;
        const std::size_t lo = i > 30 ? i - 30 : 0;
        for (std::size_t k = lo; k + 1 < r.records.size() && k < i + 30; ++k) {
          const Vec2 a = r.records[k].pose.position(), b = r.records[k + 1].pose.position();
          const Vec2 d = b - a;
          const double t = std::clamp(dot(st.pose.position() - a, d) / std::max(dot(d, d), 1e-12), 0.0, 1.0);
          dmin = std::min(dmin, norm(st.pose.position() - (a + t * d)));
        }
        ep_sq += dmin * dmin;
        ++ep_n;
      }
    }
    worst = std::max(worst, std::sqrt(ep_sq / static_cast<double>(ep_n)));
    sq += ep_sq;
    n += ep_n;
  }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  return {rms < 0.2 && dare_err < 1e-9, "replay RMS lateral error " + fmt("%.3f m", rms) + " over 16 episodes (worst episode " +
                                           fmt("%.3f m", worst) + "); scalar DARE error " + fmt("%.1e", dare_err)};
}

struct AblationRun {
  bool done = false;
  AblationResult result;
  double seconds = 0.0;
  std::string error;
};

AblationRun& ablation() {
  static AblationRun run;
  if (!run.done) {
    run.done = true;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const ExperimentConfig cfg;
      run.result = run_ablation(cfg, scratch_dir("ablation").string(),
                                [](const std::string& s) { std::fprintf(stderr, "  ablation: %s\n", s.c_str()); });
    } catch (const std::exception& e) {
      run.error = e.what();
    }
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return run;
}

Outcome cvar_finetune_effect() {
  const AblationRun& a = ablation();
  if (!a.error.empty()) return {false, a.error};
  const SplitEvaluation& b = a.result.before_cvar;
  const SplitEvaluation& f = a.result.after_cvar;
  return {f.cvar_primary < b.cvar_primary, "val CVaR-90 " + fmt("%.4f", b.cvar_primary) + " -> " +
                                               fmt("%.4f", f.cvar_primary) + "; val mean " + fmt("%.4f", b.mean_primary) +
                                               " -> " + fmt("%.4f", f.mean_primary)};
}

Outcome ablation_ordering() {
  const AblationRun& a = ablation();
  if (!a.error.empty()) return {false, a.error};
  const ReportResult& r = a.result.report;
  double min_miles = 1e300;
  for (const AblationRow& row : r.rows) min_miles = std::min(min_miles, row.miles);
  const bool ok = r.ordering.holds && min_miles >= 100.0 && a.seconds < 7200.0;
  std::ostringstream s;
  s << r.ordering.detail << " collisions/100 mi; " << fmt("%.1f", min_miles) << "+ mi per agent; w_aff "
    << a.result.w_aff << "; pipeline " << fmt("%.0f s", a.seconds);
  if (!r.ordering.baseline_strictly_worst) s << "; baseline not strictly worst";
  if (!r.ordering.non_increasing) s << "; not non-increasing";
  return {ok, s.str()};
}

std::string read_normalized(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (p.extension() == ".json") {
    try {
      nlohmann::json j = nlohmann::json::parse(text);
      if (j.is_object()) j.erase("timestamp");
      return j.dump();
    } catch (const nlohmann::json::exception&) {
    }
  }
  return text;
}

Outcome cli_determinism() {
  const fs::path root = scratch_dir("cli");
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({"data": {"sample_count": 3000}, "train": {"epochs": 2}, "grid": {"epochs": 1}, "eval": {"miles_target": 2}})";
  }
  const std::string bin = TRAJ_CLONE_BIN;
  const std::vector<std::string> commands{
      "gen-data",
      "train --kind baseline-actuation --name baseline",
      "train --name gmm",
      "train --name gmm-aff --w-aff 0.3",
      "finetune-cvar --model {out}/gmm-aff.json --name gmm-aff-cvar",
      "eval --model {out}/baseline.json --name baseline",
      "eval --model {out}/gmm.json --name gmm",
      "eval --model {out}/gmm-aff.json --name gmm-aff",
      "eval --model {out}/gmm-aff-cvar.json --name gmm-aff-cvar",
      "eval --agent expert",
      "grid-search",
      "report",
      "verify"};
  for (const char* run : {"a", "b"}) {
    const fs::path out = root / run;
    for (std::string cmd : commands) {
      for (std::size_t pos; (pos = cmd.find("{out}")) != std::string::npos;) cmd.replace(pos, 5, out.string());
      const std::string line = "\"" + bin + "\" " + cmd + " --config \"" + (root / "config.json").string() +
                               "\" --seed 7 --out \"" + out.string() + "\" > /dev/null";
      if (std::system(line.c_str()) != 0) return {false, "command failed: " + cmd};
    }
  }
  std::set<std::string> names;
  for (const char* run : {"a", "b"}) {
    for (const auto& e : fs::directory_iterator(root / run)) names.insert(e.path().filename().string());
  }
  std::vector<std::string> differing;
  for (const std::string& n : names) {
    if (!fs::exists(root / "a" / n) || !fs::exists(root / "b" / n) ||
        read_normalized(root / "a" / n) != read_normalized(root / "b" / n)) {
      differing.push_back(n);
    }
  }
  std::string detail = std::to_string(commands.size()) + " commands twice, " + std::to_string(names.size()) + " files compared";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& d : differing) detail += " " + d;
  } else {
    detail += ", all identical (timestamp fields excluded)";
  }
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"GMM oracle equivalence", gmm_oracle},
      {"CVaR estimator oracle", cvar_oracle},
      {"CVaR gradient estimator", cvar_gradient},
      {"bimodality recovery", bimodality},
      {"expert safety and dataset premises", expert_premises},
      {"sigma-freeze schedule", sigma_freeze_schedule},
      {"CVaR fine-tuning effect", cvar_finetune_effect},
      {"ablation ordering", ablation_ordering},
      {"controller competence", controller_competence},
      {"CLI determinism", cli_determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %-36s %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.passed) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
