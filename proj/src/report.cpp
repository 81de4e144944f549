#include "trajclone/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "trajclone/baseline.hpp"
#include "json.hpp"

namespace trajclone {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json row_json(const AblationRow& r) {
  return {{"label", r.label},
          {"agent", r.agent},
          {"miles", r.miles},
          {"collisions", r.collisions},
          {"obstacle_collisions", r.obstacle_collisions},
          {"offroad_collisions", r.offroad_collisions},
          {"collisions_per_100mi", r.collisions_per_100mi},
          {"mean_speed_mph", r.mean_speed_mph}};
}

}  // namespace

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_loss_csv(const std::string& path, const Model& m) {
  std::ofstream out = open_out(path);
  out << "phase,epoch,train_loss,val_loss,val_cvar,val_aff_loss\n";
  for (const EpochLog& e : m.log) {
    out << e.phase << ',' << e.epoch << ',' << csv_number(e.train_loss) << ',' << csv_number(e.val_loss) << ','
        << csv_number(e.val_cvar) << ',' << csv_number(e.val_aff_loss) << '\n';
  }
}

void write_percentile_csv(const std::string& path, const std::vector<PercentilePoint>& curve) {
  std::ofstream out = open_out(path);
  out << "percentile,cvar\n";
  for (const PercentilePoint& p : curve) out << p.percentile << ',' << csv_number(p.cvar) << '\n';
}

// Rates within this relative distance count as equal; each run overshoots its mileage target
// by a fraction of a sim step, which perturbs otherwise identical rates.
constexpr double kRateTieTolerance = 1e-4;

bool rate_at_least(double a, double b) { return a >= b - kRateTieTolerance * std::max(std::abs(a), std::abs(b)); }

OrderingCheck check_ablation_ordering(const std::vector<AblationRow>& rows) {
  OrderingCheck c;
  if (rows.size() < 2) {
    c.detail = "need at least two rows";
    return c;
  }
  c.baseline_strictly_worst = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rate_at_least(rows[i].collisions_per_100mi, rows[0].collisions_per_100mi)) c.baseline_strictly_worst = false;
  }
  c.non_increasing = true;
  std::ostringstream detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const bool ok = rate_at_least(rows[i - 1].collisions_per_100mi, rows[i].collisions_per_100mi);
      if (!ok) c.non_increasing = false;
      detail << (ok ? " >= " : " < ");
    }
    detail << rows[i].label << ' ' << fixed(rows[i].collisions_per_100mi, 2);
  }
  c.holds = c.baseline_strictly_worst && c.non_increasing;
  c.detail = detail.str();
  return c;
}

ReportResult write_report(const ExperimentConfig& cfg, const std::string& out_dir) {
  const fs::path dir(out_dir);
  const auto& runs = cfg.ablation.runs;

  std::vector<std::string> missing;
  auto need = [&](const fs::path& p) {
    if (!fs::exists(dir / p)) missing.push_back((dir / p).string());
  };
  need(cfg.ablation.dataset);
  for (const AblationRun& r : runs) {
    need(r.model);
    need("traces_" + r.eval + ".jsonl");
  }
  if (!missing.empty()) {
    std::string msg = "report: missing inputs:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }

  ReportResult res;
  const Dataset ds = read_dataset((dir / cfg.ablation.dataset).string());
  Dataset labeled = ds;
  bool actuation_labels = false;

  std::ofstream curves = open_out(dir / "loss_curves.csv");
  curves << "label,phase,epoch,train_loss,val_loss,val_cvar,val_aff_loss\n";
  for (const AblationRun& run : runs) {
    Model m = load_model((dir / run.model).string());
    const EvalReport ev = read_eval_traces(to_string(m.kind), (dir / ("traces_" + run.eval + ".jsonl")).string());
    res.rows.push_back({run.label, ev.agent, ev.miles, ev.collisions, ev.obstacle_collisions, ev.offroad_collisions,
                        ev.collisions_per_100mi, ev.mean_speed_mph});
    for (const EpochLog& e : m.log) {
      curves << run.label << ',' << e.phase << ',' << e.epoch << ',' << csv_number(e.train_loss) << ','
             << csv_number(e.val_loss) << ',' << csv_number(e.val_cvar) << ',' << csv_number(e.val_aff_loss) << '\n';
    }
    if (m.kind == ModelKind::Actuation && !actuation_labels) {
      record_actuation_labels(labeled, cfg.vehicle);
      actuation_labels = true;
    }
    const Dataset& src = m.kind == ModelKind::Actuation ? labeled : ds;
    for (const auto& [split, records] : {std::pair{"train", &src.train}, std::pair{"val", &src.val}}) {
      const TrainingSet set = make_training_set(m, *records);
      const SplitEvaluation se = evaluate_split(m, set, cfg.cvar.alpha);
      const std::string name = "cvar_percentiles_" + run.label + "_" + split + ".csv";
      write_percentile_csv((dir / name).string(), cvar_percentile_curve(se.primary_losses));
      res.files.push_back(name);
    }
  }
  curves.close();
  res.files.push_back("loss_curves.csv");
  res.ordering = check_ablation_ordering(res.rows);

  {
    std::ofstream out = open_out(dir / "ablation.csv");
    out << "label,agent,miles,collisions,obstacle_collisions,offroad_collisions,collisions_per_100mi,mean_speed_mph\n";
    for (const AblationRow& r : res.rows) {
      out << r.label << ',' << r.agent << ',' << csv_number(r.miles) << ',' << r.collisions << ','
          << r.obstacle_collisions << ',' << r.offroad_collisions << ',' << csv_number(r.collisions_per_100mi) << ','
          << csv_number(r.mean_speed_mph) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "ablation.txt");
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %-20s %8s %10s %14s %8s\n", "label", "agent", "miles", "collisions",
                  "per 100 mi", "mph");
    out << line;
    for (const AblationRow& r : res.rows) {
      std::snprintf(line, sizeof line, "%-16s %-20s %8.1f %10d %14.2f %8.1f\n", r.label.c_str(), r.agent.c_str(),
                    r.miles, r.collisions, r.collisions_per_100mi, r.mean_speed_mph);
      out << line;
    }
    out << "\nordering " << (res.ordering.holds ? "holds" : "violated") << ": " << res.ordering.detail << '\n';
  }
  res.files.push_back("ablation.csv");
  res.files.push_back("ablation.txt");

  json rows = json::array();
  for (const AblationRow& r : res.rows) rows.push_back(row_json(r));
  json summary = {{"timestamp", utc_timestamp()},
                  {"config", json::parse(config_to_json_text(cfg))},
                  {"rows", rows},
                  {"ordering",
                   {{"holds", res.ordering.holds},
                    {"baseline_strictly_worst", res.ordering.baseline_strictly_worst},
                    {"non_increasing", res.ordering.non_increasing},
                    {"detail", res.ordering.detail}}}};
  open_out(dir / "summary.json") << summary.dump(2) << '\n';
  res.files.push_back("summary.json");
  return res;
}

AblationResult run_ablation(const ExperimentConfig& cfg, const std::string& out_dir, const ProgressFn& progress) {
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const auto& runs = cfg.ablation.runs;
  AblationResult res;

  say("recording demonstrations");
  RecordingResult rec = record_demonstrations(recording_config(cfg), cfg.seed);
  write_dataset((dir / cfg.ablation.dataset).string(), rec.dataset);
  Dataset& ds = rec.dataset;

  auto train_one = [&](ModelKind kind, double w_aff, const Dataset& data, const AblationRun& run) {
    say("training " + run.label);
    Model m = init_model(kind, cfg, data.header, data.train, w_aff, cfg.seed);
    const TrainingSet train = make_training_set(m, data.train);
    const TrainingSet val = make_training_set(m, data.val);
    train_model(m, train, val, cfg.train, cfg.cvar.alpha);
    return m;
  };
  auto finish = [&](const Model& m, const AblationRun& run) {
    save_model((dir / run.model).string(), m);
    write_loss_csv((dir / (fs::path(run.model).stem().string() + ".loss.csv")).string(), m);
    say("evaluating " + run.label);
    const EvalReport ev = eval_closed_loop(cfg, to_string(m.kind), &m);
    write_eval((dir / ("eval_" + run.eval + ".json")).string(), (dir / ("traces_" + run.eval + ".jsonl")).string(), ev);
  };

  {
    Dataset labeled = ds;
    record_actuation_labels(labeled, cfg.vehicle);
    finish(train_one(ModelKind::Actuation, 0.0, labeled, runs[0]), runs[0]);
  }
  finish(train_one(ModelKind::TrajectoryGmm, 0.0, ds, runs[1]), runs[1]);

  res.w_aff = cfg.ablation.w_aff;
  if (res.w_aff <= 0.0) {
    say("grid search over affordance weights");
    res.grid = grid_search_weights(cfg, ds, cfg.grid.w_aff);
    res.w_aff = res.grid.rows[res.grid.best].w_aff;
  }
  Model m = train_one(ModelKind::TrajectoryGmm, res.w_aff, ds, runs[2]);
  finish(m, runs[2]);

  say("CVaR fine-tuning " + runs[3].label);
  const TrainingSet train = make_training_set(m, ds.train);
  const TrainingSet val = make_training_set(m, ds.val);
  res.before_cvar = evaluate_split(m, val, cfg.cvar.alpha);
  finetune_cvar(m, train, val, cfg.cvar, cfg.train);
  res.after_cvar = evaluate_split(m, val, cfg.cvar.alpha);
  finish(m, runs[3]);

  say("writing report");
  res.report = write_report(cfg, out_dir);
  return res;
}

}  // namespace trajclone
