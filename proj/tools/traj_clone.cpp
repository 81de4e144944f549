#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajclone/baseline.hpp"
#include "trajclone/config.hpp"
#include "trajclone/evaluation.hpp"
#include "trajclone/report.hpp"
#include "trajclone/training.hpp"
#include "trajclone/verify.hpp"

using namespace trajclone;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

struct Args {
  std::string data;
  std::string model;
  std::string name;
  std::string agent;
  std::string kind;
  std::optional<double> w_aff;
  bool full = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.resolve();
  cfg.validate();
  fs::create_directories(c.out);
  return cfg;
}

std::string in_out(const Common& c, const std::string& given, const std::string& fallback) {
  return given.empty() ? (fs::path(c.out) / fallback).string() : given;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

Dataset load_data(const ExperimentConfig& cfg, const Common& c, const Args& a) {
  return read_dataset(in_out(c, a.data, cfg.ablation.dataset));
}

int gen_data(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const RecordingResult rec = record_demonstrations(recording_config(cfg), cfg.seed);
  write_dataset((fs::path(c.out) / cfg.ablation.dataset).string(), rec.dataset);
  const RecordingReport& r = rec.report;
  write_json(fs::path(c.out) / "gen_report.json", {{"seed", cfg.seed},
                                                   {"episodes", r.episodes},
                                                   {"train_episodes", r.train_episodes},
                                                   {"val_episodes", r.val_episodes},
                                                   {"aborted_episodes", r.aborted_episodes},
                                                   {"abort_reasons", r.abort_reasons},
                                                   {"train_samples", rec.dataset.train.size()},
                                                   {"val_samples", rec.dataset.val.size()}});
  std::printf("recorded %zu train / %zu val samples from %d episodes (%d aborted)\n", rec.dataset.train.size(),
              rec.dataset.val.size(), r.episodes, r.aborted_episodes);
  return r.aborted_episodes == 0 ? 0 : 1;
}

void print_epoch(const Model&, const EpochLog& e) {
  std::printf("%-8s epoch %3d  train %.4f  val %.4f  val cvar %.4f\n", e.phase.c_str(), e.epoch, e.train_loss,
              e.val_loss, e.val_cvar);
  std::fflush(stdout);
}

int train(const Common& c, const Args& a) {
  ExperimentConfig cfg = load(c);
  if (!a.kind.empty()) cfg.model.kind = a.kind;
  if (a.w_aff) cfg.model.w_aff = *a.w_aff;
  cfg.validate();
  Dataset ds = load_data(cfg, c, a);
  const ModelKind kind = model_kind_from_string(cfg.model.kind);
  if (kind == ModelKind::Actuation) record_actuation_labels(ds, cfg.vehicle);
  Model m = init_model(kind, cfg, ds.header, ds.train, cfg.model.w_aff, cfg.seed);
  const TrainingSet tr = make_training_set(m, ds.train);
  const TrainingSet va = make_training_set(m, ds.val);
  const TrainOutcome out = train_model(m, tr, va, cfg.train, cfg.cvar.alpha, print_epoch);
  const fs::path base = fs::path(c.out) / (a.name.empty() ? "model" : a.name);
  save_model(base.string() + ".json", m);
  write_loss_csv(base.string() + ".loss.csv", m);
  if (out.diverged) {
    std::fprintf(stderr, "training diverged after %d epochs; kept the last finite epoch\n", out.epochs_run);
    return 1;
  }
  return 0;
}

int finetune(const Common& c, const Args& a) {
  const ExperimentConfig cfg = load(c);
  if (a.model.empty()) throw CLI::ValidationError("--model", "finetune-cvar needs a trained model");
  Model m = load_model(a.model);
  Dataset ds = load_data(cfg, c, a);
  if (m.kind == ModelKind::Actuation) record_actuation_labels(ds, cfg.vehicle);
  const TrainingSet tr = make_training_set(m, ds.train);
  const TrainingSet va = make_training_set(m, ds.val);
  const std::string name = a.name.empty() ? fs::path(a.model).stem().string() + "-cvar" : a.name;
  const fs::path dir(c.out);

  const SplitEvaluation before = evaluate_split(m, va, cfg.cvar.alpha);
  const TrainOutcome out = finetune_cvar(m, tr, va, cfg.cvar, cfg.train, print_epoch);
  const SplitEvaluation after = evaluate_split(m, va, cfg.cvar.alpha);

  save_model((dir / (name + ".json")).string(), m);
  write_loss_csv((dir / (name + ".loss.csv")).string(), m);
  write_percentile_csv((dir / ("cvar_percentiles_" + name + "_before.csv")).string(),
                       cvar_percentile_curve(before.primary_losses));
  write_percentile_csv((dir / ("cvar_percentiles_" + name + "_after.csv")).string(),
                       cvar_percentile_curve(after.primary_losses));
  write_json(dir / ("finetune_" + name + ".json"), {{"alpha", cfg.cvar.alpha},
                                                    {"epochs", cfg.cvar.finetune_epochs},
                                                    {"val_mean_before", before.mean_primary},
                                                    {"val_mean_after", after.mean_primary},
                                                    {"val_cvar_before", before.cvar_primary},
                                                    {"val_cvar_after", after.cvar_primary}});
  std::printf("val CVaR %.4f -> %.4f, val mean %.4f -> %.4f\n", before.cvar_primary, after.cvar_primary,
              before.mean_primary, after.mean_primary);
  return out.diverged ? 1 : 0;
}

int eval(const Common& c, const Args& a) {
  ExperimentConfig cfg = load(c);
  std::optional<Model> m;
  if (!a.model.empty()) m = load_model(a.model);
  std::string agent = a.agent;
  if (agent.empty()) agent = m ? to_string(m->kind) : cfg.eval.agent;
  if (agent != "expert" && !m) throw CLI::ValidationError("--model", "agent " + agent + " needs a model");
  if (agent != "expert" && model_kind_from_string(agent) != m->kind) {
    throw CLI::ValidationError("--agent", "model kind " + to_string(m->kind) + " does not match agent " + agent);
  }
  const EvalReport r = eval_closed_loop(cfg, agent, m ? &*m : nullptr);
  const std::string name = a.name.empty() ? agent : a.name;
  write_eval((fs::path(c.out) / ("eval_" + name + ".json")).string(),
             (fs::path(c.out) / ("traces_" + name + ".jsonl")).string(), r);
  std::printf("%s: %.1f mi, %d collisions (%.2f per 100 mi), %d stalls, %.1f mph\n", agent.c_str(), r.miles,
              r.collisions, r.collisions_per_100mi, r.stalls, r.mean_speed_mph);
  return 0;
}

int grid_search(const Common& c, const Args& a) {
  const ExperimentConfig cfg = load(c);
  const Dataset ds = load_data(cfg, c, a);
  const GridResult g = grid_search_weights(cfg, ds, cfg.grid.w_aff);
  std::ofstream csv(fs::path(c.out) / "grid_search.csv");
  csv << "w_aff,train_loss,val_loss,val_aff_loss\n";
  json rows = json::array();
  for (const GridRow& r : g.rows) {
    csv << csv_number(r.w_aff) << ',' << csv_number(r.train_loss) << ',' << csv_number(r.val_loss) << ','
        << csv_number(r.val_aff_loss) << '\n';
    rows.push_back({{"w_aff", r.w_aff}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss},
                    {"val_aff_loss", r.val_aff_loss}});
  }
  write_json(fs::path(c.out) / "grid_search.json", {{"rows", rows}, {"best_w_aff", g.rows[g.best].w_aff}});
  std::printf("best w_aff %g (val trajectory loss %.4f)\n", g.rows[g.best].w_aff, g.rows[g.best].val_loss);
  return 0;
}

int report(const Common& c, const Args& a) {
  const ExperimentConfig cfg = load(c);
  if (a.full) {
    const AblationResult r = run_ablation(cfg, c.out, [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); });
    std::printf("w_aff %g; val CVaR-90 %.4f -> %.4f after fine-tuning\n", r.w_aff, r.before_cvar.cvar_primary,
                r.after_cvar.cvar_primary);
  } else {
    write_report(cfg, c.out);
  }
  std::ifstream txt(fs::path(c.out) / "ablation.txt");
  std::cout << txt.rdbuf();
  return 0;
}

int verify(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const std::vector<CheckResult> checks = run_all_checks(cfg.seed);
  json arr = json::array();
  bool ok = true;
  for (const CheckResult& r : checks) {
    ok = ok && r.passed;
    std::printf("%-4s %-20s metric %.3e  tol %.1e  %.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.metric,
                r.tolerance, r.seconds, r.detail.c_str());
    arr.push_back({{"name", r.name}, {"passed", r.passed}, {"metric", r.metric}, {"tolerance", r.tolerance},
                   {"detail", r.detail}});
  }
  write_json(fs::path(c.out) / "verify.json", {{"passed", ok}, {"checks", arr}});
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-level behavioral cloning with GMM and CVaR losses"};
  app.require_subcommand(1);
  Common common;
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config file (defaults apply to missing keys)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "master seed, overrides the config");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", args.data, "dataset file (default: OUT/dataset.jsonl)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "record expert demonstrations");
  add_common(gen);
  CLI::App* tr = app.add_subcommand("train", "train the model named by model.kind");
  add_common(tr);
  add_data(tr);
  tr->add_option("--name", args.name, "output model name (default: model)");
  tr->add_option("--kind", args.kind, "overrides model.kind");
  tr->add_option("--w-aff", args.w_aff, "overrides model.w_aff");
  CLI::App* ft = app.add_subcommand("finetune-cvar", "CVaR fine-tuning of a trained model");
  add_common(ft);
  add_data(ft);
  ft->add_option("--model", args.model, "model file")->required()->check(CLI::ExistingFile);
  ft->add_option("--name", args.name, "output model name (default: MODEL-cvar)");
  CLI::App* ev = app.add_subcommand("eval", "closed-loop evaluation on the validation tracks");
  add_common(ev);
  ev->add_option("--model", args.model, "model file")->check(CLI::ExistingFile);
  ev->add_option("--agent", args.agent, "expert | trajectory-gmm | trajectory-l2 | baseline-actuation");
  ev->add_option("--name", args.name, "output name (default: the agent)");
  CLI::App* gs = app.add_subcommand("grid-search", "affordance loss weight search");
  add_common(gs);
  add_data(gs);
  CLI::App* rep = app.add_subcommand("report", "ablation tables, curves and summary");
  add_common(rep);
  rep->add_flag("--full", args.full, "run the whole ablation pipeline first");
  CLI::App* ver = app.add_subcommand("verify", "gradient and estimator self-checks");
  add_common(ver);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return gen_data(common);
    if (*tr) return train(common, args);
    if (*ft) return finetune(common, args);
    if (*ev) return eval(common, args);
    if (*gs) return grid_search(common, args);
    if (*rep) return report(common, args);
    if (*ver) return verify(common);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
