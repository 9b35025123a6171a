#pragma once

// Command-line entry point. Every subcommand takes --config/--set/--seed/--out,
// writes its outputs plus manifest.json into the --out directory, and reports
// failures as one JSON line on stderr (exit 2: bad config or usage, exit 1:
// compute failure).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nct/eval/gradcheck_suite.hpp"
#include "nct/eval/suite.hpp"
#include "nct/io/config.hpp"
#include "nct/io/csv.hpp"
#include "nct/io/manifest.hpp"
#include "nct/io/svg.hpp"
#include "nct/training/baselines.hpp"
#include "nct/training/nct.hpp"
#include "nct/training/pretrain.hpp"

namespace nct::cli {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string generator;
  std::string adapter;
  std::string mode;
  std::string drop;
  bool skip_eval = false;
  std::size_t gradcheck_seeds = 20;
};

class Run {
 public:
  Run(std::string command, const CommonArgs& args) : command_(std::move(command)), args_(args) {
    Json root = args.config.empty() ? Json::object() : load_config_tree(args.config);
    std::vector<std::string> overrides = args.sets;
    for (const auto& o : args.sets) apply_override(root, o);
    if (args.seed) root["run"]["seed"] = *args.seed;
    if (!args.generator.empty()) root["run"]["generator_checkpoint"] = args.generator;
    rc_ = run_config_from_json(root);
    rc_.overrides = overrides;
    manifest_ = make_manifest(command_, rc_);
    if (!rc_.generator_checkpoint.empty()) inputs_.push_back(rc_.generator_checkpoint);
    if (!args.adapter.empty()) inputs_.push_back(args.adapter);
  }

  const RunConfig& config() const { return rc_; }
  RunManifest& manifest() { return manifest_; }

  /// Fails before any work is done if one of `names` would overwrite an input.
  void guard(const std::vector<std::string>& names) const {
    for (const auto& name : names) {
      const fs::path p = fs::path(args_.out) / name;
      for (const auto& in : inputs_) {
        std::error_code ec;
        if (fs::exists(p) && fs::equivalent(p, in, ec)) {
          throw UsageError("refusing to overwrite input checkpoint '" + in + "'");
        }
      }
    }
  }

  /// Output path inside --out; refuses to name one of the run's inputs.
  std::string output(const std::string& name) {
    guard({name});
    fs::create_directories(args_.out);
    manifest_.outputs.push_back(name);
    return (fs::path(args_.out) / name).string();
  }

  void say(const std::string& line) const { std::cout << command_ << ": " << line << "\n"; }

  GeneratorModel generator() {
    if (!rc_.generator_checkpoint.empty()) {
      say("loading generator from " + rc_.generator_checkpoint);
      return generator_from_checkpoint(load_checkpoint(rc_.generator_checkpoint));
    }
    say("pretraining generator (" + std::to_string(rc_.pretrain.steps) + " steps)");
    PretrainResult pr = pretrain_generator(rc_.pretrain);
    const std::string path = output("generator.ckpt");
    save_checkpoint(path, generator_checkpoint(pr.generator, rc_.seed, pr.steps));
    manifest_.summary["pretrain_heldout_mmd2"] = pr.heldout_mmd2;
    pretrain_ = std::move(pr);
    return pretrain_->generator;
  }

  const std::optional<PretrainResult>& pretrain_result() const { return pretrain_; }

  void finish() { write_manifest(output("manifest.json"), manifest_); }

 private:
  std::string command_;
  CommonArgs args_;
  RunConfig rc_;
  RunManifest manifest_;
  std::vector<std::string> inputs_;
  std::optional<PretrainResult> pretrain_;
};

inline ConditionModel condition_for(const RunConfig& rc, const GeneratorModel& gen) {
  ConditionModel cm = rc.condition;
  cm.data_dim = gen.data_dim();
  cm.validate();
  return cm;
}

inline std::vector<MetricsRow> training_rows(const TrainResult& tr, const NctConfig& cfg, std::uint64_t seed) {
  const auto n = tr.log.size();
  std::vector<MetricsRow> rows;
  rows.push_back({"train_steps", static_cast<double>(n), n, 0, "", seed});
  if (n == 0) return rows;
  const TrainRecord& last = tr.log.records.back();
  rows.push_back({"final_l_con", last.l_con, n, 0, "", seed});
  rows.push_back({"final_l_bound", last.l_bound, n, 0, "", seed});
  rows.push_back({"smoothed_l_bound", smoothed_l_bound(tr.log, cfg.signal_smoothing), n, 0, "", seed});
  rows.push_back({"xi", cfg.xi, 0, 0, "", seed});
  rows.push_back({"final_lambda", last.lambda, n, 0, "", seed});
  rows.push_back({"min_lambda", min_lambda(tr.log), n, 0, "", seed});
  return rows;
}

inline AdapterModel evaluated_adapter(const TrainResult& tr, bool use_ema) {
  AdapterModel ad = tr.adapter;
  if (use_ema) ad.phi = tr.ema.shadow;
  return ad;
}

inline std::vector<MetricsRow> eval_rows(const GeneratorModel& gen, const AdapterModel& ad, const ConditionModel& cm,
                                         const RunConfig& rc) {
  return evaluate_adapter(gen, ad, cm, rc.eval, RngStream(rc.seed).derive("evaluation"), rc.seed).rows;
}

/// Shared body of train-adapter, baseline and ablate.
inline int train_command(const std::string& command, const CommonArgs& args) {
  Run run(command, args);
  NctConfig cfg = run.config().nct;
  std::string stem = "adapter";
  std::optional<BaselineMode> baseline;
  if (command == "baseline") {
    baseline = parse_baseline_mode(args.mode);
    stem = "baseline-" + to_string(*baseline);
    run.manifest().arguments["mode"] = args.mode;
  } else if (command == "ablate") {
    if (args.drop == "consistency") {
      cfg.use_consistency = false;
    } else if (args.drop == "boundary") {
      cfg.use_boundary = false;
    } else if (args.drop == "primal-dual") {
      cfg.use_dual = false;
    } else {
      throw UsageError("--drop must be consistency, boundary or primal-dual, got '" + args.drop + "'");
    }
    stem = "ablate-" + args.drop;
    run.manifest().arguments["drop"] = args.drop;
  }
  run.guard({stem + ".ckpt", "train_log.csv", "metrics.csv", "manifest.json", "generator.ckpt"});
  const GeneratorModel gen = run.generator();
  const ConditionModel cm = condition_for(run.config(), gen);
  run.say("training " + stem + " for " + std::to_string(cfg.total_steps) + " steps");
  const TrainResult tr = baseline ? train_baseline(gen, cm, cfg, *baseline) : nct_train(gen, cm, cfg);
  for (const auto& e : tr.log.events) run.say(e);

  const std::string ckpt = run.output(stem + ".ckpt");
  save_checkpoint(ckpt, adapter_checkpoint({gen, tr.adapter, tr.ema, cm, tr.schedule}, run.config().seed,
                                           tr.log.size(), Json{{"command", command}, {"stem", stem}}));
  write_file_atomic(run.output("train_log.csv"), train_log_csv(tr.log));

  std::vector<MetricsRow> rows = training_rows(tr, cfg, run.config().seed);
  if (!args.skip_eval) {
    run.say("evaluating");
    const auto ev = eval_rows(gen, evaluated_adapter(tr, run.config().eval.use_ema), cm, run.config());
    rows.insert(rows.end(), ev.begin(), ev.end());
  }
  write_metrics_csv(run.output("metrics.csv"), rows);
  run.manifest().summary["steps"] = tr.log.size();
  run.finish();
  run.say("wrote " + ckpt);
  return 0;
}

inline int pretrain_command(const CommonArgs& args) {
  Run run("pretrain", args);
  if (!run.config().generator_checkpoint.empty()) {
    throw UsageError("pretrain trains a new generator; drop run.generator_checkpoint / --generator");
  }
  run.generator();
  const PretrainResult& pr = *run.pretrain_result();
  const auto seed = run.config().seed;
  std::vector<MetricsRow> rows{
      {"heldout_mmd2", pr.heldout_mmd2, run.config().pretrain.heldout_samples,
       run.config().pretrain.heldout_samples, pr.kernel, seed},
      {"threshold", pr.threshold, 0, 0, "", seed},
      {"final_train_loss", pr.losses.empty() ? 0.0 : pr.losses.back(), pr.steps, 0,
       KernelSpec::rbf(run.config().pretrain.bandwidths).describe(), seed}};
  write_metrics_csv(run.output("metrics.csv"), rows);
  std::string log = "step,loss\n";
  for (std::size_t i = 0; i < pr.losses.size(); ++i) log += std::to_string(i + 1) + "," + format_double(pr.losses[i]) + "\n";
  write_file_atomic(run.output("pretrain_log.csv"), log);
  run.finish();
  run.say("held-out MMD^2 " + format_double(pr.heldout_mmd2));
  return 0;
}

/// Generator, adapter and condition for eval/figures: from --adapter when
/// given, otherwise the zero-initialized adapter for the configured generator.
struct EvalSubject {
  GeneratorModel gen;
  AdapterModel adapter;
  ConditionModel condition;
};

inline EvalSubject eval_subject(Run& run, const CommonArgs& args) {
  if (!args.adapter.empty()) {
    const AdapterBundle b = adapter_from_checkpoint(load_checkpoint(args.adapter));
    AdapterModel ad = b.adapter;
    if (run.config().eval.use_ema) ad.phi = b.ema.shadow;
    run.say("evaluating adapter " + args.adapter);
    return {b.generator, ad, b.condition};
  }
  GeneratorModel gen = run.generator();
  ConditionModel cm = condition_for(run.config(), gen);
  AdapterModel ad = initial_adapter(gen, cm, run.config().nct);
  run.say("no --adapter given; evaluating the zero-initialized adapter");
  return {std::move(gen), std::move(ad), std::move(cm)};
}

inline int eval_command(const CommonArgs& args) {
  Run run("eval", args);
  if (!args.adapter.empty()) run.manifest().arguments["adapter"] = args.adapter;
  const EvalSubject s = eval_subject(run, args);
  write_metrics_csv(run.output("metrics.csv"), eval_rows(s.gen, s.adapter, s.condition, run.config()));
  run.finish();
  return 0;
}

inline int gradcheck_command(const CommonArgs& args) {
  Run run("gradcheck", args);
  run.manifest().arguments["seeds"] = args.gradcheck_seeds;
  const NctConfig& cfg = run.config().nct;
  std::vector<MetricsRow> rows;
  double worst = 0.0;
  for (std::size_t i = 0; i < args.gradcheck_seeds; ++i) {
    const std::uint64_t seed = run.config().seed + i;
    for (const auto& c : gradcheck_objectives(seed, cfg.distance, cfg.particles)) {
      rows.push_back({"max_relative_error[" + c.objective + "]", c.result.max_relative_error, 0, 0,
                      to_string(c.distance.kind) + ",P=" + std::to_string(c.particles), seed});
      worst = std::max(worst, c.result.max_relative_error);
    }
  }
  write_metrics_csv(run.output("metrics.csv"), rows);
  run.manifest().summary["worst_relative_error"] = worst;
  run.finish();
  run.say("worst relative error " + format_double(worst));
  if (!(worst < 1e-4)) throw TrainingError("gradient check failed: relative error " + format_double(worst));
  return 0;
}

inline int figures_command(const CommonArgs& args) {
  Run run("figures", args);
  const EvalSubject s = eval_subject(run, args);
  RngStream rng = RngStream(run.config().seed).derive("figures");
  const std::size_t n = 2000;
  const auto m = static_cast<Eigen::Index>(s.gen.latent_dim());

  FigureSpec base;
  base.title = "target vs generator";
  base.layers.push_back({"target", sample_target(run.config().pretrain.target, n, rng), "", 1.5, 0.5});
  base.layers.push_back({"generator", generate_batch(s.gen, rng.normal_matrix(static_cast<Eigen::Index>(n), m)), "",
                         1.5, 0.5});
  base.output_path = run.output("generator.svg");
  render_scatter_svg(base);

  if (s.condition.is_label()) {
    FigureSpec cond, oracle;
    std::string oracle_csv = "label,x,y\n";
    cond.title = "adapter samples by quadrant label";
    oracle.title = "rejection-oracle samples by quadrant label";
    for (std::size_t l = 0; l < kQuadrantLabels; ++l) {
      const Matrix z = rng.normal_matrix(static_cast<Eigen::Index>(n / 4), m);
      const Matrix c = Matrix::Constant(z.rows(), 1, static_cast<double>(l));
      cond.layers.push_back({"label " + std::to_string(l),
                             generate_conditional_batch(s.gen, s.adapter, z, embed_conditions(s.condition, c)), ""});
      const OracleSamples o =
          conditional_oracle(s.gen, s.condition, {static_cast<double>(l)}, n / 4, rng, run.config().eval.oracle);
      oracle.layers.push_back({"label " + std::to_string(l), o.samples.samples, ""});
      for (Eigen::Index i = 0; i < o.samples.size(); ++i) {
        oracle_csv += std::to_string(l) + "," + format_double(o.samples.samples(i, 0)) + "," +
                      format_double(o.samples.samples(i, 1)) + "\n";
      }
    }
    write_file_atomic(run.output("oracle_samples.csv"), oracle_csv);
    cond.output_path = run.output("conditional.svg");
    oracle.output_path = run.output("oracle.svg");
    render_scatter_svg(cond);
    render_scatter_svg(oracle);
  }
  run.finish();
  return 0;
}

inline void print_error(std::string_view kind, const std::string& message, int code) {
  std::cerr << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << std::endl;
}

inline int run(int argc, char** argv) {
  CLI::App app{"Noise consistency training on 2-D toy tasks"};
  app.require_subcommand(1);
  CommonArgs args;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "TOML config, or a manifest.json to replay");
    sub->add_option("--set", args.sets, "Override one config key: section.key=value")->take_all();
    sub->add_option("--seed", args.seed, "Root seed (overrides run.seed)");
    sub->add_option("--out", args.out, "Output directory")->capture_default_str();
    return sub;
  };
  auto with_generator = [&](CLI::App* sub) {
    sub->add_option("--generator", args.generator, "Generator checkpoint (default: pretrain from config)");
    return sub;
  };
  auto* pretrain = common(app.add_subcommand("pretrain", "Pretrain the base generator by MMD matching"));
  auto* train = with_generator(common(app.add_subcommand("train-adapter", "Train an adapter with NCT")));
  auto* baseline = with_generator(common(app.add_subcommand("baseline", "Train a boundary-loss-only baseline")));
  baseline->add_option("--mode", args.mode, "naive | coupled")->required();
  auto* ablate = with_generator(common(app.add_subcommand("ablate", "Train NCT with one component removed")));
  ablate->add_option("--drop", args.drop, "consistency | boundary | primal-dual")->required();
  for (auto* sub : {train, baseline, ablate}) {
    sub->add_flag("--skip-eval", args.skip_eval, "Write the checkpoint and training log only");
  }
  auto* eval = with_generator(common(app.add_subcommand("eval", "Run the metric suite on an adapter")));
  auto* figures = with_generator(common(app.add_subcommand("figures", "Write SVG scatter plots")));
  for (auto* sub : {eval, figures}) {
    sub->add_option("--adapter", args.adapter, "Adapter checkpoint (default: zero-initialized adapter)");
  }
  auto* gradcheck = common(app.add_subcommand("gradcheck", "Check loss gradients against finite differences"));
  gradcheck->add_option("--seeds", args.gradcheck_seeds, "Number of seeds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what(), 2);
    return 2;
  }

  try {
    if (pretrain->parsed()) return pretrain_command(args);
    if (train->parsed()) return train_command("train-adapter", args);
    if (baseline->parsed()) return train_command("baseline", args);
    if (ablate->parsed()) return train_command("ablate", args);
    if (eval->parsed()) return eval_command(args);
    if (figures->parsed()) return figures_command(args);
    if (gradcheck->parsed()) return gradcheck_command(args);
  } catch (const ConfigError& e) {
    print_error(e.kind(), e.what(), 2);
    return 2;
  } catch (const UsageError& e) {
    print_error(e.kind(), e.what(), 2);
    return 2;
  } catch (const Error& e) {
    print_error(e.kind(), e.what(), 1);
    return 1;
  } catch (const std::exception& e) {
    print_error("error", e.what(), 1);
    return 1;
  }
  return 2;
}

}  // namespace nct::cli
