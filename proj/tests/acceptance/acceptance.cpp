// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fails.
// Training runs use configs/default.toml; every run's metrics CSV is written
// under --out so repeated invocations can be diffed.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nct/eval/gradcheck_suite.hpp"
#include "nct/eval/independence.hpp"
#include "nct/eval/suite.hpp"
#include "nct/io/config.hpp"
#include "nct/io/csv.hpp"
#include "nct/io/manifest.hpp"
#include "nct/training/baselines.hpp"
#include "nct/training/nct.hpp"
#include "nct/training/pretrain.hpp"

namespace fs = std::filesystem;
using namespace nct;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(what + (ok ? "" : " [x]"));
  }
};

class Report {
 public:
  void add(int id, const std::string& title, const Verdict& v) {
    std::ostringstream line;
    line << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " |";
    for (const auto& n : v.notes) line << " " << n << ";";
    std::cout << line.str() << std::endl;
    failed_ = failed_ || !v.pass;
  }
  bool failed() const { return failed_; }

 private:
  bool failed_ = false;
};

struct TrainedRun {
  std::string name;
  TrainResult train;
  EvalReport eval;
  double seconds = 0.0;
  std::string metrics_csv;
};

std::vector<MetricsRow> train_rows(const TrainResult& tr, const NctConfig& cfg, std::uint64_t seed) {
  const auto n = tr.log.size();
  std::vector<MetricsRow> rows{{"train_steps", static_cast<double>(n), n, 0, "", seed}};
  if (n == 0) return rows;
  rows.push_back({"smoothed_l_bound", smoothed_l_bound(tr.log, cfg.signal_smoothing), n, 0, "", seed});
  rows.push_back({"final_lambda", tr.log.records.back().lambda, n, 0, "", seed});
  rows.push_back({"min_lambda", min_lambda(tr.log), n, 0, "", seed});
  return rows;
}

TrainedRun train_and_evaluate(const std::string& name, const GeneratorModel& gen, const ConditionModel& cm,
                              const RunConfig& rc, const NctConfig& cfg,
                              const std::function<TrainResult()>& train, const fs::path& out) {
  std::cout << "  running " << name << " (" << cfg.total_steps << " steps)" << std::endl;
  TrainedRun r;
  r.name = name;
  const auto t0 = Clock::now();
  r.train = train();
  AdapterModel ad = r.train.adapter;
  if (rc.eval.use_ema) ad.phi = r.train.ema.shadow;
  r.eval = evaluate_adapter(gen, ad, cm, rc.eval, RngStream(rc.seed).derive("evaluation"), rc.seed);
  r.seconds = seconds_since(t0);
  std::vector<MetricsRow> rows = train_rows(r.train, cfg, rc.seed);
  rows.insert(rows.end(), r.eval.rows.begin(), r.eval.rows.end());
  r.metrics_csv = metrics_csv(rows);
  fs::create_directories(out / name);
  write_file_atomic((out / name / "metrics.csv").string(), r.metrics_csv);
  write_file_atomic((out / name / "train_log.csv").string(), train_log_csv(r.train.log));
  std::cout << "  " << name << " done in " << fmt(r.seconds) << " s" << std::endl;
  return r;
}

double combined_se(const EvalReport& e) {
  return std::sqrt(e.mismatch_se * e.mismatch_se + e.chance.standard_error * e.chance.standard_error);
}

// Criterion 1: per-coordinate moments of diffused latents at every level.
Verdict variance_preservation() {
  Verdict v;
  const auto t0 = Clock::now();
  const NoiseSchedule sched = make_schedule(16);
  RngStream rng = RngStream(1).derive("acceptance-vp");
  const LatentBatch b = sample_latents(100000, 2, rng);
  double worst_mean = 0.0, worst_cov = 0.0;
  for (std::size_t k = 0; k <= sched.intervals; ++k) {
    const Matrix zk = diffuse_batch(b.z, b.eps, k, sched);
    const Eigen::RowVectorXd mean = zk.colwise().mean();
    const Matrix centered = zk.rowwise() - mean;
    const Matrix cov = centered.transpose() * centered / static_cast<double>(zk.rows() - 1);
    worst_mean = std::max(worst_mean, mean.cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, (cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  v.check(worst_mean <= 0.02, "max |mean| " + fmt(worst_mean) + " <= 0.02");
  v.check(worst_cov <= 0.05, "max |cov - I| " + fmt(worst_cov) + " <= 0.05");
  v.check(secs < 10.0, "runtime " + fmt(secs) + " s < 10 s");
  return v;
}

// Criterion 2: joint-versus-product test at both interpolation endpoints.
Verdict independence_endpoints(const GeneratorModel& gen, const ConditionModel& cm, const RunConfig& rc) {
  Verdict v;
  const auto t0 = Clock::now();
  const NoiseSchedule sched = make_schedule(16);
  const KernelSpec k = rc.eval_kernel();
  auto p_value_at = [&](std::size_t level, std::uint64_t seed) {
    RngStream rng = RngStream(seed).derive("acceptance-independence");
    RngStream draw = rng.derive("draw");
    const CoupledBatch b = sample_coupled(gen, cm, 1000, draw);
    const Matrix eps = draw.normal_matrix(b.z.rows(), b.z.cols());
    const Matrix zk = diffuse_batch(b.z, eps, level, sched);
    return independence_gap(zk, b.cembed, k, rng.derive("permutations"), 200).p_value;
  };
  const double p0 = p_value_at(0, 1);
  std::size_t kept = 0;
  const std::size_t runs = 50;
  for (std::uint64_t s = 0; s < runs; ++s) kept += p_value_at(sched.intervals, 100 + s) >= 0.01 ? 1 : 0;
  const double secs = seconds_since(t0);
  v.check(p0 < 0.01, "k=0 p " + fmt(p0) + " < 0.01");
  v.check(kept >= 49, "k=N p >= 0.01 in " + std::to_string(kept) + "/50 (need >= 49)");
  v.check(secs < 120.0, "runtime " + fmt(secs) + " s < 120 s");
  return v;
}

// Criterion 3: reverse mode against central differences on a 2-8-2 model.
Verdict gradient_check() {
  Verdict v;
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  const std::vector<std::pair<DistanceMetric, std::size_t>> variants{
      {DistanceMetric{}, 1}, {DistanceMetric{DistanceKind::pseudo_huber, 0.1}, 4}};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& [metric, particles] : variants) {
      for (const auto& c : gradcheck_objectives(seed, metric, particles)) {
        worst[c.objective] = std::max(worst[c.objective], c.result.max_relative_error);
      }
    }
  }
  const double secs = seconds_since(t0);
  for (const auto& [name, err] : worst) v.check(err < 1e-4, name + " max rel err " + fmt(err) + " < 1e-4");
  v.check(secs < 60.0, "runtime " + fmt(secs) + " s < 60 s");
  return v;
}

// Criterion 4: a freshly initialised adapter is exactly the base generator.
Verdict zero_init(const GeneratorModel& gen, const ConditionModel& cm, const RunConfig& rc) {
  Verdict v;
  const AdapterModel ad = initial_adapter(gen, cm, rc.nct);
  RngStream rng = RngStream(rc.seed).derive("acceptance-zero-init");
  const IndependentBatch b = sample_independent(gen, cm, 10000, rng);
  const bool same = generate_conditional_batch(gen, ad, b.z, b.cembed) == generate_batch(gen, b.z);
  v.check(same, std::string("conditional output ") + (same ? "bitwise equal" : "differs") + " on 1e4 (z, c)");
  RngStream rb = RngStream(rc.seed).derive("acceptance-zero-init-boundary");
  const CoupledBatch cb = sample_coupled(gen, cm, 1000, rb);
  const double lb = boundary_loss_value(gen, ad, cb, rc.nct.distance);
  v.check(lb == 0.0, "boundary loss " + fmt(lb) + " == 0");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for noise consistency training"};
  std::string config = std::string(NCT_SOURCE_DIR) + "/configs/default.toml";
  std::string out = "acceptance";
  app.add_option("--config", config, "run configuration (TOML or manifest.json)");
  app.add_option("--out", out, "directory for per-run metrics");
  CLI11_PARSE(app, argc, argv);

  const RunConfig rc = load_run_config(config, {}, std::nullopt);
  const fs::path dir(out);
  fs::create_directories(dir);
  std::cout << "config " << config << " (hash " << config_hash(rc.effective) << ")" << std::endl;

  Report report;
  report.add(1, "variance preservation", variance_preservation());
  report.add(3, "gradient correctness", gradient_check());

  std::cout << "  pretraining generator (" << rc.pretrain.steps << " steps)" << std::endl;
  const auto tp = Clock::now();
  const PretrainResult pre = pretrain_generator(rc.pretrain);
  std::cout << "  pretrain held-out MMD^2 " << fmt(pre.heldout_mmd2) << " in " << fmt(seconds_since(tp)) << " s"
            << std::endl;
  const GeneratorModel& gen = pre.generator;
  ConditionModel cm = rc.condition;
  cm.data_dim = gen.data_dim();

  report.add(2, "independence at the endpoints", independence_endpoints(gen, cm, rc));
  report.add(4, "zero-init boundary optimum", zero_init(gen, cm, rc));

  const NctConfig& base = rc.nct;
  auto with = [&](auto edit) {
    NctConfig c = base;
    edit(c);
    return c;
  };
  const NctConfig no_con = with([](NctConfig& c) { c.use_consistency = false; });
  const NctConfig no_bound = with([](NctConfig& c) { c.use_boundary = false; });

  const TrainedRun full =
      train_and_evaluate("nct", gen, cm, rc, base, [&] { return nct_train(gen, cm, base); }, dir);
  const TrainedRun ablate_con = train_and_evaluate(
      "ablate-consistency", gen, cm, rc, no_con, [&] { return nct_train(gen, cm, no_con); }, dir);
  const TrainedRun ablate_bound = train_and_evaluate(
      "ablate-boundary", gen, cm, rc, no_bound, [&] { return nct_train(gen, cm, no_bound); }, dir);
  const TrainedRun naive = train_and_evaluate(
      "baseline-naive", gen, cm, rc, base, [&] { return baseline_naive(gen, cm, base); }, dir);
  const TrainedRun coupled = train_and_evaluate(
      "baseline-coupled", gen, cm, rc, base, [&] { return baseline_coupled(gen, cm, base); }, dir);

  {
    Verdict v;
    v.check(full.train.log.size() <= 20000, "steps " + std::to_string(full.train.log.size()) + " <= 2e4");
    v.check(full.eval.random_pairs.mismatch_rate < 0.05,
            "mismatch " + fmt(full.eval.random_pairs.mismatch_rate) + " < 0.05");
    for (const auto& p : full.eval.probes) {
      v.check(p.feasible && p.mmd2 < p.null_q99,
              p.name + " MMD^2 " + fmt(p.mmd2) + " < null q99 " + fmt(p.null_q99));
    }
    v.check(full.seconds < 900.0, "runtime " + fmt(full.seconds) + " s < 900 s");
    report.add(5, "end-to-end joint distribution", v);
  }
  {
    Verdict v;
    const auto& e = ablate_con.eval;
    const double gap = std::abs(e.random_pairs.mismatch_rate - e.chance.rate);
    v.check(gap <= 2.0 * combined_se(e), "ablated mismatch " + fmt(e.random_pairs.mismatch_rate) + " vs chance " +
                                             fmt(e.chance.rate) + " (|gap| " + fmt(gap) + " <= 2 SE " +
                                             fmt(2.0 * combined_se(e)) + ")");
    v.check(full.eval.random_pairs.mismatch_rate < 0.05,
            "full mismatch " + fmt(full.eval.random_pairs.mismatch_rate) + " < 0.05");
    report.add(6, "without the consistency loss", v);
  }
  {
    Verdict v;
    const double ratio = ablate_bound.eval.marginal_mmd2 / full.eval.marginal_mmd2;
    v.check(ratio >= 10.0, "marginal MMD^2 ablated " + fmt(ablate_bound.eval.marginal_mmd2) + " / full " +
                               fmt(full.eval.marginal_mmd2) + " = " + fmt(ratio) + " >= 10");
    report.add(7, "without the boundary loss", v);
  }
  {
    Verdict v;
    for (const auto& p : naive.eval.probes) {
      const double r = p.adapter_variance / p.oracle_variance;
      v.check(p.feasible && r < 0.2, "naive " + p.name + " variance ratio " + fmt(r) + " < 0.2");
    }
    const auto& e = coupled.eval;
    const double gap = std::abs(e.random_pairs.mismatch_rate - e.chance.rate);
    v.check(gap <= 2.0 * combined_se(e), "coupled mismatch " + fmt(e.random_pairs.mismatch_rate) + " vs chance " +
                                             fmt(e.chance.rate) + " (|gap| " + fmt(gap) + " <= 2 SE " +
                                             fmt(2.0 * combined_se(e)) + ")");
    report.add(8, "baseline failure modes", v);
  }
  {
    Verdict v;
    double lowest = 0.0;
    bool first = true;
    for (const TrainedRun* r : {&full, &ablate_con, &ablate_bound, &naive, &coupled}) {
      if (r->train.log.size() == 0) continue;
      const double m = min_lambda(r->train.log);
      lowest = first ? m : std::min(lowest, m);
      first = false;
    }
    v.check(lowest >= 0.0, "min lambda over all runs " + fmt(lowest) + " >= 0");
    const double bound = 1.5 * base.xi;
    for (const TrainedRun* r : {&full, &ablate_con}) {
      const double s = smoothed_l_bound(r->train.log, base.signal_smoothing);
      v.check(s <= bound, r->name + " smoothed L_bound " + fmt(s) + " <= " + fmt(bound));
    }
    report.add(9, "dual dynamics", v);
  }
  {
    Verdict v;
    const PretrainResult again = pretrain_generator(rc.pretrain);
    v.check(again.generator.theta == gen.theta, "pretrained generator repeats bitwise");
    const TrainedRun repeat = train_and_evaluate(
        "nct-repeat", again.generator, cm, rc, base, [&] { return nct_train(again.generator, cm, base); }, dir);
    v.check(repeat.metrics_csv == full.metrics_csv, "nct metrics.csv byte-identical on repeat");
    report.add(10, "determinism", v);
  }
  return report.failed() ? 1 : 0;
}
