#pragma once

// Run configuration: a TOML tree (or a run manifest's "config" object) with
// `--set section.key=value` overrides applied on top. Every section is
// optional; unknown sections and keys are rejected before any compute.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "nct/error.hpp"
#include "nct/eval/kernel.hpp"
#include "nct/eval/suite.hpp"
#include "nct/io/toml.hpp"
#include "nct/models/checkpoint.hpp"
#include "nct/training/config.hpp"
#include "nct/training/pretrain.hpp"

namespace nct {

struct EvalConfig : SuiteOptions {
  bool use_ema = true;  // evaluate the EMA shadow of phi rather than the live weights
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string generator_checkpoint;  // empty: pretrain from the [pretrain] section
  PretrainConfig pretrain{};
  ConditionModel condition{};
  NctConfig nct{};
  EvalConfig eval{};
  Json effective = Json::object();   // the merged tree, as recorded in manifests
  std::vector<std::string> overrides;

  KernelSpec eval_kernel() const {
    KernelSpec k;
    k.median_multipliers = eval.median_multipliers;
    return k;
  }
};

namespace config_detail {

/// Reads typed values out of one table and remembers which keys were used.
class Section {
 public:
  Section(const Json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      table_ = root.at(name_);
      if (!table_.is_object()) throw ConfigError("[" + name_ + "] must be a table");
    } else {
      table_ = Json::object();
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    try {
      out = table_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type (" + table_.at(key).dump() + ")");
    }
  }

  void get_size(const std::string& key, std::size_t& out) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    const Json& v = table_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ConfigError(name_ + "." + key + " must be a nonnegative integer, got " + v.dump());
    }
    out = v.get<std::size_t>();
  }

  void get_sizes(const std::string& key, std::vector<std::size_t>& out) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    const Json& v = table_.at(key);
    if (!v.is_array()) throw ConfigError(name_ + "." + key + " must be an array of integers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<std::int64_t>() <= 0) {
        throw ConfigError(name_ + "." + key + " entries must be positive integers");
      }
      out.push_back(e.get<std::size_t>());
    }
  }

  void get_double(const std::string& key, double& out) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    const Json& v = table_.at(key);
    if (!v.is_number()) throw ConfigError(name_ + "." + key + " must be a number, got " + v.dump());
    out = v.get<double>();
  }

  void get_doubles(const std::string& key, std::vector<double>& out) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    const Json& v = table_.at(key);
    if (!v.is_array()) throw ConfigError(name_ + "." + key + " must be an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(name_ + "." + key + " entries must be numbers");
      out.push_back(e.get<double>());
    }
  }

  template <typename Parse>
  void get_enum(const std::string& key, Parse parse) {
    used_.insert(key);
    if (!table_.contains(key)) return;
    const Json& v = table_.at(key);
    if (!v.is_string()) throw ConfigError(name_ + "." + key + " must be a string");
    parse(v.get<std::string>());
  }

  void finish() const {
    for (const auto& [k, v] : table_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
    }
  }

 private:
  std::string name_;
  Json table_;
  std::set<std::string> used_;
};

}  // namespace config_detail

inline const std::vector<std::string>& config_sections() {
  static const std::vector<std::string> s{"run", "pretrain", "condition", "nct", "eval"};
  return s;
}

/// Builds and validates a RunConfig from a parsed tree.
inline RunConfig run_config_from_json(const Json& root) {
  if (!root.is_object()) throw ConfigError("config root must be a table");
  for (const auto& [k, v] : root.items()) {
    bool known = false;
    for (const auto& s : config_sections()) known = known || s == k;
    if (!known) throw ConfigError("unknown config section '" + k + "'");
  }
  using config_detail::Section;
  RunConfig rc;

  Section run(root, "run");
  run.get("seed", rc.seed);
  run.get("generator_checkpoint", rc.generator_checkpoint);
  run.finish();

  Section pre(root, "pretrain");
  PretrainConfig& pc = rc.pretrain;
  pre.get_enum("target", [&](const std::string& s) { pc.target = parse_target(s); });
  pre.get_size("latent_dim", pc.spec.input_dim);
  pre.get_sizes("hidden_dims", pc.spec.hidden_dims);
  pre.get_enum("activation", [&](const std::string& s) { pc.spec.activation = parse_activation(s); });
  pre.get_size("steps", pc.steps);
  pre.get_size("batch_size", pc.batch_size);
  pre.get_double("learning_rate", pc.adam.learning_rate);
  pre.get_doubles("bandwidths", pc.bandwidths);
  pre.get_size("heldout_samples", pc.heldout_samples);
  pre.get_double("threshold", pc.threshold);
  pre.get("enforce_threshold", pc.enforce_threshold);
  pre.finish();

  Section cond(root, "condition");
  ConditionModel& cm = rc.condition;
  cond.get_enum("kind", [&](const std::string& s) { cm.kind = parse_condition_kind(s); });
  cond.get_double("grid_cell", cm.grid_cell);
  cond.get_doubles("projection", cm.projection);
  cond.get_double("noise_scale", cm.noise_scale);
  cond.get_double("flip_prob", cm.flip_prob);
  cond.finish();
  cm.data_dim = pc.spec.output_dim;

  Section nct(root, "nct");
  NctConfig& nc = rc.nct;
  nct.get_double("xi", nc.xi);
  nct.get_double("eta", nc.eta);
  nct.get_double("lambda0", nc.lambda0);
  nct.get_size("particles", nc.particles);
  nct.get_size("intervals", nc.intervals);
  nct.get_enum("schedule", [&](const std::string& s) { nc.schedule_kind = parse_schedule_kind(s); });
  nct.get_size("batch_size", nc.batch_size);
  nct.get_double("learning_rate", nc.adam.learning_rate);
  nct.get_size("total_steps", nc.total_steps);
  nct.get_enum("distance", [&](const std::string& s) { nc.distance.kind = parse_distance_kind(s); });
  nct.get_double("huber_c", nc.distance.huber_c);
  nct.get_enum("dual_signal", [&](const std::string& s) { nc.dual_signal = parse_dual_signal(s); });
  nct.get_double("signal_smoothing", nc.signal_smoothing);
  nct.get_double("ema_decay", nc.ema_decay);
  nct.get_enum("target", [&](const std::string& s) { nc.target = parse_target_branch(s); });
  nct.get_size("early_stop_window", nc.early_stop_window);
  nct.get_sizes("cond_hidden", nc.adapter.cond_hidden);
  nct.get_size("cond_features", nc.adapter.cond_features);
  nct.get_sizes("control_dims", nc.adapter.control_dims);
  nct.finish();

  Section ev(root, "eval");
  EvalConfig& ec = rc.eval;
  ev.get_size("samples", ec.samples);
  ev.get_size("oracle_samples", ec.oracle_samples);
  ev.get_size("permutations", ec.permutations);
  ev.get_size("chance_samples", ec.chance_samples);
  ev.get_size("conditions", ec.conditions);
  ev.get("run_oracle", ec.run_oracle);
  ev.get_doubles("median_multipliers", ec.median_multipliers);
  ev.get_double("oracle_tolerance", ec.oracle.tolerance);
  ev.get_size("oracle_max_draws", ec.oracle.max_draws);
  ev.get("use_ema", ec.use_ema);
  ev.finish();

  // The root seed feeds every named substream.
  pc.seed = rc.seed;
  nc.seed = rc.seed;

  pc.validate();
  cm.validate();
  nc.validate();
  if (ec.samples < 2 || ec.oracle_samples < 2) throw ConfigError("eval sample counts must be at least 2");
  if (ec.conditions == 0) throw ConfigError("eval.conditions must be positive");
  if (ec.permutations == 0) throw ConfigError("eval.permutations must be positive");
  if (ec.median_multipliers.empty()) throw ConfigError("eval.median_multipliers must not be empty");
  for (double m : ec.median_multipliers) {
    if (!(m > 0.0)) throw ConfigError("eval.median_multipliers must be positive");
  }
  rc.effective = root;
  return rc;
}

/// Applies one `section.key=value` override to a tree.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  Json* t = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*t)[part] = parse_toml_value(value);
      return;
    }
    Json& next = (*t)[part];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) throw ConfigError("override key '" + key + "' descends into a value");
    t = &next;
    start = dot + 1;
  }
}

/// Loads a config file: TOML, or a run manifest (JSON with a "config" object)
/// so that a previous run can be replayed exactly.
inline Json load_config_tree(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".json") {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    if (j.contains("config")) return j.at("config");
    return j;
  }
  return load_toml_file(path);
}

inline RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides,
                                 const std::optional<std::uint64_t>& seed) {
  Json root = path.empty() ? Json::object() : load_config_tree(path);
  for (const auto& o : overrides) apply_override(root, o);
  if (seed) root["run"]["seed"] = *seed;
  RunConfig rc = run_config_from_json(root);
  rc.overrides = overrides;
  return rc;
}

/// CRC-32 of the canonical (sorted-key, compact) JSON text.
inline std::string config_hash(const Json& j) {
  const std::string text = j.dump();
  const auto crc = ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uInt>(text.size()));
  std::ostringstream os;
  os << std::hex;
  os.width(8);
  os.fill('0');
  os << crc;
  return os.str();
}

}  // namespace nct
