#include "sfm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace sfm {

std::string to_string(ModelKind k) { return k == ModelKind::sfm ? "sfm" : "lognormal"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "sfm") return ModelKind::sfm;
  if (s == "lognormal") return ModelKind::lognormal;
  throw ConfigError("unknown model kind '" + s + "' (expected sfm or lognormal)");
}

void RunConfig::propagate_seed() {
  split.seed = seed;
  train.seed = seed;
  simulate.oracle.seed = seed;
}

void RunConfig::validate() const {
  try {
    if (!schema.columns.empty()) schema.validate();
    sfm.validate();
    loss.validate();
    train.validate();
    if (simulate.n < 2) throw ConfigError("simulate.n must be at least 2");
    simulate.oracle.validate();
    double total = 0.0;
    for (double f : split.fractions) {
      if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
      total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    if (draws < 2) throw ConfigError("evaluate.draws must be at least 2");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

namespace {

const std::set<std::string> kTopKeys{"seed",  "model", "paths",    "schema",
                                     "split", "sfm",   "loss",     "train",
                                     "simulate", "evaluate"};

void reject_unknown(const YAML::Node& node, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& dst, const std::string& where) {
  if (!node[key]) return;
  try {
    dst = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for " + where + "." + key);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  RunConfig cfg;
  if (root.IsNull()) {
    cfg.propagate_seed();
    return cfg;
  }
  reject_unknown(root, kTopKeys, "config");

  read(root, "seed", cfg.seed, "config");
  if (root["model"]) cfg.model = parse_model_kind(root["model"].as<std::string>());

  if (const auto p = root["paths"]) {
    reject_unknown(p, {"data", "out", "checkpoint"}, "paths");
    if (p["data"]) cfg.paths.data = resolve(base_dir, p["data"].as<std::string>());
    if (p["out"]) cfg.paths.out = resolve(base_dir, p["out"].as<std::string>());
    if (p["checkpoint"]) cfg.paths.checkpoint = resolve(base_dir, p["checkpoint"].as<std::string>());
  } else {
    cfg.paths.out = base_dir / "out";
  }

  if (const auto s = root["schema"]) {
    reject_unknown(s, {"time", "event", "continuous", "categorical"}, "schema");
    read(s, "time", cfg.schema.time_column, "schema");
    read(s, "event", cfg.schema.event_column, "schema");
    std::vector<std::string> cont, cat;
    read(s, "continuous", cont, "schema");
    read(s, "categorical", cat, "schema");
    for (auto& n : cont) cfg.schema.columns.push_back({n, ColumnKind::continuous});
    for (auto& n : cat) cfg.schema.columns.push_back({n, ColumnKind::categorical});
  }

  if (const auto s = root["split"]) {
    reject_unknown(s, {"train", "valid", "test"}, "split");
    read(s, "train", cfg.split.fractions[0], "split");
    read(s, "valid", cfg.split.fractions[1], "split");
    read(s, "test", cfg.split.fractions[2], "split");
  }

  if (const auto s = root["sfm"]) {
    reject_unknown(s, {"hidden_units", "layers", "dropout", "noise_dim", "noise", "batchnorm"}, "sfm");
    read(s, "hidden_units", cfg.sfm.hidden_units, "sfm");
    read(s, "layers", cfg.sfm.layers, "sfm");
    read(s, "dropout", cfg.sfm.dropout_p, "sfm");
    read(s, "noise_dim", cfg.sfm.noise_dim, "sfm");
    read(s, "batchnorm", cfg.sfm.batchnorm, "sfm");
    if (s["noise"]) {
      try {
        cfg.sfm.noise_kind = parse_noise_kind(s["noise"].as<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  if (const auto s = root["loss"]) {
    reject_unknown(s, {"lambda", "tau", "tau_fraction"}, "loss");
    read(s, "lambda", cfg.loss.lambda, "loss");
    read(s, "tau_fraction", cfg.loss.tau_fraction, "loss");
    if (s["tau"]) {
      double tau = 0.0;
      read(s, "tau", tau, "loss");
      cfg.loss.tau = tau;
    }
  }

  if (const auto s = root["train"]) {
    reject_unknown(s, {"batch_size", "learning_rate", "beta1", "beta2", "epsilon", "max_epochs",
                       "patience", "tau_decay"},
                   "train");
    read(s, "batch_size", cfg.train.batch_size, "train");
    read(s, "learning_rate", cfg.train.adam.learning_rate, "train");
    read(s, "beta1", cfg.train.adam.beta1, "train");
    read(s, "beta2", cfg.train.adam.beta2, "train");
    read(s, "epsilon", cfg.train.adam.epsilon, "train");
    read(s, "max_epochs", cfg.train.max_epochs, "train");
    read(s, "patience", cfg.train.patience, "train");
    read(s, "tau_decay", cfg.train.tau_decay, "train");
  }

  if (const auto s = root["simulate"]) {
    reject_unknown(s, {"n", "family", "shape", "weights", "censoring", "censoring_fraction"},
                   "simulate");
    read(s, "n", cfg.simulate.n, "simulate");
    read(s, "shape", cfg.simulate.oracle.shape, "simulate");
    read(s, "weights", cfg.simulate.oracle.weights, "simulate");
    read(s, "censoring_fraction", cfg.simulate.oracle.censoring_fraction, "simulate");
    try {
      if (s["family"]) cfg.simulate.oracle.family = parse_family(s["family"].as<std::string>());
      if (s["censoring"])
        cfg.simulate.oracle.censoring = parse_censoring(s["censoring"].as<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (cfg.simulate.oracle.weights.empty()) cfg.simulate.oracle.weights = {0.5, -0.4, 0.3, 0.2, -0.3};

  if (const auto s = root["evaluate"]) {
    reject_unknown(s, {"draws"}, "evaluate");
    read(s, "draws", cfg.draws, "evaluate");
  }

  cfg.propagate_seed();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace sfm
