#include "sfm/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sfm/checkpoint.hpp"
#include "sfm/config.hpp"
#include "sfm/estimators.hpp"
#include "sfm/evaluate.hpp"
#include "sfm/plot.hpp"
#include "sfm/synth.hpp"
#include "sfm/train.hpp"

namespace sfm {

namespace fs = std::filesystem;

namespace {

/// Failure carrying the category printed on the error line.
struct CliError : std::runtime_error {
  CliError(std::string cat, const std::string& msg, int code)
      : std::runtime_error(msg), category(std::move(cat)), exit_code(code) {}
  std::string category;
  int exit_code;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  bool svg = false;
};

RunConfig resolve_config(const Options& opt) {
  if (!fs::exists(opt.config)) throw ConfigError("config file '" + opt.config + "' not found");
  RunConfig cfg = load_run_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.model) cfg.model = parse_model_kind(*opt.model);
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') cfg.paths.out = env;
  if (opt.out) cfg.paths.out = *opt.out;
  if (opt.data) cfg.paths.data = *opt.data;
  if (opt.checkpoint) cfg.paths.checkpoint = *opt.checkpoint;
  cfg.propagate_seed();
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << std::setprecision(17);
  return f;
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path.string() + "' not found");
}

/// Continuous schema from the CSV header when the config lists no columns.
FeatureSchema schema_for(const RunConfig& cfg, const fs::path& data) {
  if (!cfg.schema.columns.empty()) return cfg.schema;
  std::ifstream in(data);
  std::string header;
  if (!in || !std::getline(in, header)) throw std::runtime_error("csv: missing header in '" + data.string() + "'");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  FeatureSchema schema = cfg.schema;
  std::stringstream ss(header);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name != schema.time_column && name != schema.event_column) {
      schema.columns.push_back({name, ColumnKind::continuous});
    }
  }
  return schema;
}

std::array<RawDataset, 3> load_splits(const RunConfig& cfg) {
  const fs::path data = cfg.paths.data_or_default();
  require_file(data, "data file");
  const RawDataset raw = load_csv(data, schema_for(cfg, data));
  return stratified_split(raw, cfg.split);
}

Checkpoint read_checkpoint(const RunConfig& cfg, const Options& opt) {
  const fs::path path = cfg.paths.checkpoint_or_default();
  require_file(path, "checkpoint");
  Checkpoint ckpt = [&] {
    try {
      return load_checkpoint(path);
    } catch (const std::exception& e) {
      throw CliError("checkpoint", e.what(), exit_runtime);
    }
  }();
  const ModelKind kind = std::holds_alternative<SfmModel>(ckpt.model) ? ModelKind::sfm : ModelKind::lognormal;
  if (opt.model && kind != cfg.model) {
    throw ConfigError("--model " + to_string(cfg.model) + " does not match checkpoint kind " + to_string(kind));
  }
  if (!ckpt.preprocessor) throw CliError("checkpoint", "checkpoint has no preprocessor", exit_runtime);
  return ckpt;
}

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const SurvDataset& test, const RunConfig& cfg) {
  return std::visit([&](const auto& model) { return evaluate(model, test, cfg.draws, cfg.seed); }, ckpt.model);
}

void write_curve(std::ostream& f, const std::string& name, const SurvivalCurve& c) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    f << name << ',' << c.grid[i] << ',' << c.survival[i] << ',';
    if (c.has_bands()) f << c.lower[i] << ',' << c.upper[i];
    else f << ',';
    f << '\n';
  }
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const SyntheticData syn = generate(cfg.simulate.n, cfg.simulate.oracle);
  const fs::path data = cfg.paths.data_or_default();
  if (data.has_parent_path()) fs::create_directories(data.parent_path());
  write_csv(data, syn.data);

  nlohmann::ordered_json j;
  j["family"] = to_string(syn.spec.family);
  j["shape"] = syn.spec.shape;
  j["weights"] = syn.spec.weights;
  j["censoring"] = to_string(syn.spec.censoring);
  j["censoring_fraction_target"] = syn.spec.censoring_fraction;
  j["censoring_fraction_realized"] = 1.0 - syn.data.event_fraction();
  j["censoring_scale"] = syn.spec.censoring_scale;
  j["seed"] = syn.spec.seed;
  j["n"] = syn.data.size();
  j["oracle_c_index"] = oracle_cindex(syn.spec, syn.data);
  const fs::path sidecar = cfg.paths.out / "oracle.json";
  open_output(sidecar) << j.dump(2) << '\n';
  out << "wrote " << data.string() << " and " << sidecar.string() << '\n';
  return exit_ok;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto parts = load_splits(cfg);
  const Preprocessor pre = Preprocessor::fit(parts[0]);
  for (const auto& w : pre.encode.warnings) err << "warning: " << w << '\n';
  const SurvDataset tr = pre.apply(parts[0]);
  const SurvDataset va = pre.apply(parts[1]);

  TrainHistory history;
  std::optional<Checkpoint> ckpt;
  if (cfg.model == ModelKind::sfm) {
    auto res = train(SfmModel(cfg.sfm, tr.width(), cfg.seed), tr, va, cfg.loss, cfg.train);
    history = res.history;
    ckpt = Checkpoint{std::move(res.model), pre};
  } else {
    auto res = train(LognormalModel(cfg.sfm, tr.width(), cfg.seed), tr, va, cfg.train);
    history = res.history;
    ckpt = Checkpoint{std::move(res.model), pre};
  }
  const fs::path ckpt_path = cfg.paths.checkpoint_or_default();
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  save_checkpoint(ckpt_path, *ckpt);

  const fs::path hist_path = cfg.paths.out / "history.csv";
  auto f = open_output(hist_path);
  f << "epoch,train_loss,valid_loss\n";
  for (const auto& e : history.epochs) f << e.epoch << ',' << e.train_loss << ',' << e.valid_loss << '\n';

  out << "trained " << to_string(cfg.model) << ": epochs=" << history.epochs.size()
      << " best_epoch=" << history.best_epoch << " best_valid=" << history.best_valid << '\n'
      << "wrote " << ckpt_path.string() << " and " << hist_path.string() << '\n';
  return exit_ok;
}

int cmd_evaluate(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(cfg, opt);
  const auto parts = load_splits(cfg);
  const EvalReport report = evaluate_checkpoint(ckpt, ckpt.preprocessor->apply(parts[2]), cfg);
  const fs::path path = cfg.paths.out / "report.json";
  open_output(path) << to_json_string(report) << '\n';
  out << "c_index=" << report.c_index << " calibration_slope=" << report.calibration_slope
      << " mean_cov=" << report.mean_cov << '\n'
      << "wrote " << path.string() << '\n';
  return exit_ok;
}

int cmd_curves(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  SurvivalCurve km_curve, dkm_curve;
  const bool with_model = cfg.paths.checkpoint.has_value();
  if (with_model) {
    const Checkpoint ckpt = read_checkpoint(cfg, opt);
    const auto parts = load_splits(cfg);
    EvalReport report = evaluate_checkpoint(ckpt, ckpt.preprocessor->apply(parts[2]), cfg);
    km_curve = std::move(report.km_curve);
    dkm_curve = std::move(report.dkm_curve);
  } else {
    const fs::path data = cfg.paths.data_or_default();
    require_file(data, "data file");
    const RawDataset raw = load_csv(data, schema_for(cfg, data));
    km_curve = greenwood_bands(km(raw.t, raw.y), 0.05);
  }
  const fs::path path = cfg.paths.out / "curves.csv";
  {
    auto f = open_output(path);
    f << "curve,time,survival,lower,upper\n";
    write_curve(f, "km", km_curve);
    if (with_model) write_curve(f, "dkm", dkm_curve);
  }
  out << "wrote " << path.string() << '\n';
  if (opt.svg) {
    std::vector<LabeledCurve> curves{{"Kaplan-Meier", &km_curve}};
    if (with_model) curves.push_back({"model DKM", &dkm_curve});
    const fs::path svg = cfg.paths.out / "curves.svg";
    open_output(svg) << survival_svg(curves);
    out << "wrote " << svg.string() << '\n';
  }
  return exit_ok;
}

int cmd_calibration(const RunConfig& cfg, const Options& opt, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(cfg, opt);
  const auto parts = load_splits(cfg);
  const EvalReport report = evaluate_checkpoint(ckpt, ckpt.preprocessor->apply(parts[2]), cfg);
  const fs::path path = cfg.paths.out / "calibration.csv";
  {
    auto f = open_output(path);
    f << "time,observed,predicted\n";
    for (std::size_t i = 0; i < report.calibration_points.size(); ++i) {
      const auto& p = report.calibration_points[i];
      f << report.km_curve.grid[i] << ',' << p.observed << ',' << p.predicted << '\n';
    }
  }
  nlohmann::ordered_json j;
  j["slope"] = report.calibration_slope;
  j["intercept"] = report.calibration_intercept;
  const fs::path summary = cfg.paths.out / "calibration.json";
  open_output(summary) << j.dump(2) << '\n';
  out << "calibration_slope=" << report.calibration_slope << '\n'
      << "wrote " << path.string() << " and " << summary.string() << '\n';
  if (opt.svg) {
    const fs::path svg = cfg.paths.out / "calibration.svg";
    open_output(svg) << calibration_svg(report.calibration_points, report.calibration_slope);
    out << "wrote " << svg.string() << '\n';
  }
  return exit_ok;
}

int fail(std::ostream& err, const std::string& category, const std::string& msg, int code) {
  std::string line = msg;
  std::replace(line.begin(), line.end(), '\n', ' ');
  err << "error[" << category << "]: " << line << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Survival model training and evaluation", "sfm"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub, bool svg) {
    sub->add_option("--config", opt.config, "YAML run configuration")->required();
    sub->add_option("--seed", opt.seed, "Seed for every random stream");
    sub->add_option("--model", opt.model, "Model kind")->check(CLI::IsMember({"sfm", "lognormal"}));
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--data", opt.data, "Input CSV");
    sub->add_option("--checkpoint", opt.checkpoint, "Checkpoint path");
    if (svg) sub->add_flag("--svg", opt.svg, "Also write an SVG plot");
  };
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic dataset with a known oracle");
  auto* train_cmd = app.add_subcommand("train", "Fit a model and write a checkpoint");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  auto* curves = app.add_subcommand("curves", "Export KM (and model DKM) survival curves");
  auto* calibration = app.add_subcommand("calibration", "Export the calibration curve and slope");
  add_common(simulate, false);
  add_common(train_cmd, false);
  add_common(evaluate_cmd, false);
  add_common(curves, true);
  add_common(calibration, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", e.what(), exit_usage);
  }

  try {
    const RunConfig cfg = resolve_config(opt);
    if (simulate->parsed()) return cmd_simulate(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, opt, out);
    if (curves->parsed()) return cmd_curves(cfg, opt, out);
    return cmd_calibration(cfg, opt, out);
  } catch (const CliError& e) {
    return fail(err, e.category, e.what(), e.exit_code);
  } catch (const ConfigError& e) {
    return fail(err, "config", e.what(), exit_usage);
  } catch (const SchemaError& e) {
    return fail(err, "config", e.what(), exit_usage);
  } catch (const RowError& e) {
    return fail(err, "data", e.what(), exit_runtime);
  } catch (const TrainingDiverged& e) {
    return fail(err, "training", e.what(), exit_runtime);
  } catch (const std::exception& e) {
    return fail(err, "runtime", e.what(), exit_runtime);
  }
}

}  // namespace sfm
