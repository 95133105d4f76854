#include "sfm/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sfm {

namespace {

using json = nlohmann::ordered_json;

json tensor_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix tensor_from(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

void assign(Matrix& dst, const json& j, const char* what) {
  Matrix m = tensor_from(j);
  if (!m.same_shape(dst)) {
    throw std::runtime_error(std::string("checkpoint: tensor '") + what + "' has shape " +
                             m.shape_string() + ", expected " + dst.shape_string());
  }
  dst = std::move(m);
}

json config_json(const SfmConfig& c) {
  return json{{"hidden_units", c.hidden_units}, {"layers", c.layers}, {"dropout_p", c.dropout_p},
              {"noise_dim", c.noise_dim}, {"noise_kind", to_string(c.noise_kind)},
              {"batchnorm", c.batchnorm}};
}

SfmConfig config_from(const json& j) {
  SfmConfig c;
  c.hidden_units = j.at("hidden_units").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.noise_dim = j.at("noise_dim").get<std::size_t>();
  c.noise_kind = parse_noise_kind(j.at("noise_kind").get<std::string>());
  c.batchnorm = j.at("batchnorm").get<bool>();
  return c;
}

json hidden_json(const std::vector<HiddenLayer>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    arr.push_back(json{{"weight", tensor_json(l.weight.value)},
                       {"bias", tensor_json(l.bias.value)},
                       {"gamma", tensor_json(l.gamma.value)},
                       {"beta", tensor_json(l.beta.value)},
                       {"running_mean", tensor_json(l.bn.running_mean)},
                       {"running_var", tensor_json(l.bn.running_var)},
                       {"momentum", l.bn.momentum},
                       {"eps", l.bn.eps}});
  }
  return arr;
}

void hidden_from(std::vector<HiddenLayer>& layers, const json& arr) {
  if (arr.size() != layers.size()) throw std::runtime_error("checkpoint: hidden layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& j = arr[i];
    HiddenLayer& l = layers[i];
    assign(l.weight.value, j.at("weight"), "weight");
    assign(l.bias.value, j.at("bias"), "bias");
    assign(l.gamma.value, j.at("gamma"), "gamma");
    assign(l.beta.value, j.at("beta"), "beta");
    assign(l.bn.running_mean, j.at("running_mean"), "running_mean");
    assign(l.bn.running_var, j.at("running_var"), "running_var");
    l.bn.momentum = j.at("momentum").get<double>();
    l.bn.eps = j.at("eps").get<double>();
    for (ad::Parameter* p : {&l.weight, &l.bias, &l.gamma, &l.beta}) p->zero_grad();
  }
}

json preprocessor_json(const Preprocessor& p) {
  return json{{"medians", p.impute.medians}, {"modes", p.impute.modes}, {"means", p.encode.means},
              {"stds", p.encode.stds}, {"levels", p.encode.levels}};
}

Preprocessor preprocessor_from(const json& j) {
  Preprocessor p;
  p.impute.medians = j.at("medians").get<std::map<std::string, double>>();
  p.impute.modes = j.at("modes").get<std::map<std::string, std::string>>();
  p.encode.means = j.at("means").get<std::map<std::string, double>>();
  p.encode.stds = j.at("stds").get<std::map<std::string, double>>();
  p.encode.levels = j.at("levels").get<std::map<std::string, std::vector<std::string>>>();
  return p;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json j;
  j["format"] = "sfm-checkpoint";
  j["version"] = 1;
  if (const auto* m = std::get_if<SfmModel>(&ckpt.model)) {
    j["kind"] = "sfm";
    j["seed"] = m->seed();
    j["input_dim"] = m->input_dim();
    j["config"] = config_json(m->config());
    j["hidden"] = hidden_json(m->hidden());
    j["heads"] = json{{"out_weight", tensor_json(m->out_weight().value)},
                      {"out_bias", tensor_json(m->out_bias().value)}};
  } else {
    const auto& ln = std::get<LognormalModel>(ckpt.model);
    j["kind"] = "lognormal";
    j["seed"] = ln.seed();
    j["input_dim"] = ln.input_dim();
    j["config"] = config_json(ln.config());
    j["hidden"] = hidden_json(ln.hidden());
    j["heads"] = json{{"mu_weight", tensor_json(ln.mu_weight().value)},
                      {"mu_bias", tensor_json(ln.mu_bias().value)},
                      {"sigma_weight", tensor_json(ln.sigma_weight().value)},
                      {"sigma_bias", tensor_json(ln.sigma_bias().value)}};
  }
  j["preprocessor"] = ckpt.preprocessor ? preprocessor_json(*ckpt.preprocessor) : json(nullptr);
  return j.dump(1);
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "sfm-checkpoint") throw std::runtime_error("checkpoint: unknown format");
    if (j.at("version").get<int>() != 1) throw std::runtime_error("checkpoint: unsupported version");
    const std::string kind = j.at("kind").get<std::string>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto input_dim = j.at("input_dim").get<std::size_t>();
    const SfmConfig config = config_from(j.at("config"));
    const json& heads = j.at("heads");
    std::optional<Preprocessor> pre;
    if (!j.at("preprocessor").is_null()) pre = preprocessor_from(j.at("preprocessor"));
    if (kind == "sfm") {
      SfmModel m(config, input_dim, seed);
      hidden_from(m.hidden(), j.at("hidden"));
      assign(m.out_weight().value, heads.at("out_weight"), "out_weight");
      assign(m.out_bias().value, heads.at("out_bias"), "out_bias");
      return Checkpoint{std::move(m), std::move(pre)};
    }
    if (kind == "lognormal") {
      LognormalModel m(config, input_dim, seed);
      hidden_from(m.hidden(), j.at("hidden"));
      assign(m.mu_weight().value, heads.at("mu_weight"), "mu_weight");
      assign(m.mu_bias().value, heads.at("mu_bias"), "mu_bias");
      assign(m.sigma_weight().value, heads.at("sigma_weight"), "sigma_weight");
      assign(m.sigma_bias().value, heads.at("sigma_bias"), "sigma_bias");
      return Checkpoint{std::move(m), std::move(pre)};
    }
    throw std::runtime_error("checkpoint: unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_string(ckpt) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace sfm
