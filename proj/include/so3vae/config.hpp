#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "so3vae/mean_maps.hpp"
#include "so3vae/so3_gauss.hpp"
#include "so3vae/wigner.hpp"

namespace so3vae {

/// Raised for malformed configs and unknown keys; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { AE, VAE };

inline constexpr const char* kNormalZyzBaseline = "normal3-zyz";

struct ExperimentConfig {
  ModelKind model = ModelKind::VAE;
  /// alg | q | s2s1 | s2s2 | normal3-zyz
  std::string head = "s2s2";
  int rep_max_degree = 3;
  int rep_multiplicity = 3;
  int hidden_width = 128;
  int hidden_layers = 2;
  double lr = 1e-3;
  int batch_size = 64;
  long steps = 20000;
  long n_train = 100000;
  long n_test = 1000;
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 1;
  std::uint64_t content_seed = 2;
  int k_max = 5;
  HaarConvention haar = HaarConvention::Normalized;
  long eval_entropy_samples = 10000;
  int importance_samples = 500;
  int n_paths = 1000;
  int path_steps = 100;
  double gamma = 10.0;
  double alpha = 90.0;
  std::string out_dir = "runs";

  bool is_baseline() const { return head == kNormalZyzBaseline; }
  HeadKind head_kind() const { return parse_head_kind(head); }
  bool variational() const { return model == ModelKind::VAE; }
  RepSpec rep_spec() const { return RepSpec::up_to(rep_max_degree, rep_multiplicity); }

  /// Width of the raw mean block produced by the MLP.
  int head_dim() const { return is_baseline() ? 3 : head_input_dim(head_kind()); }

  std::string label() const {
    return (is_baseline() ? std::string("N-3-dim") : "SO3-" + head) + (variational() ? "-vae" : "-ae");
  }

  void validate() const {
    if (!is_baseline()) {
      try {
        (void)head_kind();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    auto positive = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(std::string("config: ") + what + " must be positive");
    };
    positive(rep_max_degree >= 0 && rep_max_degree <= kMaxWignerDegree, "rep.max_degree (<= 6)");
    positive(rep_multiplicity > 0, "rep.multiplicity");
    positive(hidden_width > 0, "mlp.hidden_width");
    positive(hidden_layers > 0, "mlp.hidden_layers");
    positive(lr > 0.0, "train.lr");
    positive(batch_size > 0, "train.batch_size");
    positive(steps > 0, "train.steps");
    positive(n_train > 0, "data.n_train");
    positive(n_test > 0, "data.n_test");
    positive(k_max >= 1, "density.k_max");
    positive(eval_entropy_samples > 0, "eval.entropy_samples");
    positive(importance_samples > 0, "eval.importance_samples");
    positive(n_paths > 0, "eval.n_paths");
    positive(path_steps >= 8, "eval.path_steps (>= 8)");
    positive(gamma > 0.0, "eval.gamma");
    positive(alpha > 0.0 && alpha <= 100.0, "eval.alpha (<= 100)");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  return json{
      {"model", c.model == ModelKind::AE ? "ae" : "vae"},
      {"head", c.head},
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"rep", {{"max_degree", c.rep_max_degree}, {"multiplicity", c.rep_multiplicity}}},
      {"mlp", {{"hidden_width", c.hidden_width}, {"hidden_layers", c.hidden_layers}}},
      {"train", {{"lr", c.lr}, {"batch_size", c.batch_size}, {"steps", c.steps}}},
      {"data",
       {{"n_train", c.n_train}, {"n_test", c.n_test}, {"seed", c.data_seed}, {"content_seed", c.content_seed}}},
      {"density", {{"k_max", c.k_max}, {"haar", to_string(c.haar)}}},
      {"eval",
       {{"entropy_samples", c.eval_entropy_samples},
        {"importance_samples", c.importance_samples},
        {"n_paths", c.n_paths},
        {"path_steps", c.path_steps},
        {"gamma", c.gamma},
        {"alpha", c.alpha}}},
  };
}

namespace detail {

inline void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& prefix) {
  if (!given.is_object()) throw ConfigError("config: expected an object at '" + prefix + "'");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    if (known[it.key()].is_object()) check_keys(it.value(), known[it.key()], key);
  }
}

template <typename T>
T get(const nlohmann::json& j, const char* section, const char* key, T fallback) {
  const nlohmann::json* node = &j;
  if (section != nullptr) {
    if (!j.contains(section)) return fallback;
    node = &j[section];
  }
  if (!node->contains(key)) return fallback;
  try {
    return (*node)[key].get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + (section ? std::string(section) + "." : "") + key +
                      "': " + e.what());
  }
}

}  // namespace detail

/// Strict parse: unknown keys and ill-typed values raise ConfigError.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  const ExperimentConfig d;
  detail::check_keys(j, to_json(d), "");
  using detail::get;
  ExperimentConfig c;
  const std::string model = get<std::string>(j, nullptr, "model", "vae");
  if (model == "ae") {
    c.model = ModelKind::AE;
  } else if (model == "vae") {
    c.model = ModelKind::VAE;
  } else {
    throw ConfigError("config: model must be ae or vae");
  }
  c.head = get<std::string>(j, nullptr, "head", d.head);
  c.seed = get<std::uint64_t>(j, nullptr, "seed", d.seed);
  c.out_dir = get<std::string>(j, nullptr, "out_dir", d.out_dir);
  c.rep_max_degree = get<int>(j, "rep", "max_degree", d.rep_max_degree);
  c.rep_multiplicity = get<int>(j, "rep", "multiplicity", d.rep_multiplicity);
  c.hidden_width = get<int>(j, "mlp", "hidden_width", d.hidden_width);
  c.hidden_layers = get<int>(j, "mlp", "hidden_layers", d.hidden_layers);
  c.lr = get<double>(j, "train", "lr", d.lr);
  c.batch_size = get<int>(j, "train", "batch_size", d.batch_size);
  c.steps = get<long>(j, "train", "steps", d.steps);
  c.n_train = get<long>(j, "data", "n_train", d.n_train);
  c.n_test = get<long>(j, "data", "n_test", d.n_test);
  c.data_seed = get<std::uint64_t>(j, "data", "seed", d.data_seed);
  c.content_seed = get<std::uint64_t>(j, "data", "content_seed", d.content_seed);
  c.k_max = get<int>(j, "density", "k_max", d.k_max);
  try {
    c.haar = parse_haar_convention(get<std::string>(j, "density", "haar", to_string(d.haar)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.eval_entropy_samples = get<long>(j, "eval", "entropy_samples", d.eval_entropy_samples);
  c.importance_samples = get<int>(j, "eval", "importance_samples", d.importance_samples);
  c.n_paths = get<int>(j, "eval", "n_paths", d.n_paths);
  c.path_steps = get<int>(j, "eval", "path_steps", d.path_steps);
  c.gamma = get<double>(j, "eval", "gamma", d.gamma);
  c.alpha = get<double>(j, "eval", "alpha", d.alpha);
  c.validate();
  return c;
}

/// Applies `dotted.key=value` to a config document. The value is read as JSON
/// when it parses (numbers, booleans), otherwise as a bare string.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  const nlohmann::json known = to_json(ExperimentConfig{});
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);

  const nlohmann::json* k = &known;
  nlohmann::json* target = &doc;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!k->is_object() || !k->contains(parts[i])) throw ConfigError("unknown config key '" + key + "'");
    k = &(*k)[parts[i]];
    if (i + 1 < parts.size()) {
      if (!target->contains(parts[i])) (*target)[parts[i]] = nlohmann::json::object();
      target = &(*target)[parts[i]];
    }
  }
  if (k->is_object()) throw ConfigError("config key '" + key + "' is a section");
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded() || k->is_string()) value = raw;
  (*target)[parts.back()] = value;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return j;
}

/// FNV-1a over the canonical dump; stable across runs and platforms.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace so3vae
