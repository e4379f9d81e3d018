#ifndef NEURAL_LINUCB_CONFIG_HPP_
#define NEURAL_LINUCB_CONFIG_HPP_

// Experiment configuration.
//
// Flat key-value grammar, one entry per line:
//
//   line    := blank | comment | entry
//   comment := '#' anything
//   entry   := key '=' value        (whitespace around both is ignored)
//
// Keys are unique; unknown keys are rejected. `profile = desk|paper` selects
// the preset the remaining keys override, wherever it appears. A JSON object
// with the same keys (numbers, strings, booleans; `algorithms` may be an
// array) is accepted as an alternative encoding.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neural_linucb/environment.hpp"
#include "neural_linucb/policies.hpp"

namespace nlucb {

enum class EnvironmentKind { kSynthetic, kDataset };

struct ExperimentConfig {
  // Environment.
  EnvironmentKind environment = EnvironmentKind::kSynthetic;
  RewardKind synthetic_kind = RewardKind::kCosine;
  int synthetic_dim = 8;  // d_raw
  int arms = 4;           // K for synthetic problems
  double noise = 0.1;     // nu
  std::string dataset_name;
  std::string dataset_path;
  std::string manifest;
  bool cycle = false;

  std::vector<Algorithm> algorithms = {Algorithm::kNeuralLinUcb, Algorithm::kLinUcb,
                                       Algorithm::kNeuralUcbDiag, Algorithm::kNeuralLinear};
  long horizon = 3000;  // T
  int epoch_length = 100;
  int width = 128;
  int depth = 2;
  double lambda = 1.0;
  AlphaSchedule::Mode alpha_mode = AlphaSchedule::Mode::kFixed;
  double alpha = 0.02;
  double delta = 0.1;
  double bound = 1.0;
  double step_size = 3e-4;
  double diag_step_size = 1e-4;  // NeuralUCB-diag also trains theta
  int iterations = 200;
  double early_stop = 1e-6;
  HistoryMode history = HistoryMode::kFullHistory;
  bool warm_train = false;
  InitScheme init = InitScheme::kGaussian;
  int warm_start = 3;
  bool warm_start_updates = true;
  int repetitions = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  bool timing = true;
  int threads = 0;  // 0 = hardware concurrency

  // Reduced profile for a laptop.
  static ExperimentConfig Desk() { return ExperimentConfig{}; }

  // Settings of the published experiments.
  static ExperimentConfig Paper() {
    ExperimentConfig c;
    c.environment = EnvironmentKind::kDataset;
    c.dataset_name = "statlog";
    c.width = 2000;
    c.depth = 2;
    c.horizon = 15000;
    c.epoch_length = 100;
    c.step_size = 1e-5;
    c.diag_step_size = 1e-6;
    c.iterations = 1000;
    c.early_stop = 1e-6;
    c.lambda = 1.0;
    c.alpha = 0.02;
    c.repetitions = 10;
    c.cycle = false;
    return c;
  }
};

inline std::string_view HistoryModeName(HistoryMode mode) {
  return mode == HistoryMode::kFullHistory ? "full" : "epoch";
}

inline std::string_view InitSchemeName(InitScheme scheme) {
  return scheme == InitScheme::kGaussian ? "gaussian" : "symmetric";
}

namespace internal {

inline std::string FormatNumber(double value) {
  std::ostringstream out;
  out << std::setprecision(17) << value;
  return out.str();
}

inline bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw std::invalid_argument("config key '" + key + "': expected a boolean, got '" + value + "'");
}

inline double ParseNumber(const std::string& key, const std::string& value) {
  const auto parsed = ParseDouble(Trim(value));
  if (!parsed) throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value + "'");
  return *parsed;
}

inline long ParseInteger(const std::string& key, const std::string& value) {
  const double number = ParseNumber(key, value);
  if (number != std::floor(number)) {
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return static_cast<long>(number);
}

}  // namespace internal

// Applies one key. Throws on unknown keys or malformed values.
inline void ApplyConfigKey(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using internal::ParseBool;
  using internal::ParseInteger;
  using internal::ParseNumber;
  if (key == "env") {
    if (value == "synthetic") c.environment = EnvironmentKind::kSynthetic;
    else if (value == "dataset") c.environment = EnvironmentKind::kDataset;
    else throw std::invalid_argument("config key 'env': expected synthetic or dataset, got '" + value + "'");
  } else if (key == "synthetic_kind") {
    c.synthetic_kind = ParseRewardKind(value);
    if (c.synthetic_kind == RewardKind::kClassification) {
      throw std::invalid_argument("config key 'synthetic_kind': classification is not synthetic");
    }
  } else if (key == "synthetic_dim") {
    c.synthetic_dim = static_cast<int>(ParseInteger(key, value));
  } else if (key == "arms") {
    c.arms = static_cast<int>(ParseInteger(key, value));
  } else if (key == "noise") {
    c.noise = ParseNumber(key, value);
  } else if (key == "dataset_name") {
    c.dataset_name = value;
  } else if (key == "dataset_path") {
    c.dataset_path = value;
  } else if (key == "manifest") {
    c.manifest = value;
  } else if (key == "cycle") {
    c.cycle = ParseBool(key, value);
  } else if (key == "algorithms") {
    c.algorithms.clear();
    for (std::string_view name : internal::SplitFields(value)) {
      if (!name.empty()) c.algorithms.push_back(ParseAlgorithm(name));
    }
  } else if (key == "horizon") {
    c.horizon = ParseInteger(key, value);
  } else if (key == "epoch_length") {
    c.epoch_length = static_cast<int>(ParseInteger(key, value));
  } else if (key == "width") {
    c.width = static_cast<int>(ParseInteger(key, value));
  } else if (key == "depth") {
    c.depth = static_cast<int>(ParseInteger(key, value));
  } else if (key == "lambda") {
    c.lambda = ParseNumber(key, value);
  } else if (key == "alpha_mode") {
    if (value == "fixed") c.alpha_mode = AlphaSchedule::Mode::kFixed;
    else if (value == "theorem") c.alpha_mode = AlphaSchedule::Mode::kTheorem;
    else throw std::invalid_argument("config key 'alpha_mode': expected fixed or theorem");
  } else if (key == "alpha") {
    c.alpha = ParseNumber(key, value);
  } else if (key == "delta") {
    c.delta = ParseNumber(key, value);
  } else if (key == "bound") {
    c.bound = ParseNumber(key, value);
  } else if (key == "step_size") {
    c.step_size = ParseNumber(key, value);
  } else if (key == "diag_step_size") {
    c.diag_step_size = ParseNumber(key, value);
  } else if (key == "iterations") {
    c.iterations = static_cast<int>(ParseInteger(key, value));
  } else if (key == "early_stop") {
    c.early_stop = ParseNumber(key, value);
  } else if (key == "history") {
    if (value == "full") c.history = HistoryMode::kFullHistory;
    else if (value == "epoch") c.history = HistoryMode::kEpochOnly;
    else throw std::invalid_argument("config key 'history': expected full or epoch");
  } else if (key == "warm_train") {
    c.warm_train = ParseBool(key, value);
  } else if (key == "init") {
    if (value == "gaussian") c.init = InitScheme::kGaussian;
    else if (value == "symmetric") c.init = InitScheme::kSymmetric;
    else throw std::invalid_argument("config key 'init': expected gaussian or symmetric");
  } else if (key == "warm_start") {
    c.warm_start = static_cast<int>(ParseInteger(key, value));
  } else if (key == "warm_start_updates") {
    c.warm_start_updates = ParseBool(key, value);
  } else if (key == "repetitions") {
    c.repetitions = static_cast<int>(ParseInteger(key, value));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(ParseInteger(key, value));
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else if (key == "timing") {
    if (value == "wall") c.timing = true;
    else if (value == "off") c.timing = false;
    else throw std::invalid_argument("config key 'timing': expected wall or off");
  } else if (key == "threads") {
    c.threads = static_cast<int>(ParseInteger(key, value));
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

inline ExperimentConfig ConfigFromEntries(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::map<std::string, std::string> seen;
  std::string profile = "desk";
  for (const auto& [key, value] : entries) {
    if (!seen.emplace(key, value).second) throw std::invalid_argument("duplicate config key '" + key + "'");
    if (key == "profile") profile = value;
  }
  ExperimentConfig config;
  if (profile == "paper") config = ExperimentConfig::Paper();
  else if (profile != "desk") throw std::invalid_argument("config key 'profile': expected desk or paper");
  for (const auto& [key, value] : entries) {
    if (key != "profile") ApplyConfigKey(config, key, value);
  }
  return config;
}

inline ExperimentConfig ParseConfigText(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key(internal::Trim(trimmed.substr(0, eq)));
    const std::string value(internal::Trim(trimmed.substr(eq + 1)));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_number) + ": empty key");
    entries.emplace_back(key, value);
  }
  return ConfigFromEntries(entries);
}

inline ExperimentConfig ParseConfigJson(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("JSON config must be an object");
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number_integer()) {
      text = std::to_string(value.get<long long>());
    } else if (value.is_number()) {
      text = internal::FormatNumber(value.get<double>());
    } else if (value.is_array()) {
      for (const auto& item : value) {
        if (!item.is_string()) throw std::invalid_argument("config key '" + key + "': array items must be strings");
        if (!text.empty()) text += ',';
        text += item.get<std::string>();
      }
    } else {
      throw std::invalid_argument("config key '" + key + "': unsupported JSON value");
    }
    entries.emplace_back(key, text);
  }
  return ConfigFromEntries(entries);
}

inline ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return ParseConfigJson(nlohmann::json::parse(text));
  return ParseConfigText(text);
}

// Canonical key = value listing of every effective setting.
inline std::string CanonicalConfig(const ExperimentConfig& c) {
  std::ostringstream out;
  using internal::FormatNumber;
  std::string algorithms;
  for (Algorithm a : c.algorithms) {
    if (!algorithms.empty()) algorithms += ',';
    algorithms += AlgorithmName(a);
  }
  out << "algorithms=" << algorithms << '\n'
      << "alpha=" << FormatNumber(c.alpha) << '\n'
      << "alpha_mode=" << (c.alpha_mode == AlphaSchedule::Mode::kFixed ? "fixed" : "theorem") << '\n'
      << "arms=" << c.arms << '\n'
      << "bound=" << FormatNumber(c.bound) << '\n'
      << "cycle=" << c.cycle << '\n'
      << "dataset_name=" << c.dataset_name << '\n'
      << "dataset_path=" << c.dataset_path << '\n'
      << "delta=" << FormatNumber(c.delta) << '\n'
      << "depth=" << c.depth << '\n'
      << "diag_step_size=" << FormatNumber(c.diag_step_size) << '\n'
      << "early_stop=" << FormatNumber(c.early_stop) << '\n'
      << "env=" << (c.environment == EnvironmentKind::kSynthetic ? "synthetic" : "dataset") << '\n'
      << "epoch_length=" << c.epoch_length << '\n'
      << "history=" << HistoryModeName(c.history) << '\n'
      << "horizon=" << c.horizon << '\n'
      << "init=" << InitSchemeName(c.init) << '\n'
      << "iterations=" << c.iterations << '\n'
      << "lambda=" << FormatNumber(c.lambda) << '\n'
      << "manifest=" << c.manifest << '\n'
      << "noise=" << FormatNumber(c.noise) << '\n'
      << "repetitions=" << c.repetitions << '\n'
      << "seed=" << c.seed << '\n'
      << "step_size=" << FormatNumber(c.step_size) << '\n'
      << "synthetic_dim=" << c.synthetic_dim << '\n'
      << "synthetic_kind=" << RewardKindName(c.synthetic_kind) << '\n'
      << "timing=" << (c.timing ? "wall" : "off") << '\n'
      << "warm_start=" << c.warm_start << '\n'
      << "warm_start_updates=" << c.warm_start_updates << '\n'
      << "warm_train=" << c.warm_train << '\n'
      << "width=" << c.width << '\n';
  // output_dir and threads do not change results and are left out of the hash.
  return out.str();
}

// FNV-1a over the canonical listing, as 16 hex digits.
inline std::string ConfigHash(const ExperimentConfig& c) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : CanonicalConfig(c)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

// Dataset file to use, after manifest lookup.
inline std::string ResolveDatasetPath(const ExperimentConfig& c) {
  if (!c.dataset_path.empty()) return c.dataset_path;
  if (!c.manifest.empty()) {
    for (const ManifestEntry& entry : LoadManifest(c.manifest)) {
      if (entry.name == c.dataset_name) return entry.path;
    }
    throw std::invalid_argument("manifest " + c.manifest + " has no entry for dataset '" + c.dataset_name + "'");
  }
  throw std::invalid_argument("dataset environment needs dataset_path or manifest");
}

// Arm count of the configured problem without building the stream.
inline int ConfiguredArms(const ExperimentConfig& c) {
  if (c.environment == EnvironmentKind::kSynthetic) return c.arms;
  if (const auto known = FindKnownDataset(c.dataset_name)) return known->arm_count;
  return -1;
}

// Checks invariants and that referenced files exist.
inline void ValidateConfig(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (c.algorithms.empty()) fail("no algorithms configured");
  if (c.horizon < 1) fail("horizon must be >= 1");
  if (c.repetitions < 1) fail("repetitions must be >= 1");
  if (c.epoch_length < 1) fail("epoch_length must be >= 1");
  if (c.warm_start < 0) fail("warm_start must be >= 0");
  if (!(c.lambda > 0.0)) fail("lambda must be positive");
  if (!(c.noise >= 0.0)) fail("noise must be >= 0");
  if (c.threads < 0) fail("threads must be >= 0");
  if (c.environment == EnvironmentKind::kSynthetic) {
    if (c.synthetic_dim < 1) fail("synthetic_dim must be >= 1");
    if (c.arms < 1) fail("arms must be >= 1");
  } else {
    const std::string path = ResolveDatasetPath(c);
    if (!std::filesystem::exists(path)) fail("dataset file not found: " + path);
  }
  const int arms = ConfiguredArms(c);
  if (arms > 0 && static_cast<long>(arms) * c.warm_start > c.horizon) {
    fail("horizon " + std::to_string(c.horizon) + " is shorter than the warm start (" +
         std::to_string(arms) + " arms x " + std::to_string(c.warm_start) + " pulls)");
  }
  TrainConfig train{c.step_size, c.iterations, c.early_stop, c.history, c.warm_train, false};
  train.Validate();
  if (!(c.diag_step_size > 0.0)) fail("diag_step_size must be positive");
  bool neural = false;
  for (Algorithm a : c.algorithms) neural = neural || IsNeural(a);
  if (neural) {
    if (c.width <= 0 || c.width % 2 != 0) fail("width must be even and positive");
    if (c.depth < 2) fail("depth must be >= 2");
  }
  if (c.alpha_mode == AlphaSchedule::Mode::kTheorem) {
    if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta must lie in (0,1)");
    if (!(c.bound >= 0.0)) fail("bound must be >= 0");
  } else if (!(c.alpha >= 0.0)) {
    fail("alpha must be >= 0");
  }
}

// Output directory after the NLUCB_OUTPUT_DIR override.
inline std::string EffectiveOutputDir(const ExperimentConfig& c) {
  if (const char* env = std::getenv("NLUCB_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
  return c.output_dir;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_CONFIG_HPP_
