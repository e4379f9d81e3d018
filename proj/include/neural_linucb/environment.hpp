#ifndef NEURAL_LINUCB_ENVIRONMENT_HPP_
#define NEURAL_LINUCB_ENVIRONMENT_HPP_

// Bandit problem sources: classification datasets turned into K-armed
// bandits, synthetic reward generators, and the unit-norm duplicated-halves
// feature preprocessing.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "neural_linucb/network.hpp"

namespace nlucb {

struct RawDataset {
  std::string name;
  int attribute_count = 0;  // d_raw
  int arm_count = 0;        // K
  std::vector<Vector> attributes;
  std::vector<int> labels;  // in [0, K)

  std::size_t size() const { return labels.size(); }
};

struct KnownDataset {
  std::string_view name;
  int attribute_count;
  int arm_count;
};

// UCI sets used in the experiments.
inline constexpr KnownDataset kKnownDatasets[] = {
    {"statlog", 9, 7},
    {"magic", 11, 2},
    {"covertype", 54, 7},
};

inline std::optional<KnownDataset> FindKnownDataset(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const KnownDataset& known : kKnownDatasets) {
    if (known.name == lower) return known;
  }
  return std::nullopt;
}

namespace internal {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> SplitFields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(Trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline std::optional<double> ParseDouble(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace internal

// Numeric CSV, comma separated, integer class label in the last column. A
// first line with any non-numeric field is treated as a header.
inline RawDataset LoadDataset(const std::string& path, const std::string& name = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  RawDataset dataset;
  dataset.name = name;
  std::vector<long long> raw_labels;
  std::string line;
  int line_number = 0;
  int width = -1;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = internal::SplitFields(trimmed);
    std::vector<double> values;
    values.reserve(fields.size());
    bool numeric = true;
    for (std::string_view field : fields) {
      const auto parsed = internal::ParseDouble(field);
      if (!parsed) {
        numeric = false;
        break;
      }
      values.push_back(*parsed);
    }
    const bool header = first_content_line && !numeric;
    first_content_line = false;
    if (header) continue;
    if (!numeric) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": non-numeric field in row '" +
                               std::string(trimmed) + "'");
    }
    if (values.size() < 2) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": need at least one attribute and a label");
    }
    if (width < 0) width = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != width) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": expected " +
                               std::to_string(width) + " fields, found " + std::to_string(values.size()));
    }
    const double label = values.back();
    if (label != std::floor(label) || !std::isfinite(label)) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) + ": label is not an integer");
    }
    Vector attrs(width - 1);
    for (int j = 0; j < width - 1; ++j) {
      if (!std::isfinite(values[j])) {
        throw std::runtime_error(path + ":" + std::to_string(line_number) + ": non-finite attribute");
      }
      attrs(j) = values[j];
    }
    dataset.attributes.push_back(std::move(attrs));
    raw_labels.push_back(static_cast<long long>(label));
  }
  if (dataset.attributes.empty()) throw std::runtime_error("dataset has no rows: " + path);

  dataset.attribute_count = width - 1;
  std::set<long long> distinct(raw_labels.begin(), raw_labels.end());
  std::map<long long, int> remap;
  for (long long label : distinct) remap.emplace(label, static_cast<int>(remap.size()));
  dataset.labels.reserve(raw_labels.size());
  for (long long label : raw_labels) dataset.labels.push_back(remap.at(label));
  dataset.arm_count = static_cast<int>(distinct.size());

  if (const auto known = FindKnownDataset(name)) {
    if (dataset.attribute_count != known->attribute_count) {
      throw std::runtime_error("dataset '" + name + "' should have " +
                               std::to_string(known->attribute_count) + " attributes, file " + path +
                               " has " + std::to_string(dataset.attribute_count));
    }
    if (dataset.arm_count > known->arm_count) {
      throw std::runtime_error("dataset '" + name + "' should have " + std::to_string(known->arm_count) +
                               " classes, file " + path + " has " + std::to_string(dataset.arm_count));
    }
    dataset.arm_count = known->arm_count;
  }
  if (dataset.arm_count < 2) throw std::runtime_error("dataset needs at least two classes: " + path);
  return dataset;
}

// Manifest lines: `name,path,attributes,arms`; '#' comments allowed. Paths
// are resolved relative to the manifest's directory.
struct ManifestEntry {
  std::string name;
  std::string path;
  int attribute_count = 0;
  int arm_count = 0;
};

inline std::vector<ManifestEntry> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  const std::string base = [&] {
    const auto slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
  }();
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = internal::SplitFields(trimmed);
    if (fields.size() != 4) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": expected name,path,attributes,arms");
    }
    ManifestEntry entry;
    entry.name = std::string(fields[0]);
    entry.path = std::string(fields[1]);
    if (!entry.path.empty() && entry.path.front() != '/') entry.path = base + entry.path;
    const auto attrs = internal::ParseDouble(fields[2]);
    const auto arms = internal::ParseDouble(fields[3]);
    if (!attrs || !arms) throw std::runtime_error(path + ":" + std::to_string(line_number) + ": bad counts");
    entry.attribute_count = static_cast<int>(*attrs);
    entry.arm_count = static_cast<int>(*arms);
    if (const auto known = FindKnownDataset(entry.name)) {
      if (known->attribute_count != entry.attribute_count || known->arm_count != entry.arm_count) {
        throw std::runtime_error(path + ":" + std::to_string(line_number) + ": counts for '" + entry.name +
                                 "' disagree with the published dataset table");
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

// Normalize, then duplicate: [x, x] / sqrt(2) with x unit norm. Odd lengths
// are zero-padded by one first, so the output length is 2 * ceil_even(d_raw).
inline Vector Preprocess(const Vector& raw) {
  if (raw.size() == 0) throw std::invalid_argument("preprocess: empty vector");
  if (!raw.allFinite()) throw std::invalid_argument("preprocess: non-finite entry");
  const double norm = raw.norm();
  if (!(norm > 0.0)) throw std::invalid_argument("preprocess: zero vector has no direction");
  const Eigen::Index half = raw.size() + (raw.size() % 2);
  Vector unit = Vector::Zero(half);
  unit.head(raw.size()) = raw / norm;
  Vector out(2 * half);
  out.head(half) = unit / std::numbers::sqrt2;
  out.tail(half) = unit / std::numbers::sqrt2;
  return out;
}

inline int PreprocessedDim(int raw_dim) { return 2 * (raw_dim + raw_dim % 2); }

struct ContextSet {
  long round = 0;
  std::vector<Vector> features;         // x_{t,1..K}, preprocessed
  std::vector<double> expected_rewards;  // r(x_{t,k}), hidden from agents
  int best_arm = 0;                      // a_t*

  int arm_count() const { return static_cast<int>(features.size()); }
  double best_reward() const { return expected_rewards[best_arm]; }
};

inline int ArgmaxLowestIndex(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty set");
  int best = 0;
  for (int k = 1; k < static_cast<int>(values.size()); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

enum class RewardKind { kClassification, kLinear, kQuadratic, kCosine };

inline std::string_view RewardKindName(RewardKind kind) {
  switch (kind) {
    case RewardKind::kClassification: return "classification";
    case RewardKind::kLinear: return "linear";
    case RewardKind::kQuadratic: return "quadratic";
    case RewardKind::kCosine: return "cosine";
  }
  return "unknown";
}

inline RewardKind ParseRewardKind(std::string_view name) {
  if (name == "linear") return RewardKind::kLinear;
  if (name == "quadratic") return RewardKind::kQuadratic;
  if (name == "cosine") return RewardKind::kCosine;
  if (name == "classification") return RewardKind::kClassification;
  throw std::invalid_argument("unknown reward kind '" + std::string(name) + "'");
}

struct RewardModel {
  RewardKind kind = RewardKind::kClassification;
  Vector latent;  // theta~*, unit norm with equal halves (synthetic kinds)
  double noise = 0.0;

  // Expected reward in [0, 1] of a preprocessed context.
  double Expected(const Vector& x) const {
    const double s = std::clamp(x.dot(latent), -1.0, 1.0);
    switch (kind) {
      case RewardKind::kLinear: return 0.5 * (1.0 + s);
      case RewardKind::kQuadratic: return s * s;
      case RewardKind::kCosine: return 0.5 * (1.0 + std::cos(3.0 * std::numbers::pi * s));
      case RewardKind::kClassification: break;
    }
    throw std::logic_error("classification rewards come from labels, not a latent vector");
  }
};

// Pull-based round source.
class ContextStream {
 public:
  virtual ~ContextStream() = default;
  virtual ContextSet Next() = 0;
  virtual int arm_count() const = 0;
  virtual int feature_dim() const = 0;
  virtual double noise() const = 0;
};

// Min-max scales every attribute column to [0, 1]; constant columns map to 0.
inline void MinMaxScale(RawDataset& dataset) {
  if (dataset.attributes.empty()) return;
  const Eigen::Index dim = dataset.attribute_count;
  Vector lo = dataset.attributes.front();
  Vector hi = lo;
  for (const Vector& row : dataset.attributes) {
    lo = lo.cwiseMin(row);
    hi = hi.cwiseMax(row);
  }
  for (Vector& row : dataset.attributes) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double span = hi(j) - lo(j);
      row(j) = span > 0.0 ? (row(j) - lo(j)) / span : 0.0;
    }
  }
}

// Arm-block encoding: arm k sees a K * d_raw vector holding v in block k.
inline Vector ArmBlockEncode(const Vector& v, int arm, int arm_count) {
  Vector out = Vector::Zero(v.size() * arm_count);
  out.segment(static_cast<Eigen::Index>(arm) * v.size(), v.size()) = v;
  return out;
}

class ClassificationStream final : public ContextStream {
 public:
  // `dataset` should already be scaled; rounds visit a seeded permutation of
  // the rows, reshuffling for each further pass when `cycle` is set.
  ClassificationStream(RawDataset dataset, long horizon, std::uint64_t shuffle_seed, bool cycle,
                       double noise = 0.0)
      : dataset_(std::move(dataset)), rng_(shuffle_seed), cycle_(cycle), noise_(noise) {
    if (dataset_.size() == 0) throw std::invalid_argument("classification stream: empty dataset");
    if (!cycle_ && horizon > static_cast<long>(dataset_.size())) {
      throw std::invalid_argument("horizon " + std::to_string(horizon) + " exceeds dataset size " +
                                  std::to_string(dataset_.size()) + " (enable cycling to reuse rows)");
    }
    Reshuffle();
  }

  ContextSet Next() override {
    if (cursor_ == order_.size()) {
      if (!cycle_) throw std::out_of_range("classification stream exhausted");
      Reshuffle();
    }
    const std::size_t row = order_[cursor_++];
    const Vector& v = dataset_.attributes[row];
    const int label = dataset_.labels[row];
    ContextSet ctx;
    ctx.round = ++round_;
    ctx.features.reserve(dataset_.arm_count);
    for (int k = 0; k < dataset_.arm_count; ++k) {
      try {
        ctx.features.push_back(Preprocess(ArmBlockEncode(v, k, dataset_.arm_count)));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("row " + std::to_string(row) + ": " + e.what());
      }
      ctx.expected_rewards.push_back(k == label ? 1.0 : 0.0);
    }
    ctx.best_arm = label;
    last_row_ = row;
    return ctx;
  }

  int arm_count() const override { return dataset_.arm_count; }
  int feature_dim() const override { return PreprocessedDim(dataset_.attribute_count * dataset_.arm_count); }
  double noise() const override { return noise_; }
  std::size_t last_row() const { return last_row_; }

 private:
  void Reshuffle() {
    order_.resize(dataset_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
  }

  RawDataset dataset_;
  std::mt19937_64 rng_;
  bool cycle_;
  double noise_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  long round_ = 0;
  std::size_t last_row_ = 0;
};

inline ClassificationStream MakeRounds(RawDataset dataset, long horizon, std::uint64_t shuffle_seed,
                                       bool cycle = false, bool scale = true) {
  if (dataset.size() == 0) throw std::invalid_argument("make_rounds: empty dataset");
  if (scale) MinMaxScale(dataset);
  return ClassificationStream(std::move(dataset), horizon, shuffle_seed, cycle);
}

class SyntheticStream final : public ContextStream {
 public:
  SyntheticStream(RewardKind kind, int raw_dim, int arm_count, std::uint64_t seed, double noise)
      : raw_dim_(raw_dim), arm_count_(arm_count), rng_(seed) {
    if (kind == RewardKind::kClassification) {
      throw std::invalid_argument("synthetic stream: kind must be linear, quadratic or cosine");
    }
    if (raw_dim <= 0 || arm_count <= 0) throw std::invalid_argument("synthetic stream: bad dimensions");
    if (!(noise >= 0.0)) throw std::invalid_argument("synthetic stream: noise must be >= 0");
    model_.kind = kind;
    model_.noise = noise;
    model_.latent = Preprocess(SampleSphere());
  }

  ContextSet Next() override {
    ContextSet ctx;
    ctx.round = ++round_;
    for (int k = 0; k < arm_count_; ++k) {
      ctx.features.push_back(Preprocess(SampleSphere()));
      ctx.expected_rewards.push_back(model_.Expected(ctx.features.back()));
    }
    ctx.best_arm = ArgmaxLowestIndex(ctx.expected_rewards);
    return ctx;
  }

  int arm_count() const override { return arm_count_; }
  int feature_dim() const override { return PreprocessedDim(raw_dim_); }
  double noise() const override { return model_.noise; }
  const RewardModel& model() const { return model_; }

 private:
  Vector SampleSphere() {
    std::normal_distribution<double> normal;
    Vector v(raw_dim_);
    do {
      for (int i = 0; i < raw_dim_; ++i) v(i) = normal(rng_);
    } while (v.norm() == 0.0);
    return v / v.norm();
  }

  int raw_dim_;
  int arm_count_;
  std::mt19937_64 rng_;
  RewardModel model_;
  long round_ = 0;
};

inline SyntheticStream SynthRounds(RewardKind kind, int raw_dim, int arm_count, std::uint64_t seed,
                                   double noise = 0.1) {
  return SyntheticStream(kind, raw_dim, arm_count, seed, noise);
}

// r(x_{t,arm}) + xi with xi ~ N(0, noise^2).
inline double DrawReward(const ContextSet& ctx, int arm, double noise, std::mt19937_64& rng) {
  if (arm < 0 || arm >= ctx.arm_count()) {
    throw std::out_of_range("draw_reward: arm " + std::to_string(arm) + " out of range");
  }
  if (noise == 0.0) return ctx.expected_rewards[arm];
  std::normal_distribution<double> normal(0.0, noise);
  return ctx.expected_rewards[arm] + normal(rng);
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_ENVIRONMENT_HPP_
