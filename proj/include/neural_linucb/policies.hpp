#ifndef NEURAL_LINUCB_POLICIES_HPP_
#define NEURAL_LINUCB_POLICIES_HPP_

// Bandit agents sharing one contract: SelectArm, then Observe the reward,
// then MaybeRetrain at the end of the round. Rounds are numbered from 1.

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "neural_linucb/environment.hpp"
#include "neural_linucb/network.hpp"
#include "neural_linucb/ridge.hpp"

namespace nlucb {

enum class Algorithm {
  kNeuralLinUcb,
  kLinUcb,
  kNeuralUcbDiag,
  kNeuralLinear,
  kUniform,  // uniform random arm; baseline for regret comparisons
  kOracle,   // always plays a_t*; test reference
};

inline std::string_view AlgorithmName(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kNeuralLinUcb: return "neural-linucb";
    case Algorithm::kLinUcb: return "linucb";
    case Algorithm::kNeuralUcbDiag: return "neuralucb-diag";
    case Algorithm::kNeuralLinear: return "neural-linear";
    case Algorithm::kUniform: return "uniform";
    case Algorithm::kOracle: return "oracle";
  }
  return "unknown";
}

inline Algorithm ParseAlgorithm(std::string_view name) {
  for (Algorithm a : {Algorithm::kNeuralLinUcb, Algorithm::kLinUcb, Algorithm::kNeuralUcbDiag,
                      Algorithm::kNeuralLinear, Algorithm::kUniform, Algorithm::kOracle}) {
    if (AlgorithmName(a) == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

inline bool IsNeural(Algorithm algorithm) {
  return algorithm == Algorithm::kNeuralLinUcb || algorithm == Algorithm::kNeuralUcbDiag ||
         algorithm == Algorithm::kNeuralLinear;
}

struct AgentConfig {
  Algorithm algorithm = Algorithm::kNeuralLinUcb;
  int epoch_length = 100;  // H
  double lambda = 1.0;
  AlphaSchedule alpha;
  int width = 128;
  int depth = 2;
  TrainConfig train;
  InitScheme init = InitScheme::kGaussian;
  int warm_start_pulls = 3;
  // Whether warm-start rounds update the ridge state and replay buffer.
  bool warm_start_updates = true;
  std::uint64_t seed = 0;
  // Test hook: Neural-LinUCB with phi(x) = x and no training.
  bool identity_features = false;

  void Validate() const {
    if (epoch_length < 1) throw std::invalid_argument("epoch length H must be >= 1");
    if (warm_start_pulls < 0) throw std::invalid_argument("warm-start pulls must be >= 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    alpha.Validate();
    train.Validate();
  }
};


// JSON helpers for agent snapshots. Doubles round-trip exactly.
namespace internal {

inline nlohmann::json VectorToJson(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector VectorFromJson(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline nlohmann::json MatrixToJson(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix MatrixFromJson(const nlohmann::json& j) {
  const auto values = j.at("data").get<std::vector<double>>();
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(values.size()) != rows * cols) throw std::runtime_error("snapshot: bad matrix");
  return Eigen::Map<const Matrix>(values.data(), rows, cols);
}

inline std::string RngToString(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline void RngFromString(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw std::runtime_error("snapshot: bad generator state");
}

}  // namespace internal

inline nlohmann::json RidgeToJson(const RidgeState& ridge) {
  return {{"dim", ridge.dim()},
          {"lambda", ridge.lambda()},
          {"design", internal::MatrixToJson(ridge.design())},
          {"inverse", internal::MatrixToJson(ridge.inverse())},
          {"moment", internal::VectorToJson(ridge.moment())},
          {"theta", internal::VectorToJson(ridge.theta())},
          {"update_count", ridge.update_count()}};
}

inline RidgeState RidgeFromJson(const nlohmann::json& j) {
  return RidgeState::FromParts(j.at("lambda").get<double>(), internal::MatrixFromJson(j.at("design")),
                               internal::MatrixFromJson(j.at("inverse")), internal::VectorFromJson(j.at("moment")),
                               internal::VectorFromJson(j.at("theta")), j.at("update_count").get<long>());
}

class Agent {
 public:
  Agent(const AgentConfig& config, int arm_count, int feature_dim)
      : config_(config), arm_count_(arm_count), feature_dim_(feature_dim) {
    config_.Validate();
    if (arm_count < 1) throw std::invalid_argument("agent needs at least one arm");
    if (feature_dim < 1) throw std::invalid_argument("agent needs a positive feature dimension");
  }
  virtual ~Agent() = default;

  int SelectArm(const ContextSet& contexts, long t) {
    if (contexts.features.empty()) throw std::invalid_argument("select_arm: empty context set");
    if (contexts.arm_count() != arm_count_) {
      throw std::invalid_argument("select_arm: expected " + std::to_string(arm_count_) + " arms, got " +
                                  std::to_string(contexts.arm_count()));
    }
    if (InWarmStart(t)) return static_cast<int>((t - 1) % arm_count_);
    return Choose(contexts, t);
  }

  void Observe(long t, const ContextSet& contexts, int arm, double reward) {
    if (arm < 0 || arm >= contexts.arm_count()) throw std::out_of_range("observe: arm out of range");
    if (!std::isfinite(reward)) throw std::invalid_argument("observe: non-finite reward");
    if (InWarmStart(t) && !config_.warm_start_updates) return;
    Record(t, contexts, arm, reward);
  }

  // Returns true when a training epoch ran.
  virtual bool MaybeRetrain(long t) {
    if (t < 1) throw std::invalid_argument("maybe_retrain: t must be >= 1");
    return false;
  }

  bool InWarmStart(long t) const {
    return t <= static_cast<long>(config_.warm_start_pulls) * arm_count_;
  }

  // Mutable state for crash-resume; configuration is not included.
  virtual nlohmann::json SaveState() const { return nlohmann::json::object(); }
  virtual void LoadState(const nlohmann::json&) {}

  const AgentConfig& config() const { return config_; }
  int arm_count() const { return arm_count_; }
  int feature_dim() const { return feature_dim_; }

 protected:
  virtual int Choose(const ContextSet& contexts, long t) = 0;
  virtual void Record(long t, const ContextSet& contexts, int arm, double reward) = 0;

  double AlphaFor(long t) const { return AlphaAt(config_.alpha, t); }

  AgentConfig config_;
  int arm_count_;
  int feature_dim_;
};

// Shared machinery for agents that own a network and retrain it every H rounds
// from the stored initial weights.
class NeuralAgentBase : public Agent {
 public:
  NeuralAgentBase(const AgentConfig& config, int arm_count, int feature_dim)
      : Agent(config, arm_count, feature_dim) {
    if (!config_.identity_features) {
      const NetworkShape shape{feature_dim, config_.width, config_.depth};
      initial_ = InitParams(shape, config_.seed, config_.init);
      current_ = initial_;
    } else {
      std::mt19937_64 rng(config_.seed);
      std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / feature_dim));
      initial_.theta.resize(feature_dim);
      for (int i = 0; i < feature_dim; ++i) initial_.theta(i) = normal(rng);
      current_ = initial_;
    }
  }

  bool MaybeRetrain(long t) override {
    Agent::MaybeRetrain(t);
    if (config_.identity_features || t % config_.epoch_length != 0 || buffer_.empty()) return false;
    std::span<const TrainSample> data(buffer_);
    if (config_.train.history == HistoryMode::kEpochOnly) {
      const std::size_t keep = std::min<std::size_t>(buffer_.size(), config_.epoch_length);
      data = data.last(keep);
    }
    TrainConfig train = config_.train;
    train.train_output = TrainsOutputLayer();
    const NetworkParams& start = config_.train.warm_start ? current_ : initial_;
    TrainResult result = TrainEpoch(start, data, train);
    current_ = std::move(result.params);
    last_losses_ = std::move(result.loss);
    last_training_size_ = data.size();
    ++epochs_trained_;
    return true;
  }

  const NetworkParams& current_params() const { return current_; }
  const NetworkParams& initial_params() const { return initial_; }
  const std::vector<TrainSample>& buffer() const { return buffer_; }
  int epochs_trained() const { return epochs_trained_; }
  std::size_t last_training_size() const { return last_training_size_; }
  const std::vector<double>& last_losses() const { return last_losses_; }

  nlohmann::json SaveState() const override {
    nlohmann::json j;
    if (!config_.identity_features) j["params"] = ParamsToJson(current_);
    j["epochs_trained"] = epochs_trained_;
    nlohmann::json buffer = nlohmann::json::array();
    for (const TrainSample& s : buffer_) {
      buffer.push_back({{"x", internal::VectorToJson(s.x)}, {"r", s.reward}, {"theta", internal::VectorToJson(s.theta)}});
    }
    j["buffer"] = std::move(buffer);
    return j;
  }

  void LoadState(const nlohmann::json& j) override {
    if (!config_.identity_features) {
      NetworkParams params = ParamsFromJson(j.at("params"));
      if (!(params.shape == initial_.shape)) throw std::runtime_error("snapshot: network shape mismatch");
      current_ = std::move(params);
    }
    epochs_trained_ = j.at("epochs_trained").get<int>();
    buffer_.clear();
    for (const auto& s : j.at("buffer")) {
      buffer_.push_back({internal::VectorFromJson(s.at("x")), s.at("r").get<double>(),
                         internal::VectorFromJson(s.at("theta"))});
    }
    cached_round_ = -1;
  }

  Vector Features(const Vector& x) const {
    return config_.identity_features ? x : ForwardPhi(current_, x);
  }

 protected:
  virtual bool TrainsOutputLayer() const { return false; }

  // phi for every arm of the round, computed once and reused by Record.
  const std::vector<Vector>& RoundFeatures(const ContextSet& contexts) {
    if (cached_round_ != contexts.round || cached_features_.size() != contexts.features.size()) {
      cached_features_.clear();
      for (const Vector& x : contexts.features) cached_features_.push_back(Features(x));
      cached_round_ = contexts.round;
    }
    return cached_features_;
  }

  NetworkParams initial_;
  NetworkParams current_;
  std::vector<TrainSample> buffer_;

 private:
  long cached_round_ = -1;
  std::vector<Vector> cached_features_;
  int epochs_trained_ = 0;
  std::size_t last_training_size_ = 0;
  std::vector<double> last_losses_;
};

// Deep representation, shallow (last-layer) UCB exploration.
class NeuralLinUcbAgent final : public NeuralAgentBase {
 public:
  NeuralLinUcbAgent(const AgentConfig& config, int arm_count, int feature_dim)
      : NeuralAgentBase(config, arm_count, feature_dim),
        ridge_(feature_dim, config_.lambda, initial_.theta) {}

  const RidgeState& ridge() const { return ridge_; }

  nlohmann::json SaveState() const override {
    nlohmann::json j = NeuralAgentBase::SaveState();
    j["ridge"] = RidgeToJson(ridge_);
    return j;
  }

  void LoadState(const nlohmann::json& j) override {
    NeuralAgentBase::LoadState(j);
    ridge_ = RidgeFromJson(j.at("ridge"));
  }

  std::vector<double> Scores(const ContextSet& contexts, long t) {
    const double alpha = AlphaFor(t);
    std::vector<double> scores;
    for (const Vector& phi : RoundFeatures(contexts)) scores.push_back(ridge_.UcbScore(phi, alpha));
    return scores;
  }

 protected:
  int Choose(const ContextSet& contexts, long t) override {
    return ArgmaxLowestIndex(Scores(contexts, t));
  }

  void Record(long, const ContextSet& contexts, int arm, double reward) override {
    ridge_.Update(RoundFeatures(contexts)[arm], reward);
    buffer_.push_back({contexts.features[arm], reward, ridge_.theta()});
  }

 private:
  RidgeState ridge_;
};

// Posterior sampling on the last layer: theta~ ~ N(theta, alpha^2 A^-1).
class NeuralLinearAgent final : public NeuralAgentBase {
 public:
  NeuralLinearAgent(const AgentConfig& config, int arm_count, int feature_dim)
      : NeuralAgentBase(config, arm_count, feature_dim),
        ridge_(feature_dim, config_.lambda, initial_.theta),
        rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {}

  const RidgeState& ridge() const { return ridge_; }

  nlohmann::json SaveState() const override {
    nlohmann::json j = NeuralAgentBase::SaveState();
    j["ridge"] = RidgeToJson(ridge_);
    j["rng"] = internal::RngToString(rng_);
    return j;
  }

  void LoadState(const nlohmann::json& j) override {
    NeuralAgentBase::LoadState(j);
    ridge_ = RidgeFromJson(j.at("ridge"));
    internal::RngFromString(rng_, j.at("rng").get<std::string>());
  }

 protected:
  int Choose(const ContextSet& contexts, long t) override {
    const double alpha = AlphaFor(t);
    const Eigen::LLT<Matrix> chol(ridge_.inverse());
    if (chol.info() != Eigen::Success) throw std::runtime_error("neural-linear: A^-1 is not positive definite");
    std::normal_distribution<double> normal;
    Vector noise(feature_dim_);
    for (int i = 0; i < feature_dim_; ++i) noise(i) = normal(rng_);
    const Vector sample = ridge_.theta() + alpha * Vector(chol.matrixL() * noise);
    std::vector<double> scores;
    for (const Vector& phi : RoundFeatures(contexts)) scores.push_back(sample.dot(phi));
    return ArgmaxLowestIndex(scores);
  }

  void Record(long, const ContextSet& contexts, int arm, double reward) override {
    ridge_.Update(RoundFeatures(contexts)[arm], reward);
    buffer_.push_back({contexts.features[arm], reward, ridge_.theta()});
  }

 private:
  RidgeState ridge_;
  std::mt19937_64 rng_;
};

// NeuralUCB with the design matrix replaced by its diagonal z (length d + p):
// score f(x) + alpha sqrt(sum_j g_j^2 / (m z_j)), g = grad of f in (theta, w).
class NeuralUcbDiagAgent final : public NeuralAgentBase {
 public:
  NeuralUcbDiagAgent(const AgentConfig& config, int arm_count, int feature_dim)
      : NeuralAgentBase(config, arm_count, feature_dim) {
    if (config_.identity_features) throw std::invalid_argument("neuralucb-diag has no identity-feature mode");
    diag_ = Vector::Constant(feature_dim + initial_.shape.ParamCount(), config_.lambda);
  }

  const Vector& diagonal() const { return diag_; }

  nlohmann::json SaveState() const override {
    nlohmann::json j = NeuralAgentBase::SaveState();
    j["diagonal"] = internal::VectorToJson(diag_);
    return j;
  }

  void LoadState(const nlohmann::json& j) override {
    NeuralAgentBase::LoadState(j);
    diag_ = internal::VectorFromJson(j.at("diagonal"));
    grad_round_ = -1;
  }

 protected:
  bool TrainsOutputLayer() const override { return true; }

  int Choose(const ContextSet& contexts, long t) override {
    const double alpha = AlphaFor(t);
    const double m = config_.width;
    const std::vector<Vector>& grads = RoundGradients(contexts);
    std::vector<double> scores;
    for (const Vector& g : grads) {
      const double value = current_.theta.dot(g.head(feature_dim_));
      const double bonus = std::sqrt((g.array().square() / (m * diag_.array())).sum());
      scores.push_back(value + alpha * bonus);
    }
    return ArgmaxLowestIndex(scores);
  }

  void Record(long, const ContextSet& contexts, int arm, double reward) override {
    const Vector& g = RoundGradients(contexts)[arm];
    diag_.array() += g.array().square() / static_cast<double>(config_.width);
    buffer_.push_back({contexts.features[arm], reward, Vector()});
  }

 private:
  const std::vector<Vector>& RoundGradients(const ContextSet& contexts) {
    if (grad_round_ != contexts.round || grads_.size() != contexts.features.size()) {
      grads_.clear();
      for (const Vector& x : contexts.features) grads_.push_back(GradFAll(current_, x));
      grad_round_ = contexts.round;
    }
    return grads_;
  }

  Vector diag_;
  long grad_round_ = -1;
  std::vector<Vector> grads_;
};

// Disjoint-model LinUCB: one ridge estimator per arm over the context vector.
class LinUcbAgent final : public Agent {
 public:
  LinUcbAgent(const AgentConfig& config, int arm_count, int feature_dim)
      : Agent(config, arm_count, feature_dim) {
    for (int k = 0; k < arm_count; ++k) arms_.emplace_back(feature_dim, config_.lambda);
  }

  const RidgeState& arm_state(int arm) const { return arms_.at(arm); }

  nlohmann::json SaveState() const override {
    nlohmann::json arms = nlohmann::json::array();
    for (const RidgeState& r : arms_) arms.push_back(RidgeToJson(r));
    return {{"arms", arms}};
  }

  void LoadState(const nlohmann::json& j) override {
    const auto& arms = j.at("arms");
    if (static_cast<int>(arms.size()) != arm_count_) throw std::runtime_error("snapshot: arm count mismatch");
    for (int k = 0; k < arm_count_; ++k) arms_[k] = RidgeFromJson(arms[k]);
  }

 protected:
  int Choose(const ContextSet& contexts, long t) override {
    const double alpha = AlphaFor(t);
    std::vector<double> scores;
    for (int k = 0; k < arm_count_; ++k) scores.push_back(arms_[k].UcbScore(contexts.features[k], alpha));
    return ArgmaxLowestIndex(scores);
  }

  void Record(long, const ContextSet& contexts, int arm, double reward) override {
    arms_[arm].Update(contexts.features[arm], reward);
  }

 private:
  std::vector<RidgeState> arms_;
};

class UniformAgent final : public Agent {
 public:
  UniformAgent(const AgentConfig& config, int arm_count, int feature_dim)
      : Agent(config, arm_count, feature_dim), rng_(config_.seed) {}

  nlohmann::json SaveState() const override { return {{"rng", internal::RngToString(rng_)}}; }
  void LoadState(const nlohmann::json& j) override { internal::RngFromString(rng_, j.at("rng").get<std::string>()); }

 protected:
  int Choose(const ContextSet&, long) override {
    return std::uniform_int_distribution<int>(0, arm_count_ - 1)(rng_);
  }
  void Record(long, const ContextSet&, int, double) override {}

 private:
  std::mt19937_64 rng_;
};

class OracleAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  int Choose(const ContextSet& contexts, long) override { return contexts.best_arm; }
  void Record(long, const ContextSet&, int, double) override {}
};

inline std::unique_ptr<Agent> MakeAgent(const AgentConfig& config, int arm_count, int feature_dim) {
  switch (config.algorithm) {
    case Algorithm::kNeuralLinUcb: return std::make_unique<NeuralLinUcbAgent>(config, arm_count, feature_dim);
    case Algorithm::kLinUcb: return std::make_unique<LinUcbAgent>(config, arm_count, feature_dim);
    case Algorithm::kNeuralUcbDiag: return std::make_unique<NeuralUcbDiagAgent>(config, arm_count, feature_dim);
    case Algorithm::kNeuralLinear: return std::make_unique<NeuralLinearAgent>(config, arm_count, feature_dim);
    case Algorithm::kUniform: return std::make_unique<UniformAgent>(config, arm_count, feature_dim);
    case Algorithm::kOracle: return std::make_unique<OracleAgent>(config, arm_count, feature_dim);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_POLICIES_HPP_
