#ifndef NEURAL_LINUCB_NETWORK_HPP_
#define NEURAL_LINUCB_NETWORK_HPP_

// Bias-free ReLU feature network
//
//   phi(x; w) = sqrt(m) * relu(W_L relu(W_{L-1} ... relu(W_1 x)))
//   f(x; theta, w) = theta^T phi(x; w)
//
// with W_1 (m x d), W_2..W_{L-1} (m x m), W_L (d x m). The flattened hidden
// weight vector w stacks vec(W_1), ..., vec(W_L) where vec() is column-major,
// so p = (L - 2) m^2 + 2 m d. The ReLU derivative at exactly zero is taken
// as 0.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace nlucb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct NetworkShape {
  int input_dim = 0;  // d
  int width = 0;      // m
  int depth = 0;      // L

  void Validate() const {
    if (input_dim <= 0 || input_dim % 2 != 0) {
      throw std::invalid_argument("network input_dim must be even and positive, got " +
                                  std::to_string(input_dim));
    }
    if (width <= 0 || width % 2 != 0) {
      throw std::invalid_argument("network width must be even and positive, got " +
                                  std::to_string(width));
    }
    if (width < input_dim) {
      throw std::invalid_argument("network width " + std::to_string(width) +
                                  " is smaller than input_dim " + std::to_string(input_dim));
    }
    if (depth < 2) {
      throw std::invalid_argument("network depth must be >= 2, got " + std::to_string(depth));
    }
  }

  int LayerRows(int layer) const { return layer == depth - 1 ? input_dim : width; }
  int LayerCols(int layer) const { return layer == 0 ? input_dim : width; }

  // p, the number of hidden weights.
  std::int64_t ParamCount() const {
    return static_cast<std::int64_t>(depth - 2) * width * width +
           2LL * width * input_dim;
  }

  // Offset of vec(W_{layer+1}) inside the flattened weight vector.
  std::int64_t LayerOffset(int layer) const {
    std::int64_t offset = 0;
    for (int l = 0; l < layer; ++l) offset += std::int64_t{LayerRows(l)} * LayerCols(l);
    return offset;
  }

  bool operator==(const NetworkShape&) const = default;
};

enum class InitScheme {
  // Block-diagonal [[W,0],[0,W]] hidden layers and [V,-V] last layer.
  kSymmetric,
  // Every hidden entry i.i.d. N(0, 2/m).
  kGaussian,
};

struct NetworkParams {
  NetworkShape shape;
  std::vector<Matrix> hidden;  // W_1 .. W_L
  Vector theta;                // output weight, length d

  bool operator==(const NetworkParams& other) const {
    if (!(shape == other.shape) || hidden.size() != other.hidden.size()) return false;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      if (hidden[l].rows() != other.hidden[l].rows() ||
          hidden[l].cols() != other.hidden[l].cols() || hidden[l] != other.hidden[l]) {
        return false;
      }
    }
    return theta.size() == other.theta.size() && theta == other.theta;
  }
};

namespace internal {

inline void FillNormal(Matrix& m, double variance, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  }
}

inline void CheckInput(const NetworkParams& params, const Vector& x) {
  if (x.size() != params.shape.input_dim) {
    throw std::invalid_argument("dimension mismatch: input has " + std::to_string(x.size()) +
                                " entries, network expects " +
                                std::to_string(params.shape.input_dim));
  }
}

inline double Relu(double z) { return z > 0.0 ? z : 0.0; }
inline double ReluDerivative(double z) { return z > 0.0 ? 1.0 : 0.0; }

// Preactivations z_l and activations h_l (h_0 = input) for a batch of
// column inputs.
struct ForwardCache {
  std::vector<Matrix> pre;   // z_1 .. z_L
  std::vector<Matrix> post;  // h_0 .. h_L (h_L without the sqrt(m) factor)
};

inline ForwardCache Forward(const NetworkParams& params, const Matrix& inputs) {
  ForwardCache cache;
  cache.post.reserve(params.hidden.size() + 1);
  cache.pre.reserve(params.hidden.size());
  cache.post.push_back(inputs);
  for (const Matrix& w : params.hidden) {
    cache.pre.push_back(w * cache.post.back());
    cache.post.push_back(cache.pre.back().unaryExpr(&Relu));
  }
  return cache;
}

}  // namespace internal

inline NetworkParams InitParams(const NetworkShape& shape, std::uint64_t seed,
                                InitScheme scheme = InitScheme::kSymmetric) {
  shape.Validate();
  const int d = shape.input_dim;
  const int m = shape.width;
  const int depth = shape.depth;
  std::mt19937_64 rng(seed);
  NetworkParams params;
  params.shape = shape;
  params.hidden.reserve(depth);

  if (scheme == InitScheme::kSymmetric) {
    for (int l = 0; l < depth - 1; ++l) {
      const int cols = shape.LayerCols(l);
      Matrix block(m / 2, cols / 2);
      internal::FillNormal(block, 4.0 / m, rng);
      Matrix w = Matrix::Zero(m, cols);
      w.topLeftCorner(m / 2, cols / 2) = block;
      w.bottomRightCorner(m / 2, cols / 2) = block;
      params.hidden.push_back(std::move(w));
    }
    Matrix v(d, m / 2);
    internal::FillNormal(v, 2.0 / m, rng);
    Matrix last(d, m);
    last.leftCols(m / 2) = v;
    last.rightCols(m / 2) = -v;
    params.hidden.push_back(std::move(last));
  } else {
    for (int l = 0; l < depth; ++l) {
      Matrix w(shape.LayerRows(l), shape.LayerCols(l));
      internal::FillNormal(w, 2.0 / m, rng);
      params.hidden.push_back(std::move(w));
    }
  }

  params.theta.resize(d);
  std::normal_distribution<double> theta_dist(0.0, std::sqrt(1.0 / d));
  for (int i = 0; i < d; ++i) params.theta(i) = theta_dist(rng);
  return params;
}

inline Vector ForwardPhi(const NetworkParams& params, const Vector& x) {
  internal::CheckInput(params, x);
  Vector h = x;
  for (const Matrix& w : params.hidden) h = (w * h).unaryExpr(&internal::Relu);
  return std::sqrt(static_cast<double>(params.shape.width)) * h;
}

// phi for every column of `inputs` at once.
inline Matrix ForwardPhiBatch(const NetworkParams& params, const Matrix& inputs) {
  if (inputs.rows() != params.shape.input_dim) {
    throw std::invalid_argument("dimension mismatch: batch rows " +
                                std::to_string(inputs.rows()) + " != input_dim " +
                                std::to_string(params.shape.input_dim));
  }
  Matrix h = inputs;
  for (const Matrix& w : params.hidden) h = (w * h).unaryExpr(&internal::Relu);
  return std::sqrt(static_cast<double>(params.shape.width)) * h;
}

inline double ForwardF(const NetworkParams& params, const Vector& x) {
  return params.theta.dot(ForwardPhi(params, x));
}

// d x p Jacobian of phi with respect to the flattened hidden weights.
inline Matrix GradPhi(const NetworkParams& params, const Vector& x) {
  internal::CheckInput(params, x);
  const NetworkShape& shape = params.shape;
  const int d = shape.input_dim;
  const double scale = std::sqrt(static_cast<double>(shape.width));
  const internal::ForwardCache cache = internal::Forward(params, x);

  Matrix jacobian = Matrix::Zero(d, shape.ParamCount());
  // Column j of `delta` is d phi_j / d z_l for the current layer l.
  Matrix delta = Matrix::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    delta(j, j) = scale * internal::ReluDerivative(cache.pre.back()(j, 0));
  }
  for (int l = shape.depth - 1; l >= 0; --l) {
    const Vector& input = cache.post[l].col(0);
    const std::int64_t offset = shape.LayerOffset(l);
    const Eigen::Index rows = delta.rows();
    for (Eigen::Index c = 0; c < input.size(); ++c) {
      if (input(c) == 0.0) continue;
      // vec() is column-major: entry (r, c) lives at offset + c * rows + r.
      jacobian.middleCols(offset + c * rows, rows) = input(c) * delta.transpose();
    }
    if (l > 0) {
      delta = params.hidden[l].transpose() * delta;
      const Matrix& z = cache.pre[l - 1];
      for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        if (internal::ReluDerivative(z(r, 0)) == 0.0) delta.row(r).setZero();
      }
    }
  }
  return jacobian;
}

// Gradient of f with respect to beta = (theta, w): (phi, theta^T g), length d + p.
inline Vector GradFAll(const NetworkParams& params, const Vector& x) {
  internal::CheckInput(params, x);
  const NetworkShape& shape = params.shape;
  const int d = shape.input_dim;
  const double scale = std::sqrt(static_cast<double>(shape.width));
  const internal::ForwardCache cache = internal::Forward(params, x);

  Vector grad(d + shape.ParamCount());
  grad.head(d) = scale * cache.post.back().col(0);

  Vector delta = scale * params.theta.cwiseProduct(
                             cache.pre.back().col(0).unaryExpr(&internal::ReluDerivative));
  for (int l = shape.depth - 1; l >= 0; --l) {
    const Vector& input = cache.post[l].col(0);
    const std::int64_t offset = d + shape.LayerOffset(l);
    const Eigen::Index rows = delta.size();
    for (Eigen::Index c = 0; c < input.size(); ++c) {
      grad.segment(offset + c * rows, rows) = input(c) * delta;
    }
    if (l > 0) {
      delta = (params.hidden[l].transpose() * delta)
                  .cwiseProduct(cache.pre[l - 1].col(0).unaryExpr(&internal::ReluDerivative));
    }
  }
  return grad;
}

inline Vector FlattenHidden(const NetworkParams& params) {
  Vector flat(params.shape.ParamCount());
  std::int64_t offset = 0;
  for (const Matrix& w : params.hidden) {
    flat.segment(offset, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
    offset += w.size();
  }
  return flat;
}

inline void AssignHidden(NetworkParams& params, const Vector& flat) {
  if (flat.size() != params.shape.ParamCount()) {
    throw std::invalid_argument("flattened weight vector has wrong length");
  }
  std::int64_t offset = 0;
  for (Matrix& w : params.hidden) {
    w = Eigen::Map<const Matrix>(flat.data() + offset, w.rows(), w.cols());
    offset += w.size();
  }
}

// ---------------------------------------------------------------------------
// Gradient-descent retraining.

enum class HistoryMode { kFullHistory, kEpochOnly };

struct TrainConfig {
  double step_size = 1e-5;
  int max_iterations = 1000;
  double early_stop = 1e-6;
  HistoryMode history = HistoryMode::kFullHistory;
  // Start each epoch from the current weights instead of w0.
  bool warm_start = false;
  // Also train the output weight theta (loss on f with params.theta); the
  // per-sample theta labels are then ignored.
  bool train_output = false;

  void Validate() const {
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
    if (max_iterations > 0 && !(step_size > 0.0)) {
      throw std::invalid_argument("step_size must be positive when max_iterations > 0");
    }
    if (!(early_stop >= 0.0)) throw std::invalid_argument("early_stop must be >= 0");
  }
};

struct TrainSample {
  Vector x;
  double reward = 0.0;
  Vector theta;
};

struct TrainResult {
  NetworkParams params;
  // Loss of every visited iterate, starting with the initial point.
  std::vector<double> loss;
  int steps = 0;
  bool stopped_early = false;
};

// Full-batch gradient descent on L(w) = sum_i (theta_i^T phi(x_i; w) - r_i)^2.
inline TrainResult TrainEpoch(const NetworkParams& start, std::span<const TrainSample> data,
                              const TrainConfig& cfg) {
  cfg.Validate();
  TrainResult result{start, {}, 0, false};
  if (cfg.max_iterations == 0) return result;
  if (data.empty()) throw std::invalid_argument("TrainEpoch: empty data with max_iterations > 0");

  const NetworkShape& shape = start.shape;
  const int d = shape.input_dim;
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const double scale = std::sqrt(static_cast<double>(shape.width));

  Matrix inputs(d, n);
  Matrix labels(d, n);
  Vector rewards(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrainSample& s = data[i];
    if (s.x.size() != d) throw std::invalid_argument("TrainEpoch: sample input has wrong dimension");
    inputs.col(i) = s.x;
    rewards(i) = s.reward;
    if (!cfg.train_output) {
      if (s.theta.size() != d) throw std::invalid_argument("TrainEpoch: sample theta has wrong dimension");
      labels.col(i) = s.theta;
    }
  }

  NetworkParams& params = result.params;
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (int s = 0;; ++s) {
    if (cfg.train_output) labels = params.theta.replicate(1, n);
    const internal::ForwardCache cache = internal::Forward(params, inputs);
    const Matrix phi = scale * cache.post.back();
    const Vector residual = labels.cwiseProduct(phi).colwise().sum().transpose() - rewards;
    const double loss = residual.squaredNorm();
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "TrainEpoch: non-finite loss at iteration " << s << " (step size " << cfg.step_size
          << ", " << n << " samples)";
      throw std::runtime_error(msg.str());
    }
    result.loss.push_back(loss);
    if (s > 0 && std::abs(loss - previous) < cfg.early_stop) {
      result.stopped_early = true;
      break;
    }
    if (s == cfg.max_iterations) break;
    previous = loss;

    // dL/dz_L = 2 r_i theta_i sqrt(m) relu'(z_L).
    Matrix delta = (2.0 * scale) * (labels.array().rowwise() * residual.transpose().array()).matrix();
    delta = delta.cwiseProduct(cache.pre.back().unaryExpr(&internal::ReluDerivative));
    std::vector<Matrix> grads(shape.depth);
    for (int l = shape.depth - 1; l >= 0; --l) {
      grads[l] = delta * cache.post[l].transpose();
      if (l > 0) {
        delta = (params.hidden[l].transpose() * delta)
                    .cwiseProduct(cache.pre[l - 1].unaryExpr(&internal::ReluDerivative));
      }
    }
    Vector theta_grad;
    if (cfg.train_output) theta_grad = 2.0 * phi * residual;

    for (int l = 0; l < shape.depth; ++l) {
      if (!grads[l].allFinite()) {
        throw std::runtime_error("TrainEpoch: non-finite gradient in layer " +
                                 std::to_string(l + 1) + " at iteration " + std::to_string(s));
      }
      params.hidden[l] -= cfg.step_size * grads[l];
    }
    if (cfg.train_output) params.theta -= cfg.step_size * theta_grad;
    ++result.steps;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Weight snapshots. JSON document, version 1:
//   {"format": "neural-linucb-weights", "version": 1,
//    "input_dim": d, "width": m, "depth": L,
//    "layers": [{"rows": r, "cols": c, "data": [column-major values]}, ...],
//    "theta": [...]}

inline constexpr int kWeightSnapshotVersion = 1;

inline nlohmann::json ParamsToJson(const NetworkParams& params) {
  nlohmann::json doc;
  doc["format"] = "neural-linucb-weights";
  doc["version"] = kWeightSnapshotVersion;
  doc["input_dim"] = params.shape.input_dim;
  doc["width"] = params.shape.width;
  doc["depth"] = params.shape.depth;
  doc["layers"] = nlohmann::json::array();
  for (const Matrix& w : params.hidden) {
    doc["layers"].push_back({{"rows", w.rows()},
                             {"cols", w.cols()},
                             {"data", std::vector<double>(w.data(), w.data() + w.size())}});
  }
  doc["theta"] = std::vector<double>(params.theta.data(), params.theta.data() + params.theta.size());
  return doc;
}

inline NetworkParams ParamsFromJson(const nlohmann::json& doc) {
  if (doc.value("format", "") != "neural-linucb-weights") {
    throw std::runtime_error("weight snapshot: unknown format");
  }
  if (doc.value("version", 0) != kWeightSnapshotVersion) {
    throw std::runtime_error("weight snapshot: unsupported version");
  }
  NetworkParams params;
  params.shape = {doc.at("input_dim").get<int>(), doc.at("width").get<int>(),
                  doc.at("depth").get<int>()};
  params.shape.Validate();
  const auto& layers = doc.at("layers");
  if (static_cast<int>(layers.size()) != params.shape.depth) {
    throw std::runtime_error("weight snapshot: layer count does not match depth");
  }
  for (int l = 0; l < params.shape.depth; ++l) {
    const int rows = layers[l].at("rows").get<int>();
    const int cols = layers[l].at("cols").get<int>();
    const auto values = layers[l].at("data").get<std::vector<double>>();
    if (rows != params.shape.LayerRows(l) || cols != params.shape.LayerCols(l) ||
        static_cast<int>(values.size()) != rows * cols) {
      throw std::runtime_error("weight snapshot: layer " + std::to_string(l + 1) +
                               " has inconsistent dimensions");
    }
    params.hidden.push_back(Eigen::Map<const Matrix>(values.data(), rows, cols));
  }
  const auto theta = doc.at("theta").get<std::vector<double>>();
  if (static_cast<int>(theta.size()) != params.shape.input_dim) {
    throw std::runtime_error("weight snapshot: theta has wrong length");
  }
  params.theta = Eigen::Map<const Vector>(theta.data(), theta.size());
  return params;
}

inline void SaveParams(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << ParamsToJson(params).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline NetworkParams LoadParams(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return ParamsFromJson(nlohmann::json::parse(in));
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_NETWORK_HPP_
