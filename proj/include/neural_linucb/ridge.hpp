#ifndef NEURAL_LINUCB_RIDGE_HPP_
#define NEURAL_LINUCB_RIDGE_HPP_

// Last-layer ridge regression with a maintained inverse and UCB scoring.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "neural_linucb/network.hpp"

namespace nlucb {

// A = lambda I + sum phi phi^T, b = sum r phi, theta = A^-1 b. A^-1 is kept
// current with the rank-one inverse identity and recomputed from A every
// kRefreshInterval updates.
class RidgeState {
 public:
  static constexpr int kRefreshInterval = 512;

  RidgeState() = default;

  // theta starts at `initial_theta` and only becomes A^-1 b after the first
  // update.
  RidgeState(int dim, double lambda, Vector initial_theta)
      : dim_(dim), lambda_(lambda) {
    if (dim <= 0) throw std::invalid_argument("ridge dimension must be positive");
    if (!(lambda > 0.0)) {
      throw std::invalid_argument("ridge regularizer must be positive, got " + std::to_string(lambda));
    }
    if (initial_theta.size() != dim) {
      throw std::invalid_argument("initial theta has length " + std::to_string(initial_theta.size()) +
                                  ", expected " + std::to_string(dim));
    }
    design_ = lambda * Matrix::Identity(dim, dim);
    inverse_ = (1.0 / lambda) * Matrix::Identity(dim, dim);
    moment_ = Vector::Zero(dim);
    theta_ = std::move(initial_theta);
  }

  RidgeState(int dim, double lambda) : RidgeState(dim, lambda, Vector::Zero(dim)) {}

  // Rebuilds a state from its stored fields (snapshots).
  static RidgeState FromParts(double lambda, Matrix design, Matrix inverse, Vector moment, Vector theta,
                              long update_count) {
    const auto dim = static_cast<int>(design.rows());
    if (design.cols() != dim || inverse.rows() != dim || inverse.cols() != dim || moment.size() != dim ||
        theta.size() != dim) {
      throw std::invalid_argument("ridge: inconsistent stored dimensions");
    }
    RidgeState state(dim, lambda);
    state.design_ = std::move(design);
    state.inverse_ = std::move(inverse);
    state.moment_ = std::move(moment);
    state.theta_ = std::move(theta);
    state.update_count_ = update_count;
    return state;
  }

  void Update(const Vector& phi, double reward) {
    if (phi.size() != dim_) {
      throw std::invalid_argument("ridge update: feature has length " + std::to_string(phi.size()) +
                                  ", expected " + std::to_string(dim_));
    }
    if (!phi.allFinite() || !std::isfinite(reward)) {
      throw std::invalid_argument("ridge update: non-finite feature or reward");
    }
    design_.noalias() += phi * phi.transpose();
    moment_ += reward * phi;
    ++update_count_;
    if (update_count_ % kRefreshInterval == 0) {
      RecomputeInverse();
    } else {
      const Vector projected = inverse_ * phi;
      const double denom = 1.0 + phi.dot(projected);
      inverse_.noalias() -= (projected / denom) * projected.transpose();
    }
    theta_.noalias() = inverse_ * moment_;
  }

  void RecomputeInverse() {
    inverse_ = design_.llt().solve(Matrix::Identity(dim_, dim_));
    inverse_ = 0.5 * (inverse_ + inverse_.transpose()).eval();
  }

  // phi^T A^-1 phi. Throws if the radicand comes out negative beyond
  // round-off, which means A^-1 lost positive definiteness.
  double MahalanobisSquared(const Vector& phi) const {
    if (phi.size() != dim_) throw std::invalid_argument("ridge: feature dimension mismatch");
    const double value = phi.dot(inverse_ * phi);
    if (value < 0.0) {
      const double slack = 1e-12 * phi.squaredNorm() / lambda_;
      if (value < -slack) {
        throw std::logic_error("ridge: negative exploration radicand " + std::to_string(value) +
                               "; maintained inverse is not positive definite");
      }
      return 0.0;
    }
    return value;
  }

  double Bonus(const Vector& phi) const { return std::sqrt(MahalanobisSquared(phi)); }

  double UcbScore(const Vector& phi, double alpha) const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("ucb alpha must be non-negative");
    return theta_.dot(phi) + alpha * Bonus(phi);
  }

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  const Matrix& design() const { return design_; }
  const Matrix& inverse() const { return inverse_; }
  const Vector& moment() const { return moment_; }
  const Vector& theta() const { return theta_; }
  long update_count() const { return update_count_; }

 private:
  int dim_ = 0;
  double lambda_ = 1.0;
  Matrix design_;
  Matrix inverse_;
  Vector moment_;
  Vector theta_;
  long update_count_ = 0;
};

// Exploration radius schedule.
struct AlphaSchedule {
  enum class Mode { kFixed, kTheorem };

  Mode mode = Mode::kFixed;
  double alpha = 0.02;
  // Theorem-mode constants.
  double nu = 0.1;
  int dim = 1;
  int epoch_length = 100;
  int arms = 2;
  double lambda = 1.0;
  double delta = 0.1;
  double bound = 1.0;  // M, the norm bound on theta*

  void Validate() const {
    if (mode == Mode::kFixed) {
      if (!(alpha >= 0.0)) throw std::invalid_argument("fixed alpha must be non-negative");
      return;
    }
    if (!(nu >= 0.0)) throw std::invalid_argument("alpha schedule: nu must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("alpha schedule: delta must lie in (0,1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("alpha schedule: lambda must be positive");
    if (!(bound >= 0.0)) throw std::invalid_argument("alpha schedule: M must be >= 0");
    if (dim <= 0) throw std::invalid_argument("alpha schedule: d must be positive");
    if (static_cast<long long>(epoch_length) * arms <= 1) {
      throw std::invalid_argument("alpha schedule: H*K must exceed 1 so that log(HK) > 0");
    }
  }
};

// alpha_t = nu sqrt(2 (d log(1 + t log(HK) / lambda) + log(1/delta))) + sqrt(lambda) M
// in theorem mode.
inline double AlphaAt(const AlphaSchedule& schedule, long t) {
  schedule.Validate();
  if (t < 0) throw std::invalid_argument("alpha schedule: t must be non-negative");
  if (schedule.mode == AlphaSchedule::Mode::kFixed) return schedule.alpha;
  const double log_hk = std::log(static_cast<double>(schedule.epoch_length) * schedule.arms);
  const double inner = schedule.dim * std::log1p(static_cast<double>(t) * log_hk / schedule.lambda) +
                       std::log(1.0 / schedule.delta);
  return schedule.nu * std::sqrt(2.0 * inner) + std::sqrt(schedule.lambda) * schedule.bound;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_RIDGE_HPP_
