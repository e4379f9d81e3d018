#ifndef NEURAL_LINUCB_NTK_HPP_
#define NEURAL_LINUCB_NTK_HPP_

// Neural tangent kernel of the bias-free ReLU network.
//
//   Sigma^0(x,y) = SigmaTilde^0(x,y) = x^T y
//   Sigma^l      = 2 E[relu(u) relu(v)]          (u,v) ~ N(0, Lambda^l)
//   SigmaTilde^l = 2 SigmaTilde^{l-1} E[relu'(u) relu'(v)] + Sigma^l
//   H(x,y)       = (SigmaTilde^L + Sigma^L) / 2
//
// where Lambda^l is the 2x2 covariance of level l-1. The Gaussian
// expectations use the arc-cosine closed forms; MonteCarloExpectations is an
// independent sampling estimate of the same quantities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neural_linucb/network.hpp"

namespace nlucb {

struct ArcCosine {
  double relu;  // 2 E[relu(u) relu(v)]
  double step;  // 2 E[relu'(u) relu'(v)]
};

// Closed forms for (u,v) ~ N(0, [[a,c],[c,b]]).
inline ArcCosine ArcCosineExpectations(double a, double b, double c) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw std::invalid_argument("arc-cosine: variances must be >= 0");
  const double scale = std::sqrt(a * b);
  if (scale == 0.0) return {0.0, 0.5};
  const double rho = std::clamp(c / scale, -1.0, 1.0);
  const double angle = std::acos(rho);
  const double pi = std::numbers::pi;
  return {scale * (std::sin(angle) + (pi - angle) * rho) / pi, (pi - angle) / pi};
}

struct KernelPair {
  // Index l = 0..L.
  std::vector<double> sigma;        // Sigma^l(x,y)
  std::vector<double> sigma_tilde;  // SigmaTilde^l(x,y)
  std::vector<double> sigma_xx;     // Sigma^l(x,x)
  std::vector<double> sigma_yy;     // Sigma^l(y,y)
  double ntk = 0.0;                 // H(x,y)
};

inline constexpr double kUnitNormTolerance = 1e-8;

inline void CheckUnit(const Vector& x, const char* what) {
  if (std::abs(x.norm() - 1.0) > kUnitNormTolerance) {
    throw std::invalid_argument(std::string("ntk: ") + what + " is not unit norm (|x| = " +
                                std::to_string(x.norm()) + ")");
  }
}

inline KernelPair NtkPair(const Vector& x, const Vector& y, int depth) {
  if (depth < 0) throw std::invalid_argument("ntk: depth must be >= 0");
  if (x.size() != y.size()) throw std::invalid_argument("ntk: dimension mismatch");
  CheckUnit(x, "x");
  CheckUnit(y, "y");
  KernelPair k;
  k.sigma.push_back(x.dot(y));
  k.sigma_tilde.push_back(k.sigma.back());
  k.sigma_xx.push_back(x.squaredNorm());
  k.sigma_yy.push_back(y.squaredNorm());
  for (int l = 1; l <= depth; ++l) {
    const double a = k.sigma_xx.back();
    const double b = k.sigma_yy.back();
    const ArcCosine cross = ArcCosineExpectations(a, b, k.sigma.back());
    k.sigma_xx.push_back(ArcCosineExpectations(a, a, a).relu);
    k.sigma_yy.push_back(ArcCosineExpectations(b, b, b).relu);
    k.sigma_tilde.push_back(k.sigma_tilde.back() * cross.step + cross.relu);
    k.sigma.push_back(cross.relu);
  }
  k.ntk = 0.5 * (k.sigma_tilde.back() + k.sigma.back());
  return k;
}

struct MonteCarloEstimate {
  double relu = 0.0;  // E[relu(u) relu(v)]
  double relu_stderr = 0.0;
  double step = 0.0;  // E[relu'(u) relu'(v)]
  double step_stderr = 0.0;
};

// Sample (u, v) = (s_a z1, (c / s_a) z1 + sqrt(b - c^2/a) z2).
inline MonteCarloEstimate MonteCarloExpectations(double a, double b, double c, long samples,
                                                 std::uint64_t seed) {
  const double slack = 1e-12 * std::max({1.0, a, b});
  if (a < 0.0 || b < 0.0 || a * b - c * c < -slack) {
    throw std::invalid_argument("monte-carlo: covariance [[a,c],[c,b]] is not positive semidefinite");
  }
  if (samples < 2) throw std::invalid_argument("monte-carlo: need at least two samples");
  const double sa = std::sqrt(a);
  const double coupling = sa > 0.0 ? c / sa : 0.0;
  const double residual = std::sqrt(std::max(0.0, b - coupling * coupling));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double relu_sum = 0.0, relu_sq = 0.0, step_sum = 0.0, step_sq = 0.0;
  for (long i = 0; i < samples; ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double u = sa * z1;
    const double v = coupling * z1 + residual * z2;
    const double relu = std::max(u, 0.0) * std::max(v, 0.0);
    const double step = (u > 0.0 && v > 0.0) ? 1.0 : 0.0;
    relu_sum += relu;
    relu_sq += relu * relu;
    step_sum += step;
    step_sq += step;
  }
  const double n = static_cast<double>(samples);
  MonteCarloEstimate est;
  est.relu = relu_sum / n;
  est.step = step_sum / n;
  est.relu_stderr = std::sqrt(std::max(0.0, relu_sq / n - est.relu * est.relu) / (n - 1.0));
  est.step_stderr = std::sqrt(std::max(0.0, step_sq / n - est.step * est.step) / (n - 1.0));
  return est;
}

struct NtkGram {
  Matrix h;
  int depth = 0;
};

inline NtkGram NtkMatrix(const std::vector<Vector>& points, int depth) {
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  NtkGram gram{Matrix::Zero(n, n), depth};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double value = NtkPair(points[i], points[j], depth).ntk;
      gram.h(i, j) = value;
      gram.h(j, i) = value;
    }
  }
  return gram;
}

struct EigenResult {
  double value = 0.0;
  Vector vector;
  int iterations = 0;
};

// Smallest eigenvalue of a symmetric matrix: power iteration for the largest
// magnitude s, then power iteration on s I - M. Stops once the eigen-residual
// |M v - rho v| falls below tolerance * max(1, s).
inline EigenResult MinEigenvalue(const Matrix& m, double tolerance = 1e-8, int max_iterations = 500000,
                                 std::uint64_t seed = 7) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("min_eigenvalue: need a square matrix");
  if (!m.allFinite()) throw std::invalid_argument("min_eigenvalue: matrix has non-finite entries");
  const Eigen::Index n = m.rows();
  if (n == 1) return {m(0, 0), Vector::Ones(1), 0};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_unit = [&] {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
    return Vector(v / v.norm());
  };

  // Spectral radius bound; the inf-norm dominates every |eigenvalue|.
  const double shift = m.cwiseAbs().rowwise().sum().maxCoeff();
  if (shift == 0.0) return {0.0, random_unit(), 0};
  const double scale = std::max(1.0, shift);

  Vector v = random_unit();
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector mv = m * v;
    const double rho = v.dot(mv);
    const double residual = (mv - rho * v).norm();
    if (residual <= tolerance * scale) return {rho, v, it};
    Vector next = shift * v - mv;
    const double norm = next.norm();
    if (norm == 0.0) return {rho, v, it};  // v already spans the bottom eigenspace of m = shift I
    v = next / norm;
  }
  throw std::runtime_error("min_eigenvalue: no convergence after " + std::to_string(max_iterations) +
                           " iterations");
}

// ---------------------------------------------------------------------------
// Empirical gradient Gram versus the analytic kernel.
//
// Points of dimension d0 <= m are zero-padded to dimension m half by half
// (inner products and equal halves preserved), the network has shape
// (d = m, m, L) with i.i.d. N(0, 2/m) hidden weights and theta ~ N(0, 1/m),
// and Psi has rows (1/sqrt(m)) d f / d(theta, w). (1/m) Psi Psi^T then
// converges to H as m grows: the theta block contributes Sigma^L and the
// hidden blocks (SigmaTilde^L - Sigma^L) / 2.

inline Vector PadHalves(const Vector& x, int dim) {
  if (x.size() % 2 != 0 || dim % 2 != 0 || x.size() > dim) {
    throw std::invalid_argument("pad: point dimension must be even and at most the target");
  }
  const Eigen::Index half = x.size() / 2;
  Vector out = Vector::Zero(dim);
  out.head(half) = x.head(half);
  out.segment(dim / 2, half) = x.tail(half);
  return out;
}

inline NetworkParams GramNetwork(int input_dim, int width, int depth, std::uint64_t seed) {
  return InitParams(NetworkShape{input_dim, width, depth}, seed, InitScheme::kGaussian);
}

// (1/m) Psi Psi^T assembled layer by layer: the gradient block of W_l is the
// outer product delta_l h_{l-1}^T, so its Gram is (delta^T delta) o (h^T h).
inline Matrix GradientGram(const NetworkParams& params, const std::vector<Vector>& inputs) {
  const NetworkShape& shape = params.shape;
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  Matrix batch(shape.input_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) batch.col(i) = inputs[i];
  const internal::ForwardCache cache = internal::Forward(params, batch);
  const double scale = std::sqrt(static_cast<double>(shape.width));

  const Matrix phi = scale * cache.post.back();
  Matrix gram = phi.transpose() * phi;
  Matrix delta = scale * (cache.pre.back().unaryExpr(&internal::ReluDerivative).array().colwise() *
                          params.theta.array())
                             .matrix();
  for (int l = shape.depth - 1; l >= 0; --l) {
    gram += (delta.transpose() * delta).cwiseProduct(cache.post[l].transpose() * cache.post[l]);
    if (l > 0) {
      delta = (params.hidden[l].transpose() * delta)
                  .cwiseProduct(cache.pre[l - 1].unaryExpr(&internal::ReluDerivative));
    }
  }
  return gram / static_cast<double>(shape.width);
}

// Same matrix from explicit gradient rows; O(N (d + p)) memory.
inline Matrix GradientGramExplicit(const NetworkParams& params, const std::vector<Vector>& inputs) {
  Matrix psi(static_cast<Eigen::Index>(inputs.size()), params.shape.input_dim + params.shape.ParamCount());
  for (std::size_t i = 0; i < inputs.size(); ++i) psi.row(static_cast<Eigen::Index>(i)) = GradFAll(params, inputs[i]);
  return psi * psi.transpose() / static_cast<double>(params.shape.width);
}

inline Matrix EmpiricalGram(const std::vector<Vector>& points, int depth, int width, std::uint64_t seed) {
  std::vector<Vector> padded;
  padded.reserve(points.size());
  for (const Vector& x : points) padded.push_back(PadHalves(x, width));
  return GradientGram(GramNetwork(width, width, depth, seed), padded);
}

struct GramErrorRow {
  int width = 0;
  std::uint64_t seed = 0;
  double frob_error = 0.0;
};

inline std::vector<GramErrorRow> GramConvergence(const std::vector<Vector>& points, int depth,
                                                 const std::vector<int>& widths, int seeds_per_width,
                                                 std::uint64_t base_seed = 0) {
  if (depth < 2) throw std::invalid_argument("gram convergence: depth must be >= 2");
  if (seeds_per_width < 1) throw std::invalid_argument("gram convergence: need at least one seed");
  for (const Vector& x : points) {
    CheckUnit(x, "point");
    const Eigen::Index half = x.size() / 2;
    if (x.size() % 2 != 0 || (x.head(half) - x.tail(half)).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("gram convergence: points must have equal halves");
    }
  }
  const Matrix target = NtkMatrix(points, depth).h;
  std::vector<GramErrorRow> rows;
  for (int width : widths) {
    if (width <= 0 || width % 2 != 0) throw std::invalid_argument("gram convergence: widths must be even");
    for (int s = 0; s < seeds_per_width; ++s) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
      rows.push_back({width, seed, (EmpiricalGram(points, depth, width, seed) - target).norm()});
    }
  }
  return rows;
}

}  // namespace nlucb

#endif  // NEURAL_LINUCB_NTK_HPP_
