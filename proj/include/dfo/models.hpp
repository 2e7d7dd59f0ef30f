#pragma once

// Parametrizations u_hat(theta, x) with exact parameter Jacobians and
// first-order spatial derivatives.

#include <cstdint>
#include <functional>
#include <vector>

#include "dfo/linalg.hpp"

namespace dfo::models {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

/// Collocation points, one point per row (n x d).
using Points = Matrix;

enum EvalRequest : unsigned {
  kValues = 1u << 0,
  kParamJacobian = 1u << 1,
  kSpatialGradient = 1u << 2,
};

/// Batched model output. Only the requested members are filled.
///
/// Multi-output models stack rows point-major: the row of output
/// component c at point i is i * q + c.
struct ModelEvaluation {
  Matrix values;                         ///< n x q
  Matrix param_jacobian;                 ///< (n q) x p
  std::vector<Matrix> spatial_gradient;  ///< d matrices of n x q
};

class Parametrization {
 public:
  virtual ~Parametrization() = default;

  virtual Index param_count() const = 0;
  virtual Index spatial_dim() const = 0;
  virtual Index output_dim() const = 0;

  virtual ModelEvaluation evaluate_batch(const Vector& theta, const Points& points, unsigned request) const = 0;

  Vector evaluate(const Vector& theta, const Vector& x) const;
  /// q x p
  Matrix param_gradient(const Vector& theta, const Vector& x) const;
  /// q x d
  Matrix spatial_gradient(const Vector& theta, const Vector& x) const;

  /// Maps model values (n x q) to vector-Jacobian weights (n x q).
  using WeightFunction = std::function<Matrix(const Matrix& values)>;

  /// Vector-Jacobian product J^T w where the n x q weights w are computed
  /// from the model values at the same points. The default forms J
  /// explicitly.
  virtual Vector param_vjp(const Vector& theta, const Points& points, const WeightFunction& weights) const;
  Vector param_vjp(const Vector& theta, const Points& points, const Matrix& weights) const;

 protected:
  void check_arguments(const Vector& theta, const Points& points) const;
};

/// phi_rho(x; mu) = exp(-(x - mu)^2 / (2 (1 + rho))) and its mu-derivatives.
/// Since phi depends on x - mu only, d/dx = -d/dmu.
struct GaussianProfile {
  double spread = 1.0;  ///< 1 + rho

  double value(double x, double mu) const;
  double d_mu(double x, double mu) const;
  double d2_mu(double x, double mu) const;
  double d3_mu(double x, double mu) const;
};

/// Two-bump ansatz for the first-order wave system:
///   u1 = phi_0(x; th1) + phi_rho(x; th2)
///   u2 = c d_mu phi_0(x; th3) - c d_mu phi_rho(x; th4)
class WaveTwoGaussian final : public Parametrization {
 public:
  explicit WaveTwoGaussian(double rho = 0.0, double speed = 1.0);

  Index param_count() const override { return 4; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 2; }
  ModelEvaluation evaluate_batch(const Vector& theta, const Points& points, unsigned request) const override;

  /// d^2/dx^2 of both components, n x 2.
  Matrix second_spatial_derivative(const Vector& theta, const Points& points) const;

  /// Parameters of the exact solution: [-2 + ct, 2 - ct, -2 + ct, 2 - ct].
  Vector exact_parameters(double t) const;

  double rho() const { return rho_; }
  double speed() const { return speed_; }

 private:
  double rho_;
  double speed_;
  GaussianProfile narrow_{1.0};
  GaussianProfile wide_;
};

/// u(theta, x) = sin(th1) sin(x) + sin(th2) cos(x).
class AdvReactSine final : public Parametrization {
 public:
  Index param_count() const override { return 2; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  ModelEvaluation evaluate_batch(const Vector& theta, const Points& points, unsigned request) const override;
};

struct MlpArchitecture {
  Index input_dim = 1;
  Index embed_width = 32;
  std::vector<Index> hidden{32, 32, 32};
  Index output_dim = 1;
  std::vector<double> periods{2.0};  ///< one period per input dimension
  /// When false the embedding amplitudes are fixed to 1 and offsets to 0,
  /// and only the phases are parameters.
  bool trainable_embedding = false;

  Index embedding_param_count() const;
  Index param_count() const;

  bool operator==(const MlpArchitecture&) const = default;
};

/// MLP with a periodic input embedding and swish hidden layers:
///
///   e_j(x) = sum_i a_ji cos(2 pi x_i / P_i + phi_ji) + b_ji,   j < embed_width
///   h_1 = swish(W_1 e + b_1), ..., y = W_out h_L + b_out
///
/// Parameter layout: phases phi (row j holds the d phases of channel j),
/// then amplitudes and offsets when trainable, then for every layer the
/// row-major weight matrix followed by its bias.
class PeriodicMLP final : public Parametrization {
 public:
  explicit PeriodicMLP(MlpArchitecture arch);

  Index param_count() const override { return param_count_; }
  Index spatial_dim() const override { return arch_.input_dim; }
  Index output_dim() const override { return arch_.output_dim; }
  ModelEvaluation evaluate_batch(const Vector& theta, const Points& points, unsigned request) const override;
  using Parametrization::param_vjp;
  Vector param_vjp(const Vector& theta, const Points& points, const WeightFunction& weights) const override;

  const MlpArchitecture& architecture() const { return arch_; }

  /// Phases uniform on [0, 2 pi), weights uniform with bound sqrt(6 / fan_in),
  /// biases zero, amplitudes one and offsets zero.
  Vector initial_parameters(std::uint64_t seed) const;

  struct ValueAndGradient {
    Vector value;     ///< q
    Matrix gradient;  ///< q x d
  };
  /// Single-point forward pass with forward-mode spatial derivatives.
  ValueAndGradient forward_with_derivatives(const Vector& theta, const Vector& x) const;

 private:
  struct Layer {
    Index in = 0;
    Index out = 0;
    Index weight_offset = 0;
    Index bias_offset = 0;
  };

  struct Forward;
  Forward forward(const Vector& theta, const Points& points, bool want_grad) const;
  double amplitude(const Vector& theta, Index j, Index i) const;

  MlpArchitecture arch_;
  std::vector<Layer> layers_;  ///< hidden layers followed by the output layer
  Index param_count_ = 0;
};

}  // namespace dfo::models
