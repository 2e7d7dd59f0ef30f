#include "dfo/models.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "dfo/errors.hpp"
#include "dfo/rng.hpp"

namespace dfo::models {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Points single_point(const Vector& x) { return x.transpose(); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parametrization

void Parametrization::check_arguments(const Vector& theta, const Points& points) const {
  if (theta.size() != param_count()) {
    throw InputError("parameter vector has length " + std::to_string(theta.size()) + ", model expects " +
                     std::to_string(param_count()));
  }
  if (points.rows() > 0 && points.cols() != spatial_dim()) {
    throw InputError("points have dimension " + std::to_string(points.cols()) + ", model expects " +
                     std::to_string(spatial_dim()));
  }
}

Vector Parametrization::evaluate(const Vector& theta, const Vector& x) const {
  return evaluate_batch(theta, single_point(x), kValues).values.row(0).transpose();
}

Matrix Parametrization::param_gradient(const Vector& theta, const Vector& x) const {
  return evaluate_batch(theta, single_point(x), kParamJacobian).param_jacobian;
}

Matrix Parametrization::spatial_gradient(const Vector& theta, const Vector& x) const {
  const auto eval = evaluate_batch(theta, single_point(x), kSpatialGradient);
  Matrix out(output_dim(), spatial_dim());
  for (Index i = 0; i < spatial_dim(); ++i) out.col(i) = eval.spatial_gradient[i].row(0).transpose();
  return out;
}

namespace {

void check_weights(const Matrix& weights, Index n, Index q) {
  if (weights.rows() != n || weights.cols() != q) {
    throw InputError("weights must have one row per point and one column per output");
  }
}

}  // namespace

Vector Parametrization::param_vjp(const Vector& theta, const Points& points, const WeightFunction& weights) const {
  const auto eval = evaluate_batch(theta, points, kValues | kParamJacobian);
  const Matrix w = weights(eval.values);
  check_weights(w, points.rows(), output_dim());
  const Matrix stacked = w.transpose();
  return eval.param_jacobian.transpose() * stacked.reshaped();
}

Vector Parametrization::param_vjp(const Vector& theta, const Points& points, const Matrix& weights) const {
  return param_vjp(theta, points, [&weights](const Matrix&) { return weights; });
}

// ---------------------------------------------------------------------------
// GaussianProfile

double GaussianProfile::value(double x, double mu) const {
  const double z = x - mu;
  return std::exp(-0.5 * z * z / spread);
}

double GaussianProfile::d_mu(double x, double mu) const {
  const double z = x - mu;
  return z / spread * value(x, mu);
}

double GaussianProfile::d2_mu(double x, double mu) const {
  const double z = x - mu;
  const double s = spread;
  return (z * z / (s * s) - 1.0 / s) * value(x, mu);
}

double GaussianProfile::d3_mu(double x, double mu) const {
  const double z = x - mu;
  const double s = spread;
  return (z * z * z / (s * s * s) - 3.0 * z / (s * s)) * value(x, mu);
}

// ---------------------------------------------------------------------------
// WaveTwoGaussian

WaveTwoGaussian::WaveTwoGaussian(double rho, double speed) : rho_(rho), speed_(speed), wide_{1.0 + rho} {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InputError("wave offset rho must be finite and >= 0");
  if (!std::isfinite(speed)) throw InputError("wave speed must be finite");
}

ModelEvaluation WaveTwoGaussian::evaluate_batch(const Vector& theta, const Points& points,
                                                unsigned request) const {
  check_arguments(theta, points);
  const Index n = points.rows();
  const double c = speed_;
  ModelEvaluation out;
  if (request & kValues) out.values.resize(n, 2);
  if (request & kParamJacobian) out.param_jacobian = Matrix::Zero(2 * n, 4);
  if (request & kSpatialGradient) out.spatial_gradient.assign(1, Matrix(n, 2));

  for (Index i = 0; i < n; ++i) {
    const double x = points(i, 0);
    if (request & kValues) {
      out.values(i, 0) = narrow_.value(x, theta(0)) + wide_.value(x, theta(1));
      out.values(i, 1) = c * (narrow_.d_mu(x, theta(2)) - wide_.d_mu(x, theta(3)));
    }
    if (request & kParamJacobian) {
      out.param_jacobian(2 * i, 0) = narrow_.d_mu(x, theta(0));
      out.param_jacobian(2 * i, 1) = wide_.d_mu(x, theta(1));
      out.param_jacobian(2 * i + 1, 2) = c * narrow_.d2_mu(x, theta(2));
      out.param_jacobian(2 * i + 1, 3) = -c * wide_.d2_mu(x, theta(3));
    }
    if (request & kSpatialGradient) {
      out.spatial_gradient[0](i, 0) = -narrow_.d_mu(x, theta(0)) - wide_.d_mu(x, theta(1));
      out.spatial_gradient[0](i, 1) = -c * (narrow_.d2_mu(x, theta(2)) - wide_.d2_mu(x, theta(3)));
    }
  }
  return out;
}

Matrix WaveTwoGaussian::second_spatial_derivative(const Vector& theta, const Points& points) const {
  check_arguments(theta, points);
  Matrix out(points.rows(), 2);
  for (Index i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0);
    out(i, 0) = narrow_.d2_mu(x, theta(0)) + wide_.d2_mu(x, theta(1));
    out(i, 1) = speed_ * (narrow_.d3_mu(x, theta(2)) - wide_.d3_mu(x, theta(3)));
  }
  return out;
}

Vector WaveTwoGaussian::exact_parameters(double t) const {
  const double shift = speed_ * t;
  Vector theta(4);
  theta << -2.0 + shift, 2.0 - shift, -2.0 + shift, 2.0 - shift;
  return theta;
}

// ---------------------------------------------------------------------------
// AdvReactSine

ModelEvaluation AdvReactSine::evaluate_batch(const Vector& theta, const Points& points, unsigned request) const {
  check_arguments(theta, points);
  const Index n = points.rows();
  const double a = std::sin(theta(0));
  const double b = std::sin(theta(1));
  const double da = std::cos(theta(0));
  const double db = std::cos(theta(1));
  ModelEvaluation out;
  if (request & kValues) out.values.resize(n, 1);
  if (request & kParamJacobian) out.param_jacobian.resize(n, 2);
  if (request & kSpatialGradient) out.spatial_gradient.assign(1, Matrix(n, 1));
  for (Index i = 0; i < n; ++i) {
    const double s = std::sin(points(i, 0));
    const double co = std::cos(points(i, 0));
    if (request & kValues) out.values(i, 0) = a * s + b * co;
    if (request & kParamJacobian) {
      out.param_jacobian(i, 0) = da * s;
      out.param_jacobian(i, 1) = db * co;
    }
    if (request & kSpatialGradient) out.spatial_gradient[0](i, 0) = a * co - b * s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PeriodicMLP

Index MlpArchitecture::embedding_param_count() const {
  return (trainable_embedding ? 3 : 1) * embed_width * input_dim;
}

Index MlpArchitecture::param_count() const {
  Index count = embedding_param_count();
  Index in = embed_width;
  for (Index width : hidden) {
    count += in * width + width;
    in = width;
  }
  return count + in * output_dim + output_dim;
}

PeriodicMLP::PeriodicMLP(MlpArchitecture arch) : arch_(std::move(arch)) {
  if (arch_.input_dim < 1 || arch_.embed_width < 1 || arch_.output_dim < 1) {
    throw InputError("MLP dimensions must be positive");
  }
  if (static_cast<Index>(arch_.periods.size()) != arch_.input_dim) {
    throw InputError("MLP needs one period per input dimension");
  }
  for (double period : arch_.periods) {
    if (!(period > 0.0) || !std::isfinite(period)) throw InputError("MLP periods must be positive");
  }
  Index offset = arch_.embedding_param_count();
  Index in = arch_.embed_width;
  auto add_layer = [&](Index out) {
    if (out < 1) throw InputError("MLP layer widths must be positive");
    layers_.push_back(Layer{in, out, offset, offset + in * out});
    offset += in * out + out;
    in = out;
  };
  for (Index width : arch_.hidden) add_layer(width);
  add_layer(arch_.output_dim);
  param_count_ = offset;
}

Vector PeriodicMLP::initial_parameters(std::uint64_t seed) const {
  Rng rng(seed);
  Vector theta = Vector::Zero(param_count_);
  const Index wd = arch_.embed_width * arch_.input_dim;
  for (Index k = 0; k < wd; ++k) theta(k) = rng.uniform(0.0, kTwoPi);
  if (arch_.trainable_embedding) theta.segment(wd, wd).setOnes();
  for (const Layer& layer : layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    for (Index k = 0; k < layer.in * layer.out; ++k) theta(layer.weight_offset + k) = rng.uniform(-bound, bound);
  }
  return theta;
}

namespace {
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

struct PeriodicMLP::Forward {
  // cos/sin of the phase argument per input dimension, each n x w.
  std::vector<Eigen::ArrayXXd> cos_arg;
  std::vector<Eigen::ArrayXXd> sin_arg;
  // activations[l] is the input to layer l; swish_slope[l] the activation
  // slope of hidden layer l.
  std::vector<Matrix> activations;
  std::vector<Eigen::ArrayXXd> swish_slope;
  Matrix output;
  // Forward-mode tangents d(.)/dx_i, one n x width matrix per input dimension.
  std::vector<Matrix> tangent;
};

double PeriodicMLP::amplitude(const Vector& theta, Index j, Index i) const {
  const Index wd = arch_.embed_width * arch_.input_dim;
  return arch_.trainable_embedding ? theta(wd + j * arch_.input_dim + i) : 1.0;
}

PeriodicMLP::Forward PeriodicMLP::forward(const Vector& theta, const Points& points, bool want_grad) const {
  check_arguments(theta, points);
  const Index n = points.rows();
  const Index d = arch_.input_dim;
  const Index w = arch_.embed_width;
  const Index wd = w * d;

  Forward fw;
  fw.cos_arg.assign(d, Eigen::ArrayXXd(n, w));
  fw.sin_arg.assign(d, Eigen::ArrayXXd(n, w));
  fw.tangent.assign(want_grad ? d : 0, Matrix::Zero(n, w));
  Matrix embed = Matrix::Zero(n, w);
  for (Index i = 0; i < d; ++i) {
    const double period = arch_.periods[i];
    const double omega = kTwoPi / period;
    // cos(a + phi) and sin(a + phi) by angle addition: one trig pair per
    // point and one per channel.
    Eigen::ArrayXd cos_x(n), sin_x(n);
    for (Index r = 0; r < n; ++r) {
      const double arg = omega * std::remainder(points(r, i), period);
      cos_x(r) = std::cos(arg);
      sin_x(r) = std::sin(arg);
    }
    for (Index j = 0; j < w; ++j) {
      const double phase = theta(j * d + i);
      const double cp = std::cos(phase);
      const double sp = std::sin(phase);
      fw.cos_arg[i].col(j) = cos_x * cp - sin_x * sp;
      fw.sin_arg[i].col(j) = sin_x * cp + cos_x * sp;
    }
    for (Index j = 0; j < w; ++j) {
      const double a = amplitude(theta, j, i);
      const double b = arch_.trainable_embedding ? theta(2 * wd + j * d + i) : 0.0;
      embed.col(j).array() += a * fw.cos_arg[i].col(j) + b;
      if (want_grad) fw.tangent[i].col(j).array() = -a * omega * fw.sin_arg[i].col(j);
    }
  }

  const std::size_t num_layers = layers_.size();
  fw.activations.reserve(num_layers);
  fw.swish_slope.reserve(num_layers);
  fw.activations.push_back(std::move(embed));
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Layer& layer = layers_[l];
    const RowMajorMap weight(theta.data() + layer.weight_offset, layer.out, layer.in);
    const auto bias = theta.segment(layer.bias_offset, layer.out);
    Matrix z = fw.activations.back() * weight.transpose();
    z.rowwise() += bias.transpose();
    for (auto& t : fw.tangent) t = t * weight.transpose();
    if (l + 1 == num_layers) {
      fw.output = std::move(z);
      break;
    }
    Eigen::ArrayXXd sig = z.array().unaryExpr([](double v) { return sigmoid(v); });
    Eigen::ArrayXXd slope = sig * (1.0 + z.array() * (1.0 - sig));
    for (auto& t : fw.tangent) t.array() *= slope;
    fw.activations.push_back((z.array() * sig).matrix());
    fw.swish_slope.push_back(std::move(slope));
  }
  return fw;
}

ModelEvaluation PeriodicMLP::evaluate_batch(const Vector& theta, const Points& points, unsigned request) const {
  const bool want_jac = request & kParamJacobian;
  const bool want_grad = request & kSpatialGradient;
  Forward fw = forward(theta, points, want_grad);

  const Index n = points.rows();
  const Index d = arch_.input_dim;
  const Index w = arch_.embed_width;
  const Index q = arch_.output_dim;
  const Index wd = w * d;

  ModelEvaluation out;
  if (request & kValues) out.values = fw.output;
  if (want_grad) out.spatial_gradient = std::move(fw.tangent);
  if (!want_jac) return out;

  out.param_jacobian = Matrix::Zero(n * q, param_count_);
  auto jac_column = [&](Index col, Index component) {
    return Eigen::Map<Vector, 0, Eigen::InnerStride<>>(out.param_jacobian.col(col).data() + component, n,
                                                       Eigen::InnerStride<>(q));
  };

  const std::size_t num_layers = layers_.size();
  for (Index c = 0; c < q; ++c) {
    // grad holds d y_c / d (pre-activation of layer l), one row per point.
    Matrix grad = Matrix::Zero(n, q);
    grad.col(c).setOnes();
    for (std::size_t l = num_layers; l-- > 0;) {
      const Layer& layer = layers_[l];
      const Matrix& input = fw.activations[l];
      for (Index a = 0; a < layer.out; ++a) {
        for (Index b = 0; b < layer.in; ++b) {
          jac_column(layer.weight_offset + a * layer.in + b, c) = grad.col(a).cwiseProduct(input.col(b));
        }
        jac_column(layer.bias_offset + a, c) = grad.col(a);
      }
      const RowMajorMap weight(theta.data() + layer.weight_offset, layer.out, layer.in);
      Matrix upstream = grad * weight;
      if (l > 0) upstream.array() *= fw.swish_slope[l - 1];
      grad = std::move(upstream);
    }
    // grad is now d y_c / d e.
    for (Index j = 0; j < w; ++j) {
      for (Index i = 0; i < d; ++i) {
        const Index k = j * d + i;
        jac_column(k, c) = (-amplitude(theta, j, i) * grad.col(j).array() * fw.sin_arg[i].col(j)).matrix();
        if (arch_.trainable_embedding) {
          jac_column(wd + k, c) = (grad.col(j).array() * fw.cos_arg[i].col(j)).matrix();
          jac_column(2 * wd + k, c) = grad.col(j);
        }
      }
    }
  }
  return out;
}

Vector PeriodicMLP::param_vjp(const Vector& theta, const Points& points, const WeightFunction& weights) const {
  const Forward fw = forward(theta, points, false);
  Matrix grad = weights(fw.output);
  check_weights(grad, points.rows(), arch_.output_dim);
  const Index d = arch_.input_dim;
  const Index w = arch_.embed_width;
  const Index wd = w * d;

  Vector out = Vector::Zero(param_count_);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight_grad(
        out.data() + layer.weight_offset, layer.out, layer.in);
    weight_grad.noalias() = grad.transpose() * fw.activations[l];
    out.segment(layer.bias_offset, layer.out) = grad.colwise().sum().transpose();
    const RowMajorMap weight(theta.data() + layer.weight_offset, layer.out, layer.in);
    Matrix upstream = grad * weight;
    if (l > 0) upstream.array() *= fw.swish_slope[l - 1];
    grad = std::move(upstream);
  }
  for (Index j = 0; j < w; ++j) {
    for (Index i = 0; i < d; ++i) {
      const Index k = j * d + i;
      out(k) = -amplitude(theta, j, i) * (grad.col(j).array() * fw.sin_arg[i].col(j)).sum();
      if (arch_.trainable_embedding) {
        out(wd + k) = (grad.col(j).array() * fw.cos_arg[i].col(j)).sum();
        out(2 * wd + k) = grad.col(j).sum();
      }
    }
  }
  return out;
}

PeriodicMLP::ValueAndGradient PeriodicMLP::forward_with_derivatives(const Vector& theta, const Vector& x) const {
  const auto eval = evaluate_batch(theta, single_point(x), kValues | kSpatialGradient);
  ValueAndGradient out;
  out.value = eval.values.row(0).transpose();
  out.gradient.resize(arch_.output_dim, arch_.input_dim);
  for (Index i = 0; i < arch_.input_dim; ++i) out.gradient.col(i) = eval.spatial_gradient[i].row(0).transpose();
  return out;
}

}  // namespace dfo::models
