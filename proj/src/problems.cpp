#include "dfo/problems.hpp"

#include <cmath>
#include <numbers>

#include "dfo/errors.hpp"

namespace dfo::models {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_output_dim(const Parametrization& model, Index q, const char* problem) {
  if (model.output_dim() != q) {
    throw InputError(std::string(problem) + " expects a model with " + std::to_string(q) + " output(s)");
  }
}

}  // namespace

bool Domain::contains(const Points& points) const {
  if (points.cols() != dim()) return false;
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index k = 0; k < dim(); ++k) {
      const double v = points(i, k);
      if (!(v >= lower[k] && v <= upper[k])) return false;
    }
  }
  return true;
}

BatchSystem assemble_system(const PdeProblem& problem, const Parametrization& model, const Vector& theta, double t,
                            const Points& points) {
  if (points.rows() == 0) throw InputError("no collocation points");
  if (model.spatial_dim() != problem.spatial_dim() || model.output_dim() != problem.output_dim()) {
    throw InputError("model and problem " + problem.name() + " have incompatible dimensions");
  }
  if (theta.size() != model.param_count()) throw InputError("parameter vector has the wrong length");
  if (!theta.allFinite()) throw InputError("parameter vector contains non-finite entries");
  if (!problem.domain().contains(points)) throw InputError("collocation point outside the domain");

  BatchSystem system;
  system.jacobian = model.evaluate_batch(theta, points, kParamJacobian).param_jacobian;
  system.rhs = problem.rhs(model, theta, t, points);

  const Index q = model.output_dim();
  for (Index row = 0; row < system.jacobian.rows(); ++row) {
    if (!system.jacobian.row(row).allFinite() || !std::isfinite(system.rhs(row))) {
      throw NumericalError("non-finite value while assembling the batch system", row / q);
    }
  }
  return system;
}

// ---------------------------------------------------------------------------

Vector wave_rhs(const WaveTwoGaussian& model, const Vector& theta, const Points& points) {
  const Index n = points.rows();
  const Matrix values = model.evaluate_batch(theta, points, kValues).values;
  const Matrix curvature = model.second_spatial_derivative(theta, points);
  const double c2 = model.speed() * model.speed();
  Vector f(2 * n);
  for (Index i = 0; i < n; ++i) {
    f(2 * i) = values(i, 1);
    f(2 * i + 1) = c2 * curvature(i, 0);
  }
  return f;
}

Vector WaveProblem::rhs(const Parametrization& model, const Vector& theta, double, const Points& points) const {
  const auto* wave = dynamic_cast<const WaveTwoGaussian*>(&model);
  if (wave == nullptr) throw InputError("the wave problem needs the analytic second derivative of WaveTwoGaussian");
  return wave_rhs(*wave, theta, points);
}

// ---------------------------------------------------------------------------

double advreact_source(double t, double x, double c, double kappa) {
  const double ct = std::cos(t);
  const double st = std::sin(t);
  return (ct + (kappa - c) * st) * std::sin(x) + (ct + (kappa + c) * st) * std::cos(x);
}

Domain AdvReactProblem::domain() const { return {{0.0}, {kTwoPi}, {true}}; }

Vector AdvReactProblem::rhs(const Parametrization& model, const Vector& theta, double t, const Points& points) const {
  require_output_dim(model, 1, "advreact");
  const auto eval = model.evaluate_batch(theta, points, kValues | kSpatialGradient);
  Vector f(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    f(i) = -speed_ * eval.spatial_gradient[0](i, 0) - kappa_ * eval.values(i, 0) +
           advreact_source(t, points(i, 0), speed_, kappa_);
  }
  return f;
}

// ---------------------------------------------------------------------------

double SeparableFlow::cx(double x) const { return ax * (1.0 + bx * std::sin(kTwoPi * kx * (x - x0) / lx)); }
double SeparableFlow::cy(double y) const { return ay * (1.0 + by * std::cos(kTwoPi * ky * (y - y0) / ly)); }
double SeparableFlow::max_abs_cx() const { return std::abs(ax) * (1.0 + std::abs(bx)); }
double SeparableFlow::max_abs_cy() const { return std::abs(ay) * (1.0 + std::abs(by)); }

SeparableFlow SeparableFlow::zero() {
  SeparableFlow flow;
  flow.ax = 0.0;
  flow.ay = 0.0;
  return flow;
}

SeparableFlow SeparableFlow::constant(double cx, double cy) {
  SeparableFlow flow;
  flow.ax = cx;
  flow.bx = 0.0;
  flow.ay = cy;
  flow.by = 0.0;
  return flow;
}

Vector transport2d_rhs(const Parametrization& model, const Vector& theta, const Points& points,
                       const SeparableFlow& flow) {
  require_output_dim(model, 1, "transport2d");
  if (model.spatial_dim() != 2) throw InputError("transport2d expects a model with two spatial inputs");
  const auto eval = model.evaluate_batch(theta, points, kSpatialGradient);
  Vector f(points.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    f(i) = -flow.cx(points(i, 0)) * eval.spatial_gradient[0](i, 0) -
           flow.cy(points(i, 1)) * eval.spatial_gradient[1](i, 0);
  }
  return f;
}

Vector TransportProblem::rhs(const Parametrization& model, const Vector& theta, double,
                             const Points& points) const {
  return transport2d_rhs(model, theta, points, flow_);
}

}  // namespace dfo::models
