#include "dfo/fit.hpp"

#include <cmath>

#include "dfo/errors.hpp"

namespace dfo::harness {

void FitConfig::validate() const {
  if (iterations < 1) throw ConfigError("fit iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("fit learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam moment decays must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(target_loss >= 0.0)) throw ConfigError("fit target loss must be non-negative");
}

double mse_loss(const models::Parametrization& model, const Vector& theta, const models::Points& points,
                const Matrix& target) {
  const Matrix values = model.evaluate_batch(theta, points, models::kValues).values;
  return (values - target).squaredNorm() / static_cast<double>(values.size());
}

FitResult fit_initial_condition(const models::Parametrization& model, const Matrix& target, const FitConfig& fit,
                                const models::Points& points, const Vector& theta_init) {
  fit.validate();
  if (points.rows() == 0) throw InputError("no fitting points");
  if (target.rows() != points.rows() || target.cols() != model.output_dim()) {
    throw InputError("target must have one row per point and one column per model output");
  }
  if (theta_init.size() != model.param_count()) throw InputError("initial parameters have the wrong length");

  const double scale = 2.0 / static_cast<double>(target.size());
  FitResult result{theta_init, 0.0, 0};
  Vector first = Vector::Zero(theta_init.size());
  Vector second = Vector::Zero(theta_init.size());
  double decay1 = 1.0;
  double decay2 = 1.0;

  // Each iteration evaluates the loss at the current parameters inside the
  // vector-Jacobian product, so the model is run forward once per update.
  for (Index it = 0;; ++it) {
    bool stop = false;
    const Vector grad = model.param_vjp(result.theta, points, [&](const Matrix& values) -> Matrix {
      Matrix residual = values - target;
      result.loss = residual.squaredNorm() / static_cast<double>(residual.size());
      if (!std::isfinite(result.loss)) throw FitError("fit loss became non-finite", static_cast<std::size_t>(it));
      stop = result.loss <= fit.target_loss || it == fit.iterations;
      return scale * residual;
    });
    if (stop) break;

    first = fit.beta1 * first + (1.0 - fit.beta1) * grad;
    second = fit.beta2 * second + (1.0 - fit.beta2) * grad.cwiseAbs2();
    decay1 *= fit.beta1;
    decay2 *= fit.beta2;
    const double step = fit.learning_rate / (1.0 - decay1);
    const double root = std::sqrt(1.0 - decay2);
    result.theta.array() -= step * first.array() / (second.array().sqrt() / root + fit.epsilon);
    result.iterations = it + 1;
  }
  return result;
}

FitResult fit_initial_condition(const models::Parametrization& model, const TargetFunction& u0, const FitConfig& fit,
                                const models::Points& points, const Vector& theta_init) {
  Matrix target(points.rows(), model.output_dim());
  for (Index i = 0; i < points.rows(); ++i) {
    const Vector value = u0(points.row(i).transpose());
    if (value.size() != model.output_dim()) throw InputError("target function has the wrong output size");
    target.row(i) = value.transpose();
  }
  return fit_initial_condition(model, target, fit, points, theta_init);
}

}  // namespace dfo::harness
