#pragma once

// Initial-condition fitting: full-batch Adam on the mean squared error
// between the model and target values at sample points.

#include <cstdint>
#include <functional>

#include "dfo/models.hpp"

namespace dfo::harness {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

struct FitConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index iterations = 10000;
  /// Stop as soon as the loss is at or below this value.
  double target_loss = 0.0;
  /// Seeds the initial parameters when the model draws them.
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const FitConfig&) const = default;
};

struct FitResult {
  Vector theta;
  double loss = 0.0;
  Index iterations = 0;  ///< Adam updates actually applied
};

/// target holds one row per point and one column per output component.
/// Throws FitError with the iteration index when the loss turns non-finite.
FitResult fit_initial_condition(const models::Parametrization& model, const Matrix& target, const FitConfig& fit,
                                const models::Points& points, const Vector& theta_init);

using TargetFunction = std::function<Vector(const Vector& x)>;

FitResult fit_initial_condition(const models::Parametrization& model, const TargetFunction& u0, const FitConfig& fit,
                                const models::Points& points, const Vector& theta_init);

/// Mean squared error between model values and target.
double mse_loss(const models::Parametrization& model, const Vector& theta, const models::Points& points,
                const Matrix& target);

}  // namespace dfo::harness
