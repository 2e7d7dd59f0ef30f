#pragma once

// Right-hand-side operators F of du/dt = F(u) and batch assembly of the
// least-squares system (J, f) at collocation points.

#include <string>
#include <vector>

#include "dfo/models.hpp"

namespace dfo::models {

struct Domain {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> periodic;

  Index dim() const { return static_cast<Index>(lower.size()); }
  bool contains(const Points& points) const;
};

class PdeProblem {
 public:
  virtual ~PdeProblem() = default;

  virtual std::string name() const = 0;
  virtual Index spatial_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual Domain domain() const = 0;

  /// F(u_hat(theta, .)) evaluated at the points, stacked point-major like
  /// the rows of the parameter Jacobian.
  virtual Vector rhs(const Parametrization& model, const Vector& theta, double t, const Points& points) const = 0;
};

struct BatchSystem {
  Matrix jacobian;  ///< J_ij = d u_hat(theta, x_i) / d theta_j
  Vector rhs;       ///< f_i = F(u_hat(theta, .))(x_i)
};

/// Throws InputError on bad shapes or points outside the domain and
/// NumericalError (carrying the point index) on non-finite values.
BatchSystem assemble_system(const PdeProblem& problem, const Parametrization& model, const Vector& theta, double t,
                            const Points& points);

// ---------------------------------------------------------------------------
// Wave equation in first-order form on [-12, 12):
//   du1/dt = u2,  du2/dt = c^2 d^2 u1 / dx^2

Vector wave_rhs(const WaveTwoGaussian& model, const Vector& theta, const Points& points);

class WaveProblem final : public PdeProblem {
 public:
  explicit WaveProblem(double lower = -12.0, double upper = 12.0) : lower_(lower), upper_(upper) {}
  std::string name() const override { return "wave"; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 2; }
  Domain domain() const override { return {{lower_}, {upper_}, {true}}; }
  /// Requires a WaveTwoGaussian model; the speed is taken from it.
  Vector rhs(const Parametrization& model, const Vector& theta, double t, const Points& points) const override;

 private:
  double lower_;
  double upper_;
};

// ---------------------------------------------------------------------------
// Advection-reaction with manufactured source on [0, 2 pi):
//   du/dt = -c du/dx - kappa u + s(t, x)

double advreact_source(double t, double x, double c, double kappa);

class AdvReactProblem final : public PdeProblem {
 public:
  explicit AdvReactProblem(double speed = 1.0, double kappa = 1.0) : speed_(speed), kappa_(kappa) {}
  std::string name() const override { return "advreact"; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  Domain domain() const override;
  Vector rhs(const Parametrization& model, const Vector& theta, double t, const Points& points) const override;

  double speed() const { return speed_; }
  double kappa() const { return kappa_; }

 private:
  double speed_;
  double kappa_;
};

// ---------------------------------------------------------------------------
// Passive transport through a separable flow on [-1, 1)^2:
//   du/dt = -c_x(x) du/dx - c_y(y) du/dy

/// c_x(x) = ax (1 + bx sin(2 pi kx (x - x0) / Lx))
/// c_y(y) = ay (1 + by cos(2 pi ky (y - y0) / Ly))
/// Defaults are the benchmark flow field.
struct SeparableFlow {
  double ax = 1.0, bx = 0.6, kx = 3.0, x0 = 0.0, lx = 2.0;
  double ay = 0.8, by = 0.3, ky = 2.0, y0 = 0.0, ly = 2.0;

  double cx(double x) const;
  double cy(double y) const;
  double max_abs_cx() const;
  double max_abs_cy() const;

  static SeparableFlow zero();
  static SeparableFlow constant(double cx, double cy);

  bool operator==(const SeparableFlow&) const = default;
};

Vector transport2d_rhs(const Parametrization& model, const Vector& theta, const Points& points,
                       const SeparableFlow& flow);

class TransportProblem final : public PdeProblem {
 public:
  explicit TransportProblem(SeparableFlow flow = {}) : flow_(flow) {}
  std::string name() const override { return "transport2d"; }
  Index spatial_dim() const override { return 2; }
  Index output_dim() const override { return 1; }
  Domain domain() const override { return {{-1.0, -1.0}, {1.0, 1.0}, {true, true}}; }
  Vector rhs(const Parametrization& model, const Vector& theta, double t, const Points& points) const override;

  const SeparableFlow& flow() const { return flow_; }

 private:
  SeparableFlow flow_;
};

}  // namespace dfo::models
