#pragma once

// Dirac-Frenkel (DF) and Dirac-Frenkel-Onsager (DFO) time stepping of
// parameters theta(t). DF follows the minimal-norm velocity eta_bar; DFO
// adds lambda times the nullspace component of an exponential moving average
// m of past velocities. lambda = 0 recovers DF bit for bit.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dfo/linalg.hpp"
#include "dfo/problems.hpp"

namespace dfo::dynamics {

using linalg::Index;
using linalg::LsqResult;
using linalg::Matrix;
using linalg::Vector;

enum class Scheme { SemiImplicitEuler, Rk4StageEma };
enum class SolverKind { Tsvd, Tikhonov, Rsvd };

struct SolverConfig {
  SolverKind kind = SolverKind::Tsvd;
  double gamma = 1e-10;          ///< Tikhonov only
  linalg::SketchConfig sketch;  ///< Rsvd only

  bool operator==(const SolverConfig&) const = default;
};

struct StepConfig {
  double dt = 1e-3;
  double tau = 1.0;
  /// Overrides tau/(tau+dt) for full steps when set. The implied tau is used
  /// for a shortened final step.
  std::optional<double> beta;
  double lambda = 0.0;
  linalg::Truncation truncation;
  Scheme scheme = Scheme::SemiImplicitEuler;
  SolverConfig solver;

  /// EMA coefficient for a step of length h.
  double beta_for(double h) const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;

  bool operator==(const StepConfig&) const = default;
};

struct VelocityEstimate {
  LsqResult lsq;  ///< eta_bar plus the basis defining the nullspace projector
  double residual_norm = 0.0;
};

/// Source of parameter velocities. `stream` distinguishes solves within one
/// run (step * 4 + stage) so randomized solvers draw independent sketches.
class VelocityField {
 public:
  virtual ~VelocityField() = default;
  virtual Index param_count() const = 0;
  virtual VelocityEstimate estimate(const Vector& theta, double t, std::uint64_t stream) const = 0;
  /// Called once per macro step before any stage is evaluated.
  virtual void begin_step(Index /*step*/, double /*t*/) {}
};

/// One DF solve: assemble (J, f) at the points and apply the solver.
VelocityEstimate df_velocity(const models::PdeProblem& problem, const models::Parametrization& model,
                             const Vector& theta, double t, const models::Points& points,
                             const SolverConfig& solver, const linalg::Truncation& truncation,
                             std::uint64_t stream = 0);

using PointsProvider = std::function<models::Points(Index step, double t)>;

class DiracFrenkelField final : public VelocityField {
 public:
  DiracFrenkelField(const models::PdeProblem& problem, const models::Parametrization& model, models::Points points,
                    SolverConfig solver, linalg::Truncation truncation);
  /// Points are refreshed from the provider at the start of every step and
  /// held fixed across the stages of that step.
  DiracFrenkelField(const models::PdeProblem& problem, const models::Parametrization& model,
                    PointsProvider provider, SolverConfig solver, linalg::Truncation truncation);

  Index param_count() const override { return model_.param_count(); }
  VelocityEstimate estimate(const Vector& theta, double t, std::uint64_t stream) const override;
  void begin_step(Index step, double t) override;

  const models::Points& points() const { return points_; }

 private:
  const models::PdeProblem& problem_;
  const models::Parametrization& model_;
  PointsProvider provider_;
  models::Points points_;
  SolverConfig solver_;
  linalg::Truncation truncation_;
};

struct DfoState {
  Vector theta;
  Vector momentum;  ///< starts at zero
  double t = 0.0;
};

struct StepRecord {
  Index step = 0;
  double t = 0.0;  ///< time after the step
  Vector theta;    ///< theta after the step
  double residual_norm = 0.0;
  Index retained_rank = 0;
  double sigma_max = 0.0;
  double sigma_min_retained = 0.0;
  double momentum_norm = 0.0;
  double projected_momentum_norm = 0.0;
  bool partial = false;  ///< shortened final step
};

/// Semi-implicit Euler:
///   m_{k+1} = beta m_k + (1 - beta) eta_k
///   theta_{k+1} = theta_k + h (eta_k + lambda P_k m_{k+1})
StepRecord dfo_euler_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step = 0);

/// Classical RK4 with the EMA threaded through the stages on stage
/// increments Delta_s = h_s eta_s. beta is computed from the macro step h.
/// The record carries the solver diagnostics of the first stage.
StepRecord dfo_rk4_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step = 0);

/// Dispatches on cfg.scheme.
StepRecord dfo_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step = 0);

struct StepPlan {
  Index full_steps = 0;
  double last_step = 0.0;  ///< length of the shortened final step, 0 if none

  Index total_steps() const { return full_steps + (last_step > 0.0 ? 1 : 0); }
};

/// Full steps of length dt covering [0, T], plus a shortened final step when
/// T is not a multiple of dt (up to a relative slack of 1e-9).
StepPlan plan_steps(double T, double dt);

using StepObserver = std::function<void(const StepRecord&, const DfoState&)>;

struct IntegrateOptions {
  bool keep_records = true;
  StepObserver observer;
};

struct Trajectory {
  DfoState final_state;
  std::vector<StepRecord> records;
};

/// Integrates from t = 0 to T starting at theta0 with m = 0. Step k starts
/// at t_k = k dt and the last step ends exactly at T. Throws
/// IntegrationError carrying the step index when theta becomes non-finite.
Trajectory integrate(VelocityField& field, const Vector& theta0, const StepConfig& cfg, double T,
                     const IntegrateOptions& options = {});

}  // namespace dfo::dynamics
