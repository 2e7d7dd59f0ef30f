#include "dfo/dynamics.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "dfo/errors.hpp"
#include "dfo/rng.hpp"

namespace dfo::dynamics {

double StepConfig::beta_for(double h) const {
  if (beta) {
    if (h == dt) return *beta;
    const double implied_tau = dt * *beta / (1.0 - *beta);
    return implied_tau / (implied_tau + h);
  }
  return tau / (tau + h);
}

void StepConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive and finite");
  if (beta) {
    if (!(*beta > 0.0 && *beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  } else if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau must be positive and finite");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative and finite");
  if (!(truncation.eps_rel >= 0.0 && truncation.eps_rel < 1.0)) throw ConfigError("eps_rel must lie in [0, 1)");
  if (!(truncation.abs_tol >= 0.0) || !std::isfinite(truncation.abs_tol)) {
    throw ConfigError("abs_tol must be non-negative and finite");
  }
  if (solver.kind == SolverKind::Tikhonov && !(solver.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (solver.kind == SolverKind::Rsvd && (solver.sketch.sketch_size < 1 || solver.sketch.oversampling < 0)) {
    throw ConfigError("sketch size must be at least 1 and oversampling non-negative");
  }
}

VelocityEstimate df_velocity(const models::PdeProblem& problem, const models::Parametrization& model,
                             const Vector& theta, double t, const models::Points& points,
                             const SolverConfig& solver, const linalg::Truncation& truncation,
                             std::uint64_t stream) {
  const auto system = models::assemble_system(problem, model, theta, t, points);

  VelocityEstimate out;
  switch (solver.kind) {
    case SolverKind::Tsvd:
      out.lsq = linalg::solve_min_norm(system.jacobian, system.rhs, truncation);
      break;
    case SolverKind::Tikhonov: {
      if (!(solver.gamma > 0.0)) throw InputError("gamma must be positive");
      const auto factors = linalg::qr_svd_factors(system.jacobian, system.rhs);
      out.lsq = linalg::truncate(factors, truncation);
      out.lsq.eta_bar = linalg::tikhonov_filter(factors, solver.gamma);
      break;
    }
    case SolverKind::Rsvd: {
      linalg::SketchConfig sketch = solver.sketch;
      sketch.seed = mix_seed(sketch.seed, stream);
      out.lsq = linalg::solve_min_norm_randomized(system.jacobian, system.rhs, truncation, sketch);
      break;
    }
  }
  out.residual_norm = (system.jacobian * out.lsq.eta_bar - system.rhs).norm();
  return out;
}

DiracFrenkelField::DiracFrenkelField(const models::PdeProblem& problem, const models::Parametrization& model,
                                     models::Points points, SolverConfig solver, linalg::Truncation truncation)
    : problem_(problem), model_(model), points_(std::move(points)), solver_(solver), truncation_(truncation) {}

DiracFrenkelField::DiracFrenkelField(const models::PdeProblem& problem, const models::Parametrization& model,
                                     PointsProvider provider, SolverConfig solver, linalg::Truncation truncation)
    : problem_(problem), model_(model), provider_(std::move(provider)), solver_(solver), truncation_(truncation) {}

VelocityEstimate DiracFrenkelField::estimate(const Vector& theta, double t, std::uint64_t stream) const {
  if (points_.rows() == 0) throw InputError("no collocation points; begin_step was not called");
  return df_velocity(problem_, model_, theta, t, points_, solver_, truncation_, stream);
}

void DiracFrenkelField::begin_step(Index step, double t) {
  if (provider_) points_ = provider_(step, t);
}

namespace {

void fill_diagnostics(StepRecord& record, const VelocityEstimate& estimate) {
  record.residual_norm = estimate.residual_norm;
  record.retained_rank = estimate.lsq.retained_rank();
  record.sigma_max = estimate.lsq.sigma_max;
  record.sigma_min_retained = estimate.lsq.sigma_min_retained();
}

std::uint64_t stream_id(Index step, int stage) { return static_cast<std::uint64_t>(step) * 4 + stage; }

}  // namespace

StepRecord dfo_euler_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step) {
  const double beta = cfg.beta_for(h);
  const auto estimate = field.estimate(state.theta, state.t, stream_id(step, 0));
  const Vector& eta = estimate.lsq.eta_bar;

  state.momentum = beta * state.momentum + (1.0 - beta) * eta;
  const Vector projected = linalg::project_complement(estimate.lsq.basis, state.momentum);
  if (cfg.lambda != 0.0) {
    state.theta += h * (eta + cfg.lambda * projected);
  } else {
    state.theta += h * eta;
  }
  state.t += h;

  StepRecord record;
  record.step = step;
  record.t = state.t;
  record.theta = state.theta;
  fill_diagnostics(record, estimate);
  record.momentum_norm = state.momentum.norm();
  record.projected_momentum_norm = projected.norm();
  return record;
}

StepRecord dfo_rk4_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step) {
  const double beta = cfg.beta_for(h);
  const std::array<double, 4> nodes{0.0, 0.5, 0.5, 1.0};
  const std::array<double, 4> sub_steps{h, 0.5 * h, 0.5 * h, h};

  const Vector theta0 = state.theta;
  std::array<Vector, 4> k;
  Vector momentum = state.momentum;
  Vector projected;
  StepRecord record;

  for (int s = 0; s < 4; ++s) {
    const Vector stage_theta = s == 0 ? theta0 : Vector(theta0 + nodes[s] * h * k[s - 1]);
    const auto estimate = field.estimate(stage_theta, state.t + nodes[s] * h, stream_id(step, s));
    const Vector& eta = estimate.lsq.eta_bar;
    if (s == 0) fill_diagnostics(record, estimate);

    momentum = beta * momentum + (1.0 - beta) * (sub_steps[s] * eta);
    projected = linalg::project_complement(estimate.lsq.basis, momentum);
    if (cfg.lambda != 0.0) {
      k[s] = eta + (cfg.lambda / sub_steps[s]) * projected;
    } else {
      k[s] = eta;
    }
  }

  state.theta = theta0 + (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
  state.momentum = std::move(momentum);
  state.t += h;

  record.step = step;
  record.t = state.t;
  record.theta = state.theta;
  record.momentum_norm = state.momentum.norm();
  record.projected_momentum_norm = projected.norm();
  return record;
}

StepRecord dfo_step(VelocityField& field, DfoState& state, double h, const StepConfig& cfg, Index step) {
  switch (cfg.scheme) {
    case Scheme::SemiImplicitEuler:
      return dfo_euler_step(field, state, h, cfg, step);
    case Scheme::Rk4StageEma:
      return dfo_rk4_step(field, state, h, cfg, step);
  }
  throw ConfigError("unknown scheme");
}

StepPlan plan_steps(double T, double dt) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("final time must be non-negative and finite");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  StepPlan plan;
  if (T == 0.0) return plan;
  const double ratio = T / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) {
    plan.full_steps = static_cast<Index>(nearest);
    return plan;
  }
  plan.full_steps = static_cast<Index>(std::floor(ratio));
  plan.last_step = T - static_cast<double>(plan.full_steps) * dt;
  return plan;
}

Trajectory integrate(VelocityField& field, const Vector& theta0, const StepConfig& cfg, double T,
                     const IntegrateOptions& options) {
  cfg.validate();
  if (theta0.size() != field.param_count()) throw InputError("initial parameters have the wrong length");
  if (!theta0.allFinite()) throw InputError("initial parameters contain non-finite entries");

  const StepPlan plan = plan_steps(T, cfg.dt);
  Trajectory out;
  out.final_state.theta = theta0;
  out.final_state.momentum = Vector::Zero(theta0.size());
  out.final_state.t = 0.0;
  if (options.keep_records) out.records.reserve(static_cast<std::size_t>(plan.total_steps()));

  DfoState& state = out.final_state;
  for (Index step = 0; step < plan.total_steps(); ++step) {
    const bool partial = step == plan.full_steps;
    const double h = partial ? plan.last_step : cfg.dt;
    // Restart from k * dt so the clock does not accumulate rounding.
    state.t = static_cast<double>(step) * cfg.dt;
    field.begin_step(step, state.t);

    StepRecord record = dfo_step(field, state, h, cfg, step);
    if (step + 1 == plan.total_steps()) {
      state.t = T;
      record.t = T;
    }
    record.partial = partial;
    if (!state.theta.allFinite()) throw IntegrationError("parameters became non-finite", static_cast<std::size_t>(step));

    if (options.observer) options.observer(record, state);
    if (options.keep_records) out.records.push_back(std::move(record));
  }
  return out;
}

}  // namespace dfo::dynamics
