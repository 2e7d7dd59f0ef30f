#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dfo/dynamics.hpp"
#include "dfo/errors.hpp"
#include "dfo/rng.hpp"

using namespace dfo::dynamics;
using dfo::models::Points;

namespace {

constexpr double kPi = std::numbers::pi;

// Returns the same velocity and basis everywhere.
class ConstantField final : public VelocityField {
 public:
  ConstantField(Vector eta, Matrix basis) {
    estimate_.lsq.eta_bar = std::move(eta);
    estimate_.lsq.basis = std::move(basis);
  }
  Index param_count() const override { return estimate_.lsq.eta_bar.size(); }
  VelocityEstimate estimate(const Vector&, double, std::uint64_t) const override { return estimate_; }

 private:
  VelocityEstimate estimate_;
};

// theta' = rate * theta with a full-rank basis.
class LinearField final : public VelocityField {
 public:
  LinearField(Index p, double rate) : p_(p), rate_(rate) {}
  Index param_count() const override { return p_; }
  VelocityEstimate estimate(const Vector& theta, double, std::uint64_t) const override {
    VelocityEstimate e;
    e.lsq.eta_bar = rate_ * theta;
    e.lsq.basis = Matrix::Identity(p_, p_);
    return e;
  }

 private:
  Index p_;
  double rate_;
};

// u = theta_1 g_1 + theta_2 g_2 with g_1, g_2 orthonormal on the uniform grid
// of n points over [0, 2 pi).
class LinearSineModel final : public dfo::models::Parametrization {
 public:
  explicit LinearSineModel(Index n) : scale_(std::sqrt(2.0 / static_cast<double>(n))) {}
  Index param_count() const override { return 2; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  dfo::models::ModelEvaluation evaluate_batch(const Vector& theta, const Points& points,
                                              unsigned request) const override {
    dfo::models::ModelEvaluation out;
    const Vector s = scale_ * points.col(0).array().sin();
    const Vector c = scale_ * points.col(0).array().cos();
    if (request & dfo::models::kValues) out.values = theta(0) * s + theta(1) * c;
    if (request & dfo::models::kParamJacobian) {
      out.param_jacobian.resize(points.rows(), 2);
      out.param_jacobian << s, c;
    }
    if (request & dfo::models::kSpatialGradient) out.spatial_gradient.push_back(theta(0) * c - theta(1) * s);
    return out;
  }

 private:
  double scale_;
};

Points uniform_points(Index n, double lo, double hi) {
  Points p(n, 1);
  for (Index i = 0; i < n; ++i) p(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  return p;
}

StepConfig euler_config(double dt, double tau, double lambda) {
  StepConfig cfg;
  cfg.dt = dt;
  cfg.tau = tau;
  cfg.lambda = lambda;
  return cfg;
}

}  // namespace

TEST(StepConfig, BetaFromTau) {
  const StepConfig cfg = euler_config(0.1, 0.4, 0.0);
  EXPECT_DOUBLE_EQ(cfg.beta_for(0.1), 0.4 / 0.5);
  EXPECT_DOUBLE_EQ(cfg.beta_for(0.05), 0.4 / 0.45);
}

TEST(StepConfig, ExplicitBetaImpliesTauForShortStep) {
  StepConfig cfg = euler_config(0.1, 1.0, 0.0);
  cfg.beta = 0.8;
  EXPECT_EQ(cfg.beta_for(0.1), 0.8);
  const double tau = 0.1 * 0.8 / 0.2;
  EXPECT_NEAR(cfg.beta_for(0.05), tau / (tau + 0.05), 1e-15);
}

TEST(StepConfig, ValidateRejectsBadValues) {
  EXPECT_THROW(euler_config(0.0, 1.0, 0.0).validate(), dfo::ConfigError);
  EXPECT_THROW(euler_config(0.1, -1.0, 0.0).validate(), dfo::ConfigError);
  EXPECT_THROW(euler_config(0.1, 1.0, -1.0).validate(), dfo::ConfigError);
  StepConfig cfg = euler_config(0.1, 1.0, 0.0);
  cfg.beta = 1.0;
  EXPECT_THROW(cfg.validate(), dfo::ConfigError);
  cfg = euler_config(0.1, 1.0, 0.0);
  cfg.truncation.eps_rel = 1.0;
  EXPECT_THROW(cfg.validate(), dfo::ConfigError);
  EXPECT_NO_THROW(euler_config(0.1, 1.0, 2.0).validate());
}

TEST(DfVelocity, AdvReactCollapseGivesZero) {
  const dfo::models::AdvReactProblem problem(1.0, 1.0);
  const dfo::models::AdvReactSine model;
  const auto e = df_velocity(problem, model, Vector{{kPi / 2, kPi / 2}}, kPi / 2, uniform_points(512, 0.0, 2 * kPi),
                             SolverConfig{}, dfo::linalg::Truncation{1e-10, 1e-3});
  EXPECT_EQ(e.lsq.retained_rank(), 0);
  EXPECT_EQ(e.lsq.eta_bar, Vector::Zero(2));
}

TEST(DfVelocity, WaveBeforeCollisionFollowsExactVelocity) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model;
  const auto e = df_velocity(problem, model, model.exact_parameters(1.0), 1.0, uniform_points(151, -12.0, 12.0),
                             SolverConfig{}, dfo::linalg::Truncation{1e-6, 0.0});
  EXPECT_EQ(e.lsq.retained_rank(), 4);
  EXPECT_LE((e.lsq.eta_bar - Vector{{1.0, -1.0, 1.0, -1.0}}).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(DfVelocity, LinearModelIsGalerkinProjection) {
  const Index n = 64;
  const LinearSineModel model(n);
  const dfo::models::AdvReactProblem problem(0.7, 1.3);
  const Points x = uniform_points(n, 0.0, 2 * kPi);
  const Vector theta{{0.4, -1.1}};
  const double t = 0.8;
  const auto e = df_velocity(problem, model, theta, t, x, SolverConfig{}, dfo::linalg::Truncation{});
  const auto ev = model.evaluate_batch(theta, x, dfo::models::kParamJacobian);
  const Vector F = problem.rhs(model, theta, t, x);
  EXPECT_NEAR(e.lsq.eta_bar(0), ev.param_jacobian.col(0).dot(F), 1e-13);
  EXPECT_NEAR(e.lsq.eta_bar(1), ev.param_jacobian.col(1).dot(F), 1e-13);
}

TEST(DfVelocity, TikhonovKeepsTruncatedBasis) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model;
  const Vector theta{{0.0, 0.0, 0.0, 0.0}};
  const Points x = uniform_points(151, -12.0, 12.0);
  SolverConfig tik;
  tik.kind = SolverKind::Tikhonov;
  tik.gamma = 1e-8;
  const auto a = df_velocity(problem, model, theta, 2.0, x, tik, dfo::linalg::Truncation{1e-6, 0.0});
  const auto b = df_velocity(problem, model, theta, 2.0, x, SolverConfig{}, dfo::linalg::Truncation{1e-6, 0.0});
  EXPECT_EQ(a.lsq.retained_rank(), b.lsq.retained_rank());
  EXPECT_LT(a.lsq.retained_rank(), 4);
  const auto sys = dfo::models::assemble_system(problem, model, theta, 2.0, x);
  EXPECT_EQ(a.lsq.eta_bar, dfo::linalg::solve_tikhonov(sys.jacobian, sys.rhs, 1e-8));
}

TEST(DfVelocity, RandomizedStreamsAreDeterministic) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model(0.2, 1.0);
  SolverConfig rsvd;
  rsvd.kind = SolverKind::Rsvd;
  rsvd.sketch = {2, 1, 77};
  const Points x = uniform_points(151, -12.0, 12.0);
  const Vector theta = model.exact_parameters(0.5);
  const auto a = df_velocity(problem, model, theta, 0.5, x, rsvd, {}, 5);
  const auto b = df_velocity(problem, model, theta, 0.5, x, rsvd, {}, 5);
  const auto c = df_velocity(problem, model, theta, 0.5, x, rsvd, {}, 6);
  EXPECT_EQ(a.lsq.eta_bar, b.lsq.eta_bar);
  EXPECT_NE(a.lsq.eta_bar, c.lsq.eta_bar);
}

TEST(EulerStep, ZeroLambdaIsPlainDfStep) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model;
  DiracFrenkelField field(problem, model, uniform_points(151, -12.0, 12.0), SolverConfig{},
                          dfo::linalg::Truncation{5e-4, 0.0});
  DfoState state{Vector{{-0.01, 0.02, -0.03, 0.01}}, Vector::Constant(4, 0.3), 1.99};
  const Vector expected = state.theta + 1e-3 * field.estimate(state.theta, state.t, 0).lsq.eta_bar;
  dfo_euler_step(field, state, 1e-3, euler_config(1e-3, 0.5, 0.0));
  EXPECT_EQ(state.theta, expected);
}

TEST(EulerStep, ConstantVelocityGeometricSeries) {
  const Vector eta{{1.0, -2.0, 0.5}};
  ConstantField field(eta, Matrix(3, 0));
  const StepConfig cfg = euler_config(0.1, 0.3, 0.0);
  const double beta = cfg.beta_for(0.1);
  DfoState state{Vector::Zero(3), Vector::Zero(3), 0.0};
  for (int k = 1; k <= 25; ++k) {
    dfo_euler_step(field, state, 0.1, cfg, k - 1);
    EXPECT_LE((state.momentum - (1.0 - std::pow(beta, k)) * eta).norm(), 1e-14);
  }
}

TEST(EulerStep, FullRankIgnoresMomentum) {
  ConstantField full(Vector{{1.0, 2.0}}, Matrix::Identity(2, 2));
  DfoState a{Vector::Zero(2), Vector{{5.0, -3.0}}, 0.0};
  DfoState b = a;
  dfo_euler_step(full, a, 0.1, euler_config(0.1, 0.5, 3.0));
  dfo_euler_step(full, b, 0.1, euler_config(0.1, 0.5, 0.0));
  EXPECT_EQ(a.theta, b.theta);
}

TEST(EulerStep, RankDeficientInjectsProjectedMomentum) {
  Matrix basis = Matrix::Zero(2, 1);
  basis(0, 0) = 1.0;
  ConstantField field(Vector{{1.0, 0.0}}, basis);
  DfoState state{Vector::Zero(2), Vector{{0.0, 2.0}}, 0.0};
  const StepConfig cfg = euler_config(0.1, 0.1, 0.5);
  const auto record = dfo_euler_step(field, state, 0.1, cfg);
  const double beta = 0.5;
  EXPECT_DOUBLE_EQ(state.momentum(1), beta * 2.0);
  EXPECT_DOUBLE_EQ(state.theta(1), 0.1 * 0.5 * beta * 2.0);
  EXPECT_DOUBLE_EQ(record.projected_momentum_norm, beta * 2.0);
}

TEST(EulerStep, EmaIsConvexCombination) {
  dfo::Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector eta = Vector::NullaryExpr(5, [&] { return rng.normal(); });
    const Vector m0 = Vector::NullaryExpr(5, [&] { return rng.normal(); });
    const double dt = std::pow(10.0, rng.uniform(-4.0, 0.0));
    const double tau = std::pow(10.0, rng.uniform(-3.0, 1.0));
    ConstantField field(eta, Matrix(5, 0));
    DfoState state{Vector::Zero(5), m0, 0.0};
    const StepConfig cfg = euler_config(dt, tau, 0.0);
    dfo_euler_step(field, state, dt, cfg);
    const double beta = cfg.beta_for(dt);
    ASSERT_GT(beta, 0.0);
    ASSERT_LT(beta, 1.0);
    EXPECT_EQ(state.momentum, beta * m0 + (1.0 - beta) * eta);
  }
}

TEST(Rk4Step, LinearDecayMatchesTaylorPolynomial) {
  LinearField field(1, -1.0);
  for (double h : {0.5, 0.1, 0.01}) {
    DfoState state{Vector::Ones(1), Vector::Zero(1), 0.0};
    StepConfig cfg = euler_config(h, 1.0, 0.0);
    cfg.scheme = Scheme::Rk4StageEma;
    dfo_rk4_step(field, state, h, cfg);
    const double taylor = 1.0 - h + h * h / 2.0 - h * h * h / 6.0 + h * h * h * h / 24.0;
    EXPECT_NEAR(state.theta(0), taylor, 1e-15);
  }
}

TEST(Rk4Step, FullRankStagesAverageIncrements) {
  LinearField field(2, -0.7);
  const double h = 0.2;
  StepConfig cfg = euler_config(h, 0.3, 2.0);
  cfg.scheme = Scheme::Rk4StageEma;
  DfoState dfo{Vector{{1.0, -0.5}}, Vector::Zero(2), 0.0};
  DfoState df = dfo;
  StepConfig plain = cfg;
  plain.lambda = 0.0;
  dfo_rk4_step(field, dfo, h, cfg);
  dfo_rk4_step(field, df, h, plain);
  EXPECT_EQ(dfo.theta, df.theta);

  const double beta = cfg.beta_for(h);
  const Vector th0{{1.0, -0.5}};
  const Vector k1 = -0.7 * th0;
  const Vector k2 = -0.7 * (th0 + 0.5 * h * k1);
  const Vector k3 = -0.7 * (th0 + 0.5 * h * k2);
  const Vector k4 = -0.7 * (th0 + h * k3);
  Vector m = Vector::Zero(2);
  m = beta * m + (1.0 - beta) * (h * k1);
  m = beta * m + (1.0 - beta) * (0.5 * h * k2);
  m = beta * m + (1.0 - beta) * (0.5 * h * k3);
  m = beta * m + (1.0 - beta) * (h * k4);
  EXPECT_LE((dfo.momentum - m).norm(), 1e-15);
}

TEST(Rk4Step, AgreesWithEulerToSecondOrder) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model;
  DiracFrenkelField field(problem, model, uniform_points(151, -12.0, 12.0), SolverConfig{},
                          dfo::linalg::Truncation{1e-6, 0.0});
  auto gap = [&](double h) {
    StepConfig cfg = euler_config(h, 0.5, 1.0);
    DfoState euler{Vector{{-1.6, 1.7, -1.5, 1.4}}, Vector::Zero(4), 0.0};
    DfoState rk4 = euler;
    dfo_euler_step(field, euler, h, cfg);
    cfg.scheme = Scheme::Rk4StageEma;
    dfo_rk4_step(field, rk4, h, cfg);
    return (euler.theta - rk4.theta).norm();
  };
  const double coarse = gap(2e-2), fine = gap(1e-2);
  EXPECT_GT(coarse / fine, 3.5);
  EXPECT_LT(coarse / fine, 4.5);
}

TEST(PlanSteps, ExactAndPartial) {
  EXPECT_EQ(plan_steps(0.0, 0.1).total_steps(), 0);
  const auto exact = plan_steps(4.0, 3e-4);
  EXPECT_EQ(exact.full_steps, 13333);
  EXPECT_GT(exact.last_step, 0.0);
  const auto even = plan_steps(1.0, 1e-4);
  EXPECT_EQ(even.full_steps, 10000);
  EXPECT_EQ(even.last_step, 0.0);
  const auto partial = plan_steps(0.25, 0.1);
  EXPECT_EQ(partial.full_steps, 2);
  EXPECT_NEAR(partial.last_step, 0.05, 1e-15);
  EXPECT_THROW(plan_steps(-1.0, 0.1), dfo::ConfigError);
}

TEST(Integrate, ZeroFinalTimeKeepsTheta) {
  ConstantField field(Vector::Ones(2), Matrix(2, 0));
  const Vector theta0{{0.3, 0.4}};
  const auto traj = integrate(field, theta0, euler_config(0.1, 1.0, 1.0), 0.0);
  EXPECT_EQ(traj.final_state.theta, theta0);
  EXPECT_TRUE(traj.records.empty());
}

TEST(Integrate, PartialFinalStepRecomputesBeta) {
  ConstantField field(Vector::Ones(1), Matrix(1, 0));
  const StepConfig cfg = euler_config(0.1, 0.2, 0.0);
  const auto traj = integrate(field, Vector::Zero(1), cfg, 0.25);
  ASSERT_EQ(traj.records.size(), 3u);
  EXPECT_TRUE(traj.records.back().partial);
  EXPECT_FALSE(traj.records.front().partial);
  EXPECT_EQ(traj.records.back().t, 0.25);
  const double b1 = cfg.beta_for(0.1), b2 = cfg.beta_for(0.05);
  EXPECT_NEAR(traj.final_state.momentum(0), 1.0 - b1 * b1 * b2, 1e-15);
  EXPECT_NEAR(traj.final_state.theta(0), 0.25, 1e-15);
}

TEST(Integrate, NonFiniteThetaReportsStep) {
  LinearField field(1, 1e200);
  try {
    integrate(field, Vector::Ones(1), euler_config(1.0, 1.0, 0.0), 5.0);
    FAIL() << "expected IntegrationError";
  } catch (const dfo::IntegrationError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Integrate, ZeroLambdaTrajectoriesAreBitwiseDf) {
  const dfo::models::WaveProblem problem;
  const dfo::models::WaveTwoGaussian model;
  DiracFrenkelField field(problem, model, uniform_points(151, -12.0, 12.0), SolverConfig{},
                          dfo::linalg::Truncation{5e-4, 0.0});
  const Vector theta0 = model.exact_parameters(1.9);
  const double dt = 1e-2, T = 0.3;
  for (Scheme scheme : {Scheme::SemiImplicitEuler, Scheme::Rk4StageEma}) {
    StepConfig cfg = euler_config(dt, 0.5, 0.0);
    cfg.scheme = scheme;
    const auto traj = integrate(field, theta0, cfg, T);

    Vector theta = theta0;
    for (Index k = 0; k < plan_steps(T, dt).full_steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      auto eta = [&](const Vector& th, double ts) { return field.estimate(th, ts, 0).lsq.eta_bar; };
      if (scheme == Scheme::SemiImplicitEuler) {
        theta += dt * eta(theta, t);
      } else {
        const Vector k1 = eta(theta, t);
        const Vector k2 = eta(theta + 0.5 * dt * k1, t + 0.5 * dt);
        const Vector k3 = eta(theta + 0.5 * dt * k2, t + 0.5 * dt);
        const Vector k4 = eta(theta + 1.0 * dt * k3, t + dt);
        theta = theta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
    EXPECT_EQ(traj.final_state.theta, theta);
  }
}

TEST(Integrate, AdvReactDfTracksExactBeforeCollapse) {
  const dfo::models::AdvReactProblem problem(1.0, 1.0);
  const dfo::models::AdvReactSine model;
  DiracFrenkelField field(problem, model, uniform_points(512, 0.0, 2 * kPi), SolverConfig{},
                          dfo::linalg::Truncation{1e-10, 1e-3});
  const StepConfig cfg = euler_config(1e-4, 0.05, 0.0);
  double worst = 0.0;
  IntegrateOptions opts;
  opts.keep_records = false;
  opts.observer = [&](const StepRecord& r, const DfoState& s) {
    if (r.t <= kPi / 2 - 0.01) worst = std::max(worst, (s.theta.array() - r.t).abs().maxCoeff());
  };
  integrate(field, Vector::Zero(2), cfg, kPi / 2, opts);
  EXPECT_LE(worst, 1e-3);
}

TEST(Integrate, PointsProviderCalledOncePerStep) {
  const dfo::models::AdvReactProblem problem(1.0, 1.0);
  const dfo::models::AdvReactSine model;
  std::vector<Index> calls;
  DiracFrenkelField field(
      problem, model,
      [&](Index step, double) {
        calls.push_back(step);
        return uniform_points(32, 0.0, 2 * kPi);
      },
      SolverConfig{}, dfo::linalg::Truncation{});
  StepConfig cfg = euler_config(0.01, 0.1, 0.0);
  cfg.scheme = Scheme::Rk4StageEma;
  integrate(field, Vector{{0.1, 0.1}}, cfg, 0.05);
  EXPECT_EQ(calls, (std::vector<Index>{0, 1, 2, 3, 4}));
}
