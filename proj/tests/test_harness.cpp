#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unistd.h>

#include "dfo/config.hpp"
#include "dfo/errors.hpp"
#include "dfo/experiment.hpp"
#include "dfo/fit.hpp"
#include "dfo/presets.hpp"
#include "dfo/reference.hpp"

namespace fs = std::filesystem;
using namespace dfo::harness;
using dfo::models::Points;
using dfo::reference::ReferenceField;
using dfo::reference::UniformGrid;

namespace {

constexpr double kPi = std::numbers::pi;

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("dfo_test_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// u = theta_1 g(x) with g(x) = sin(x) on a handful of points.
class ScaledSine final : public dfo::models::Parametrization {
 public:
  Index param_count() const override { return 1; }
  Index spatial_dim() const override { return 1; }
  Index output_dim() const override { return 1; }
  dfo::models::ModelEvaluation evaluate_batch(const Vector& theta, const Points& points,
                                              unsigned request) const override {
    dfo::models::ModelEvaluation out;
    const Vector g = points.col(0).array().sin();
    if (request & dfo::models::kValues) out.values = theta(0) * g;
    if (request & dfo::models::kParamJacobian) out.param_jacobian = g;
    if (request & dfo::models::kSpatialGradient) out.spatial_gradient.push_back(theta(0) * points.col(0).array().cos());
    return out;
  }
};

Points line(Index n, double lo, double hi) {
  Points p(n, 1);
  for (Index i = 0; i < n; ++i) p(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  return p;
}

std::string short_advreact(const std::string& name, double t_final, double lambda, const std::string& dir) {
  std::ostringstream s;
  s << "[experiment]\nname = \"" << name << "\"\nproblem = \"advreact\"\nt_final = " << t_final << "\n"
    << "[dynamics]\ndt = 1e-3\ntau = 0.05\nlambda = " << lambda << "\neps_rel = 1e-10\nabs_tol = 1e-3\n"
    << "[collocation]\ngrid = [64]\n[reference]\ngrid = [64]\n[output]\nevery = 10\ndir = \"" << dir << "\"\n";
  return s.str();
}

ReferenceField field_1d(const Vector& values) {
  return {UniformGrid::periodic_1d(values.size(), 0.0, 1.0), 0.0, values};
}

}  // namespace

// ---------------------------------------------------------------------------
// Fitting

TEST(Fit, ExactToyNeedsNoIterations) {
  ExperimentConfig cfg = default_config(ProblemKind::Wave);
  const Experiment exp(cfg);
  const auto& model = dynamic_cast<const dfo::models::WaveTwoGaussian&>(exp.model());
  const Points pts = exp.grid(cfg.initial.fit_grid).points();
  const Matrix target = exp.initial_condition(pts);
  const Vector theta0 = model.exact_parameters(0.0);
  EXPECT_LE(mse_loss(model, theta0, pts, target), 1e-20);
  FitConfig fit;
  fit.target_loss = 1e-20;
  const auto res = fit_initial_condition(model, target, fit, pts, theta0);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_EQ(res.theta, theta0);
}

TEST(Fit, LinearModelReachesOptimum) {
  const ScaledSine model;
  const Points pts = line(32, 0.0, 2 * kPi);
  FitConfig fit;
  fit.learning_rate = 1e-2;
  fit.iterations = 5000;
  const auto res = fit_initial_condition(
      model, [](const Vector& x) { return Vector::Constant(1, 2.0 * std::sin(x(0))); }, fit, pts, Vector::Zero(1));
  EXPECT_NEAR(res.theta(0), 2.0, 1e-4);
  EXPECT_LE(res.iterations, 5000);
}

TEST(Fit, DeterministicUnderSeed) {
  dfo::models::MlpArchitecture arch;
  arch.embed_width = 4;
  arch.hidden = {6};
  arch.periods = {2 * kPi};
  const dfo::models::PeriodicMLP model(arch);
  const Points pts = line(40, 0.0, 2 * kPi);
  Matrix target = pts.array().sin();
  FitConfig fit;
  fit.iterations = 200;
  const auto a = fit_initial_condition(model, target, fit, pts, model.initial_parameters(5));
  const auto b = fit_initial_condition(model, target, fit, pts, model.initial_parameters(5));
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_LT(a.loss, mse_loss(model, model.initial_parameters(5), pts, target));
}

TEST(Fit, DivergenceReportsIteration) {
  const ScaledSine model;
  FitConfig fit;
  fit.learning_rate = 1e200;
  fit.iterations = 10;
  try {
    fit_initial_condition(model, Matrix(Matrix::Ones(8, 1)), fit, line(8, 0.1, 3.0), Vector::Zero(1));
    FAIL() << "expected FitError";
  } catch (const dfo::FitError& e) {
    EXPECT_EQ(e.iteration(), 1u);
  }
}

TEST(Fit, RejectsZeroIterations) {
  FitConfig fit;
  fit.iterations = 0;
  EXPECT_THROW(fit.validate(), dfo::ConfigError);
}

// ---------------------------------------------------------------------------
// Metrics and files

TEST(RelativeL2, Examples) {
  const Vector truth{{1.0, -2.0, 0.5, 3.0}};
  EXPECT_EQ(relative_l2(field_1d(truth), field_1d(truth)), 0.0);
  EXPECT_DOUBLE_EQ(relative_l2(field_1d(2.0 * truth), field_1d(truth)), 1.0);
  const double M = static_cast<double>(truth.size());
  Vector bumped = truth;
  bumped(0) += truth.norm() / std::sqrt(M);
  EXPECT_NEAR(relative_l2(field_1d(bumped), field_1d(truth)), 1.0 / std::sqrt(M), 1e-12);
}

TEST(RelativeL2, Errors) {
  EXPECT_THROW(relative_l2(field_1d(Vector::Ones(3)), field_1d(Vector::Zero(3))), dfo::NumericalError);
  EXPECT_THROW(relative_l2(field_1d(Vector::Ones(3)), field_1d(Vector::Ones(4))), dfo::InputError);
}

TEST(MetricsCsv, SchemaAndColumns) {
  MetricsRow row{0.5, 0.25, 1e-3, 3, 2.0, 0.125, 0.75, 0.0};
  EXPECT_EQ(metrics_csv({row}),
            "schema=1\n"
            "t,rel_l2_error,residual_norm,retained_rank,sigma_max,sigma_min_retained,momentum_norm,wall_time_ms\n"
            "0.5,0.25,0.001,3,2,0.125,0.75,0\n");
}

TEST(AtomicWrite, CreatesAndReplaces) {
  TempDir dir("atomic");
  const fs::path target = dir.path() / "nested" / "metrics.csv";
  write_file_atomic(target, "first\n");
  EXPECT_EQ(slurp(target), "first\n");
  write_file_atomic(target, "second\n");
  EXPECT_EQ(slurp(target), "second\n");
  for (const auto& entry : fs::directory_iterator(target.parent_path())) {
    EXPECT_EQ(entry.path().filename(), "metrics.csv");
  }
}

TEST(AtomicWrite, FailureLeavesNoPartialFile) {
  TempDir dir("atomic_fail");
  const fs::path target = dir.path() / "occupied";
  fs::create_directories(target / "child");
  EXPECT_THROW(write_file_atomic(target, "data"), dfo::IoError);
  EXPECT_TRUE(fs::is_directory(target));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(ThetaFile, RoundTripIsExact) {
  TempDir dir("theta");
  const Vector theta{{kPi, -1e-300, 0.1, 12345.678901234567}};
  write_file_atomic(dir.path() / "theta.txt", format_theta(theta));
  EXPECT_EQ(read_theta_file(dir.path() / "theta.txt"), theta);
  write_text(dir.path() / "bad.txt", "1.0 abc\n");
  EXPECT_THROW(read_theta_file(dir.path() / "bad.txt"), dfo::InputError);
  EXPECT_THROW(read_theta_file(dir.path() / "missing.txt"), dfo::IoError);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, PresetsRoundTrip) {
  ASSERT_FALSE(presets().empty());
  for (const auto& preset : presets()) {
    const ExperimentConfig cfg = load_preset(preset.name);
    const ExperimentConfig again = parse_config(serialize_config(cfg));
    EXPECT_TRUE(cfg == again) << preset.name;
    EXPECT_EQ(serialize_config(again), serialize_config(cfg)) << preset.name;
  }
}

TEST(Config, RoundTripKeepsOptionalFields) {
  ExperimentConfig cfg = default_config(ProblemKind::Wave);
  cfg.dynamics.beta = 0.9375;
  cfg.dynamics.solver.kind = dfo::dynamics::SolverKind::Rsvd;
  cfg.dynamics.solver.sketch.sketch_size = 3;
  cfg.initial.mode = InitialMode::Given;
  cfg.initial.theta = {-2.0, 2.0, -2.0, 2.0 + 1e-15};
  cfg.output.dir = "out dir/with \"quotes\"";
  cfg.seeds = {11, 12, 13};
  cfg.fit.seed = 11;
  cfg.dynamics.solver.sketch.seed = 12;
  cfg.t_final = 0.1 + 0.2;
  EXPECT_TRUE(parse_config(serialize_config(cfg)) == cfg);
}

TEST(Config, PresetValuesMatchBenchmarkSetups) {
  const auto wave = load_preset("wave-collapse-dfo");
  EXPECT_EQ(wave.collocation.grid, std::vector<Index>{151});
  EXPECT_EQ(wave.dynamics.dt, 3e-4);
  EXPECT_EQ(wave.dynamics.tau, 0.5);
  EXPECT_EQ(wave.dynamics.lambda, 1.0);
  EXPECT_EQ(wave.t_final, 4.0);
  const Experiment exp(wave);
  EXPECT_EQ(exp.domain().lower[0], -12.0);
  EXPECT_EQ(exp.domain().upper[0], 12.0);

  for (const char* name : {"advreact-df", "advreact-dfo"}) {
    const auto adv = load_preset(name);
    EXPECT_EQ(adv.collocation.grid, std::vector<Index>{512});
    EXPECT_EQ(adv.dynamics.dt, 1e-4);
    EXPECT_EQ(adv.dynamics.tau, 0.05);
    EXPECT_EQ(adv.dynamics.truncation.abs_tol, 1e-3);
    EXPECT_EQ(adv.dynamics.truncation.eps_rel, 1e-10);
    EXPECT_EQ(adv.t_final, 6.0);
  }
  EXPECT_EQ(load_preset("advreact-dfo").dynamics.lambda, 1e-5);
  EXPECT_EQ(load_preset("advreact-df").dynamics.lambda, 0.0);
  EXPECT_NEAR(load_preset("wave-collapse-dfo-crossing").dynamics.lambda, 1.0 / (1.0 - std::exp(-4.0)), 1e-15);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("[experiment]\nname = \"x\"\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"heat\"\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"wave\"\n[dynamics]\ndtt = 1.0\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"wave\"\n[extra]\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"wave\"\n[dynamics]\ndt = \"fast\"\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"wave\"\n[dynamics]\ndt = -1.0\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment\n"), dfo::ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nproblem = \"wave\"\n[fit]\niterations = 0\n"), dfo::ConfigError);
}

TEST(Config, MissingFileIsIoError) {
  EXPECT_THROW(load_config_file("/nonexistent/dir/config.toml"), dfo::IoError);
}

TEST(Config, SeedOverrideFromEnvironment) {
  ExperimentConfig cfg = load_preset("transport2d-dfo");
  ::setenv("DFO_SEED", "42", 1);
  EXPECT_TRUE(apply_seed_override(cfg));
  ::unsetenv("DFO_SEED");
  EXPECT_EQ(cfg.seeds.init, 42u);
  EXPECT_EQ(cfg.seeds.sketch, 42u);
  EXPECT_EQ(cfg.seeds.collocation, 42u);
  EXPECT_EQ(cfg.fit.seed, 42u);
  EXPECT_EQ(cfg.dynamics.solver.sketch.seed, 42u);
  EXPECT_FALSE(apply_seed_override(cfg));
}

TEST(Config, UnknownPreset) { EXPECT_THROW(load_preset("no-such-preset"), dfo::ConfigError); }

// ---------------------------------------------------------------------------
// Runs

TEST(Run, ZeroFinalTimeWritesHeaderOnly) {
  TempDir dir("t0");
  ExperimentConfig cfg = parse_config(short_advreact("t0", 0.0, 0.0, dir.path().string()));
  const auto result = Experiment(cfg).run();
  EXPECT_TRUE(result.rows.empty());
  EXPECT_EQ(slurp(result.metrics_path), std::string("schema=1\n") + kMetricsHeader + "\n");
  EXPECT_EQ(read_theta_file(result.theta_path), result.theta_initial);
}

TEST(Run, RowsAtCadenceWithIncreasingTime) {
  TempDir dir("cadence");
  ExperimentConfig cfg = parse_config(short_advreact("cad", 0.105, 1e-2, dir.path().string()));
  const auto result = Experiment(cfg).run();
  ASSERT_EQ(result.rows.size(), 11u);
  EXPECT_NEAR(result.rows.front().t, 0.01, 1e-15);
  EXPECT_EQ(result.rows.back().t, 0.105);
  for (std::size_t i = 1; i < result.rows.size(); ++i) EXPECT_GT(result.rows[i].t, result.rows[i - 1].t);
  for (const auto& r : result.rows) {
    EXPECT_GE(r.rel_l2_error, 0.0);
    EXPECT_LT(r.rel_l2_error, 1e-2);
    EXPECT_EQ(r.wall_time_ms, 0.0);
  }
}

TEST(Run, ByteIdenticalRepeats) {
  TempDir dir("repeat");
  ExperimentConfig cfg = parse_config(short_advreact("rep", 0.3, 1e-2, ""));
  RunOptions a, b;
  a.output_dir = (dir.path() / "a").string();
  b.output_dir = (dir.path() / "b").string();
  const Experiment exp(cfg);
  exp.run(a);
  exp.run(b);
  EXPECT_EQ(slurp(dir.path() / "a" / "metrics.csv"), slurp(dir.path() / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir.path() / "a" / "theta_final.txt"), slurp(dir.path() / "b" / "theta_final.txt"));
}

TEST(Run, InitialParametersFromFile) {
  TempDir dir("file_init");
  write_text(dir.path() / "theta.txt", "0.25\n0.25\n");
  write_text(dir.path() / "cfg.toml",
             short_advreact("file", 0.0, 0.0, (dir.path() / "out").string()) + "[initial]\nmode = \"file\"\npath = \"theta.txt\"\n");
  const auto cfg = load_config_file((dir.path() / "cfg.toml").string());
  EXPECT_EQ(Experiment(cfg).initial_parameters(), (Vector{{0.25, 0.25}}));
}

TEST(Run, UniformCollocationIsSeeded) {
  ExperimentConfig cfg = default_config(ProblemKind::Transport2d);
  cfg.collocation.mode = CollocationMode::Uniform;
  cfg.collocation.count = 50;
  cfg.collocation.resample = true;
  cfg.seeds.collocation = 3;
  const Experiment exp(cfg);
  EXPECT_EQ(exp.collocation_points(4), exp.collocation_points(4));
  EXPECT_NE(exp.collocation_points(4), exp.collocation_points(5));
  const Points p = exp.collocation_points(0);
  EXPECT_GE(p.minCoeff(), -1.0);
  EXPECT_LT(p.maxCoeff(), 1.0);
}

TEST(RunFit, WritesInitialParameters) {
  TempDir dir("fit");
  ExperimentConfig cfg = default_config(ProblemKind::Transport2d);
  cfg.model.hidden = {8};
  cfg.model.embed_width = 6;
  cfg.initial.fit_grid = {16, 16};
  cfg.fit.iterations = 20;
  const auto fit = run_fit(cfg, dir.path().string());
  EXPECT_EQ(fit.iterations, 20);
  EXPECT_EQ(read_theta_file(dir.path() / "theta_initial.txt"), fit.theta);
}

// ---------------------------------------------------------------------------
// Compare

TEST(Compare, IdenticalConfigsGiveIdenticalColumns) {
  TempDir dir("compare");
  write_text(dir.path() / "first.toml", short_advreact("x", 0.1, 1e-2, ""));
  write_text(dir.path() / "second.toml", short_advreact("x", 0.1, 1e-2, ""));
  const auto rows = compare({(dir.path() / "first.toml").string(), (dir.path() / "second.toml").string()},
                            (dir.path() / "out").string());
  ASSERT_EQ(rows.size(), 20u);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].t, rows[i + 1].t);
    EXPECT_EQ(rows[i].method, "first");
    EXPECT_EQ(rows[i + 1].method, "second");
    EXPECT_EQ(rows[i].rel_l2_error, rows[i + 1].rel_l2_error);
  }
  const std::string csv = slurp(dir.path() / "out" / "compare.csv");
  EXPECT_EQ(csv.rfind("schema=1\nt,method,rel_l2_error\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "first" / "metrics.csv"));
}

TEST(Compare, Errors) {
  TempDir dir("compare_err");
  EXPECT_THROW(compare({}, dir.path().string()), dfo::InputError);
  write_text(dir.path() / "adv.toml", short_advreact("x", 0.1, 0.0, ""));
  write_text(dir.path() / "adv_long.toml", short_advreact("x", 0.2, 0.0, ""));
  write_text(dir.path() / "wave.toml", "[experiment]\nproblem = \"wave\"\nt_final = 0.1\n");
  EXPECT_THROW(compare({(dir.path() / "adv.toml").string(), (dir.path() / "wave.toml").string()}, dir.path().string()),
               dfo::InputError);
  EXPECT_THROW(
      compare({(dir.path() / "adv.toml").string(), (dir.path() / "adv_long.toml").string()}, dir.path().string()),
      dfo::InputError);
}
