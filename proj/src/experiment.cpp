#include "dfo/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "dfo/errors.hpp"
#include "dfo/rng.hpp"

namespace dfo::harness {
namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Metrics and files

double relative_l2(const reference::ReferenceField& approx, const reference::ReferenceField& truth) {
  if (!(approx.grid == truth.grid) || approx.values.rows() != truth.values.rows() ||
      approx.values.cols() != truth.values.cols()) {
    throw InputError("relative L2 error needs fields on the same grid");
  }
  const double denom = truth.values.norm();
  if (denom == 0.0) throw NumericalError("relative L2 error is undefined for a zero reference", 0);
  return (approx.values - truth.values).norm() / denom;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "schema=1\n";
  out += kMetricsHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += format_number(r.t) + ',' + format_number(r.rel_l2_error) + ',' + format_number(r.residual_norm) + ',' +
           std::to_string(r.retained_rank) + ',' + format_number(r.sigma_max) + ',' +
           format_number(r.sigma_min_retained) + ',' + format_number(r.momentum_norm) + ',' +
           format_number(r.wall_time_ms) + '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  const auto parent = path.parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent, ec);
    if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

std::string format_theta(const Vector& theta) {
  std::string out;
  for (Index i = 0; i < theta.size(); ++i) out += format_number(theta(i)) + '\n';
  return out;
}

Vector read_theta_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read parameter file " + path.string());
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw InputError("malformed value '" + token + "' in " + path.string());
    values.push_back(v);
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

double RunResult::time_averaged_error() const {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.rel_l2_error;
  return sum / static_cast<double>(rows.size());
}

double RunResult::max_error() const {
  double out = 0.0;
  for (const auto& r : rows) out = std::max(out, r.rel_l2_error);
  return out;
}

// ---------------------------------------------------------------------------
// Reference solutions at the evaluation grid

class ReferenceEvaluator {
 public:
  virtual ~ReferenceEvaluator() = default;
  /// Called with non-decreasing times.
  virtual reference::ReferenceField at(double t) = 0;
};

namespace {

class WaveReference final : public ReferenceEvaluator {
 public:
  WaveReference(reference::UniformGrid grid, double rho, double speed)
      : grid_(std::move(grid)), points_(grid_.points()), rho_(rho), speed_(speed) {}

  reference::ReferenceField at(double t) override {
    reference::ReferenceField out{grid_, t, Matrix(points_.rows(), 2)};
    for (Index i = 0; i < points_.rows(); ++i) {
      const auto s = reference::wave_exact(t, points_(i, 0), rho_, speed_);
      out.values(i, 0) = s.u;
      out.values(i, 1) = s.u_t;
    }
    return out;
  }

 private:
  reference::UniformGrid grid_;
  models::Points points_;
  double rho_;
  double speed_;
};

class AdvReactReference final : public ReferenceEvaluator {
 public:
  explicit AdvReactReference(reference::UniformGrid grid) : grid_(std::move(grid)), points_(grid_.points()) {}

  reference::ReferenceField at(double t) override {
    reference::ReferenceField out{grid_, t, Matrix(points_.rows(), 1)};
    for (Index i = 0; i < points_.rows(); ++i) out.values(i, 0) = reference::advreact_exact(t, points_(i, 0));
    return out;
  }

 private:
  reference::UniformGrid grid_;
  models::Points points_;
};

class TransportReference final : public ReferenceEvaluator {
 public:
  TransportReference(const reference::FdConfig& cfg, const models::SeparableFlow& flow,
                     const reference::GaussianBump& bump)
      : solver_(cfg, flow) {
    solver_.set_state(bump.sample(reference::UniformGrid::periodic_2d(cfg.nx, cfg.ny)));
  }

  reference::ReferenceField at(double t) override {
    solver_.advance_to(t);
    return solver_.snapshot();
  }

 private:
  reference::FdTransport solver_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Experiment

Experiment::Experiment(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  switch (config_.problem.kind) {
    case ProblemKind::Wave:
      problem_ = std::make_unique<models::WaveProblem>();
      break;
    case ProblemKind::AdvReact:
      problem_ = std::make_unique<models::AdvReactProblem>(config_.problem.speed, config_.problem.kappa);
      break;
    case ProblemKind::Transport2d:
      problem_ = std::make_unique<models::TransportProblem>(config_.problem.flow);
      break;
  }
  domain_ = problem_->domain();

  switch (config_.model.kind) {
    case ModelKind::WaveTwoGaussian:
      model_ = std::make_unique<models::WaveTwoGaussian>(config_.model.rho, config_.model.speed);
      break;
    case ModelKind::AdvReactSine:
      model_ = std::make_unique<models::AdvReactSine>();
      break;
    case ModelKind::PeriodicMlp: {
      models::MlpArchitecture arch;
      arch.input_dim = domain_.dim();
      arch.embed_width = config_.model.embed_width;
      arch.hidden = config_.model.hidden;
      arch.output_dim = problem_->output_dim();
      arch.periods.clear();
      for (Index k = 0; k < domain_.dim(); ++k) arch.periods.push_back(domain_.upper[k] - domain_.lower[k]);
      arch.trainable_embedding = config_.model.trainable_embedding;
      model_ = std::make_unique<models::PeriodicMLP>(arch);
      break;
    }
  }
}

Experiment::~Experiment() = default;
Experiment::Experiment(Experiment&&) noexcept = default;
Experiment& Experiment::operator=(Experiment&&) noexcept = default;

reference::UniformGrid Experiment::grid(const std::vector<Index>& cells) const {
  if (static_cast<Index>(cells.size()) != domain_.dim()) throw InputError("grid dimension does not match the domain");
  return {cells, domain_.lower, domain_.upper};
}

Matrix Experiment::initial_condition(const models::Points& points) const {
  Matrix out(points.rows(), problem_->output_dim());
  for (Index i = 0; i < points.rows(); ++i) {
    switch (config_.problem.kind) {
      case ProblemKind::Wave: {
        const auto s = reference::wave_exact(0.0, points(i, 0), config_.model.rho, config_.model.speed);
        out(i, 0) = s.u;
        out(i, 1) = s.u_t;
        break;
      }
      case ProblemKind::AdvReact:
        out(i, 0) = reference::advreact_exact(0.0, points(i, 0));
        break;
      case ProblemKind::Transport2d:
        out(i, 0) = config_.problem.bump(points(i, 0), points(i, 1));
        break;
    }
  }
  return out;
}

namespace {

Vector exact_initial_parameters(const models::Parametrization& model) {
  if (const auto* wave = dynamic_cast<const models::WaveTwoGaussian*>(&model)) return wave->exact_parameters(0.0);
  if (dynamic_cast<const models::AdvReactSine*>(&model)) return Vector::Zero(2);
  throw ConfigError("the model has no exact initial parameters");
}

}  // namespace

FitResult Experiment::fit_initial() const {
  const auto points = grid(config_.initial.fit_grid).points();
  Vector start;
  if (const auto* mlp = dynamic_cast<const models::PeriodicMLP*>(model_.get())) {
    start = mlp->initial_parameters(config_.seeds.init);
  } else {
    start = exact_initial_parameters(*model_);
  }
  FitConfig fit = config_.fit;
  fit.seed = config_.seeds.init;
  return fit_initial_condition(*model_, initial_condition(points), fit, points, start);
}

Vector Experiment::initial_parameters(std::optional<FitResult>* fit_out) const {
  Vector theta;
  switch (config_.initial.mode) {
    case InitialMode::Exact:
      theta = exact_initial_parameters(*model_);
      break;
    case InitialMode::Fit: {
      FitResult fit = fit_initial();
      theta = fit.theta;
      if (fit_out) *fit_out = std::move(fit);
      break;
    }
    case InitialMode::File:
      theta = read_theta_file(config_.initial.path);
      break;
    case InitialMode::Given:
      theta = Eigen::Map<const Vector>(config_.initial.theta.data(), static_cast<Index>(config_.initial.theta.size()));
      break;
  }
  if (theta.size() != model_->param_count()) {
    throw ConfigError("initial parameters have length " + std::to_string(theta.size()) + ", model expects " +
                      std::to_string(model_->param_count()));
  }
  return theta;
}

models::Points Experiment::collocation_points(Index step) const {
  const auto& spec = config_.collocation;
  if (spec.mode == CollocationMode::Grid) return grid(spec.grid).points();
  Rng rng(mix_seed(config_.seeds.collocation, spec.resample ? static_cast<std::uint64_t>(step) : 0));
  models::Points out(spec.count, domain_.dim());
  for (Index i = 0; i < spec.count; ++i) {
    for (Index k = 0; k < domain_.dim(); ++k) out(i, k) = rng.uniform(domain_.lower[k], domain_.upper[k]);
  }
  return out;
}

std::unique_ptr<ReferenceEvaluator> Experiment::make_reference() const {
  const auto eval_grid = grid(config_.reference.grid);
  switch (config_.problem.kind) {
    case ProblemKind::Wave:
      return std::make_unique<WaveReference>(eval_grid, config_.model.rho, config_.model.speed);
    case ProblemKind::AdvReact:
      return std::make_unique<AdvReactReference>(eval_grid);
    case ProblemKind::Transport2d: {
      reference::FdConfig fd;
      fd.nx = config_.reference.grid[0];
      fd.ny = config_.reference.grid[1];
      fd.max_cfl = config_.reference.max_cfl;
      fd.dt = config_.reference.fd_dt;
      if (fd.dt == 0.0) {
        // Largest integer divisor of the solver step within the Courant limit.
        const auto& flow = config_.problem.flow;
        const double rate = flow.max_abs_cx() / eval_grid.spacing(0) + flow.max_abs_cy() / eval_grid.spacing(1);
        const double substeps = std::max(1.0, std::ceil(config_.dynamics.dt * rate / fd.max_cfl));
        fd.dt = config_.dynamics.dt / substeps;
      }
      return std::make_unique<TransportReference>(fd, config_.problem.flow, config_.problem.bump);
    }
  }
  throw ConfigError("unknown problem");
}

RunResult Experiment::run(const RunOptions& options) const {
  RunResult result;
  result.theta_initial = options.theta0 ? *options.theta0 : initial_parameters(&result.fit);
  if (result.theta_initial.size() != model_->param_count()) throw InputError("initial parameters have the wrong length");

  const auto& cfg = config_;
  const bool fixed_points = cfg.collocation.mode == CollocationMode::Grid || !cfg.collocation.resample;
  std::unique_ptr<dynamics::DiracFrenkelField> field;
  dynamics::SolverConfig solver = cfg.dynamics.solver;
  solver.sketch.seed = cfg.seeds.sketch;
  if (fixed_points) {
    field = std::make_unique<dynamics::DiracFrenkelField>(*problem_, *model_, collocation_points(0), solver,
                                                          cfg.dynamics.truncation);
  } else {
    field = std::make_unique<dynamics::DiracFrenkelField>(
        *problem_, *model_, [this](Index step, double) { return collocation_points(step); }, solver,
        cfg.dynamics.truncation);
  }

  auto reference = make_reference();
  const auto eval_grid = grid(cfg.reference.grid);
  const auto eval_points = eval_grid.points();
  const auto plan = dynamics::plan_steps(cfg.t_final, cfg.dynamics.dt);
  const Index total = plan.total_steps();
  const auto start = std::chrono::steady_clock::now();

  dynamics::IntegrateOptions integrate_options;
  integrate_options.keep_records = false;
  integrate_options.observer = [&](const dynamics::StepRecord& record, const dynamics::DfoState& state) {
    const bool last = record.step + 1 == total;
    if ((record.step + 1) % cfg.output.every != 0 && !last) return;
    const reference::ReferenceField approx{eval_grid, record.t,
                                           model_->evaluate_batch(state.theta, eval_points, models::kValues).values};
    MetricsRow row;
    row.t = record.t;
    row.rel_l2_error = relative_l2(approx, reference->at(record.t));
    row.residual_norm = record.residual_norm;
    row.retained_rank = record.retained_rank;
    row.sigma_max = record.sigma_max;
    row.sigma_min_retained = record.sigma_min_retained;
    row.momentum_norm = record.momentum_norm;
    if (cfg.output.wall_time) {
      row.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    result.rows.push_back(row);
  };

  auto trajectory = dynamics::integrate(*field, result.theta_initial, cfg.dynamics, cfg.t_final, integrate_options);
  result.theta_final = std::move(trajectory.final_state.theta);
  result.steps = total;

  if (options.write_outputs) {
    const std::filesystem::path dir = options.output_dir.empty() ? cfg.output.dir : options.output_dir;
    result.metrics_path = dir / "metrics.csv";
    result.theta_path = dir / "theta_final.txt";
    write_file_atomic(result.metrics_path, metrics_csv(result.rows));
    write_file_atomic(result.theta_path, format_theta(result.theta_final));
  }
  return result;
}

// ---------------------------------------------------------------------------

FitResult run_fit(const ExperimentConfig& config, const std::string& output_dir) {
  const Experiment experiment(config);
  FitResult fit = experiment.fit_initial();
  const std::filesystem::path dir = output_dir.empty() ? config.output.dir : output_dir;
  write_file_atomic(dir / "theta_initial.txt", format_theta(fit.theta));
  return fit;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "schema=1\nt,method,rel_l2_error\n";
  for (const auto& r : rows) out += format_number(r.t) + ',' + r.method + ',' + format_number(r.rel_l2_error) + '\n';
  return out;
}

std::vector<CompareRow> compare(const std::vector<std::string>& config_paths, const std::string& output_dir) {
  if (config_paths.empty()) throw InputError("compare needs at least one config");
  std::vector<ExperimentConfig> configs;
  std::vector<std::string> labels;
  for (const auto& path : config_paths) {
    ExperimentConfig cfg = load_config_file(path);
    apply_seed_override(cfg);
    if (!configs.empty()) {
      if (cfg.problem.kind != configs.front().problem.kind) {
        throw InputError("configs solve different problems: " + labels.front() + " vs " + path);
      }
      if (cfg.t_final != configs.front().t_final) {
        throw InputError("configs use different time spans: " + labels.front() + " vs " + path);
      }
    }
    configs.push_back(std::move(cfg));
    labels.push_back(std::filesystem::path(path).stem().string());
  }

  std::vector<CompareRow> rows;
  const std::filesystem::path dir = output_dir;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunOptions options;
    options.output_dir = (dir / labels[i]).string();
    const auto result = Experiment(configs[i]).run(options);
    for (const auto& row : result.rows) rows.push_back({row.t, labels[i], row.rel_l2_error});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const CompareRow& a, const CompareRow& b) { return a.t < b.t; });
  write_file_atomic(dir / "compare.csv", compare_csv(rows));
  return rows;
}

}  // namespace dfo::harness
