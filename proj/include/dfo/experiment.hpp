#pragma once

// Experiment orchestration: build the problem and model from a config,
// obtain initial parameters, integrate, and report error metrics.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dfo/config.hpp"

namespace dfo::harness {

/// One line of the metrics CSV.
struct MetricsRow {
  double t = 0.0;
  double rel_l2_error = 0.0;
  double residual_norm = 0.0;
  Index retained_rank = 0;
  double sigma_max = 0.0;
  double sigma_min_retained = 0.0;
  double momentum_norm = 0.0;
  double wall_time_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "t,rel_l2_error,residual_norm,retained_rank,sigma_max,sigma_min_retained,momentum_norm,wall_time_ms";

/// ||approx - truth||_2 / ||truth||_2 over all grid points and components.
/// Throws InputError on mismatched fields and NumericalError when the
/// truth has zero norm.
double relative_l2(const reference::ReferenceField& approx, const reference::ReferenceField& truth);

/// "schema=1", the header and one line per row.
std::string metrics_csv(const std::vector<MetricsRow>& rows);

/// Writes to a temporary file in the same directory and renames it over
/// the target. Creates missing parent directories. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// One value per line, full precision.
std::string format_theta(const Vector& theta);
Vector read_theta_file(const std::filesystem::path& path);

struct RunOptions {
  /// Overrides [output].dir when non-empty.
  std::string output_dir;
  bool write_outputs = true;
  /// Skips the initial-parameter stage when set.
  std::optional<Vector> theta0;
};

struct RunResult {
  std::vector<MetricsRow> rows;
  Vector theta_initial;
  Vector theta_final;
  std::optional<FitResult> fit;
  Index steps = 0;
  std::filesystem::path metrics_path;
  std::filesystem::path theta_path;

  /// Mean of rel_l2_error over the rows, 0 when there are none.
  double time_averaged_error() const;
  double max_error() const;
};

class ReferenceEvaluator;

/// A configured experiment. Construction validates the config and builds
/// the problem and model.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);
  ~Experiment();
  Experiment(Experiment&&) noexcept;
  Experiment& operator=(Experiment&&) noexcept;

  const ExperimentConfig& config() const { return config_; }
  const models::PdeProblem& problem() const { return *problem_; }
  const models::Parametrization& model() const { return *model_; }
  const models::Domain& domain() const { return domain_; }

  /// Initial condition u(0, .) at points, one row per point.
  Matrix initial_condition(const models::Points& points) const;
  /// Fits the model to the initial condition on [initial].fit_grid.
  FitResult fit_initial() const;
  /// Initial parameters according to [initial].mode.
  Vector initial_parameters(std::optional<FitResult>* fit_out = nullptr) const;

  /// Uniform grid over the domain with the given cells per dimension.
  reference::UniformGrid grid(const std::vector<Index>& cells) const;
  /// Collocation points for a step.
  models::Points collocation_points(Index step) const;

  RunResult run(const RunOptions& options = {}) const;

 private:
  std::unique_ptr<ReferenceEvaluator> make_reference() const;

  ExperimentConfig config_;
  std::unique_ptr<models::PdeProblem> problem_;
  std::unique_ptr<models::Parametrization> model_;
  models::Domain domain_;
};

/// Fits the initial parameters and writes theta_initial.txt to the output
/// directory.
FitResult run_fit(const ExperimentConfig& config, const std::string& output_dir = {});

struct CompareRow {
  double t = 0.0;
  std::string method;
  double rel_l2_error = 0.0;
};

/// Runs each config (each into <output_dir>/<label>) and writes the merged
/// long-format table <output_dir>/compare.csv. Labels are the file stems.
/// Throws InputError on an empty list or configs that differ in problem or
/// final time.
std::vector<CompareRow> compare(const std::vector<std::string>& config_paths, const std::string& output_dir);

std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace dfo::harness
