#pragma once

// Experiment configuration and its TOML representation.
//
//   [experiment]   name, problem, t_final
//   [problem]      PDE coefficients, flow field and initial bump
//   [model]        parametrization
//   [dynamics]     time stepping and least-squares solver
//   [collocation]  points used for the batch system
//   [initial]      initial parameters (exact, fit, file or given)
//   [fit]          Adam settings used when initial.mode = "fit"
//   [reference]    error-evaluation grid and finite-difference settings
//   [output]       directory and metric cadence
//   [seeds]        init, sketch and collocation seeds

#include <cstdint>
#include <string>
#include <vector>

#include "dfo/dynamics.hpp"
#include "dfo/fit.hpp"
#include "dfo/reference.hpp"

namespace dfo::harness {

enum class ProblemKind { Wave, AdvReact, Transport2d };
enum class ModelKind { WaveTwoGaussian, AdvReactSine, PeriodicMlp };
enum class InitialMode { Exact, Fit, File, Given };
enum class CollocationMode { Grid, Uniform };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Wave;
  double speed = 1.0;  ///< advection speed (advreact)
  double kappa = 1.0;  ///< reaction rate (advreact)
  models::SeparableFlow flow;
  reference::GaussianBump bump;

  bool operator==(const ProblemSpec&) const = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::WaveTwoGaussian;
  double rho = 0.0;    ///< wave variance offset of the second bump
  double speed = 1.0;  ///< wave speed
  Index embed_width = 32;
  std::vector<Index> hidden{32, 32, 32};
  bool trainable_embedding = false;

  bool operator==(const ModelSpec&) const = default;
};

struct CollocationSpec {
  CollocationMode mode = CollocationMode::Grid;
  std::vector<Index> grid;  ///< cells per dimension (grid mode)
  Index count = 0;          ///< number of points (uniform mode)
  bool resample = false;    ///< uniform mode: fresh points every step

  bool operator==(const CollocationSpec&) const = default;
};

struct InitialSpec {
  InitialMode mode = InitialMode::Exact;
  std::vector<double> theta;  ///< given mode
  std::string path;           ///< file mode: whitespace-separated values
  std::vector<Index> fit_grid;

  bool operator==(const InitialSpec&) const = default;
};

struct ReferenceSpec {
  std::vector<Index> grid;  ///< evaluation grid, cells per dimension
  /// Finite-difference time step; 0 picks the largest divisor of the solver
  /// step that satisfies the Courant limit.
  double fd_dt = 0.0;
  double max_cfl = 1.0;

  bool operator==(const ReferenceSpec&) const = default;
};

struct OutputSpec {
  std::string dir;
  Index every = 50;        ///< steps between metric rows
  bool wall_time = false;  ///< when false the wall_time_ms column is 0

  bool operator==(const OutputSpec&) const = default;
};

struct SeedSpec {
  std::uint64_t init = 0;
  std::uint64_t sketch = 0;
  std::uint64_t collocation = 0;

  bool operator==(const SeedSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  double t_final = 1.0;
  ProblemSpec problem;
  ModelSpec model;
  dynamics::StepConfig dynamics;
  CollocationSpec collocation;
  InitialSpec initial;
  FitConfig fit;
  ReferenceSpec reference;
  OutputSpec output;
  SeedSpec seeds;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults for a problem: model kind, grids and domain-dependent settings.
ExperimentConfig default_config(ProblemKind kind);

/// Throws ConfigError with the offending key on malformed input.
ExperimentConfig parse_config(const std::string& toml_text);
std::string serialize_config(const ExperimentConfig& config);

/// Reads and parses a file. A relative initial.path is resolved against
/// the file's directory. Throws IoError when the file cannot be read.
ExperimentConfig load_config_file(const std::string& path);

/// Replaces every seed with the value of DFO_SEED when that variable is set.
/// Returns true when an override was applied.
bool apply_seed_override(ExperimentConfig& config);

const char* to_string(ProblemKind kind);
const char* to_string(ModelKind kind);

}  // namespace dfo::harness
