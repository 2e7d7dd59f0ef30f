#include "dfo/config.hpp"

#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "dfo/errors.hpp"

namespace dfo::harness {
namespace {

// ---------------------------------------------------------------------------
// Enum names

template <class Enum>
struct Name {
  Enum value;
  const char* text;
};

constexpr Name<ProblemKind> kProblemNames[] = {
    {ProblemKind::Wave, "wave"}, {ProblemKind::AdvReact, "advreact"}, {ProblemKind::Transport2d, "transport2d"}};
constexpr Name<ModelKind> kModelNames[] = {{ModelKind::WaveTwoGaussian, "wave_two_gaussian"},
                                           {ModelKind::AdvReactSine, "advreact_sine"},
                                           {ModelKind::PeriodicMlp, "periodic_mlp"}};
constexpr Name<dynamics::Scheme> kSchemeNames[] = {{dynamics::Scheme::SemiImplicitEuler, "euler"},
                                                   {dynamics::Scheme::Rk4StageEma, "rk4"}};
constexpr Name<dynamics::SolverKind> kSolverNames[] = {{dynamics::SolverKind::Tsvd, "tsvd"},
                                                       {dynamics::SolverKind::Tikhonov, "tikhonov"},
                                                       {dynamics::SolverKind::Rsvd, "rsvd"}};
constexpr Name<InitialMode> kInitialNames[] = {{InitialMode::Exact, "exact"},
                                               {InitialMode::Fit, "fit"},
                                               {InitialMode::File, "file"},
                                               {InitialMode::Given, "given"}};
constexpr Name<CollocationMode> kCollocationNames[] = {{CollocationMode::Grid, "grid"},
                                                       {CollocationMode::Uniform, "uniform"}};

template <class Enum, std::size_t N>
const char* name_of(const Name<Enum> (&names)[N], Enum value) {
  for (const auto& n : names) {
    if (n.value == value) return n.text;
  }
  return "?";
}

template <class Enum, std::size_t N>
Enum parse_name(const Name<Enum> (&names)[N], const std::string& text, const std::string& key) {
  for (const auto& n : names) {
    if (text == n.text) return n.value;
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.text;
  throw ConfigError(key + ": unknown value '" + text + "' (expected one of " + allowed + ")");
}

// ---------------------------------------------------------------------------
// Reading

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  void check_keys(std::initializer_list<const char*> allowed) const {
    if (!table_) return;
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, node] : *table_) {
      if (!keys.contains(std::string(key.str()))) throw ConfigError("unknown key " + path(std::string(key.str())));
    }
  }

  void read(const char* key, double& out) const {
    if (const auto* node = find(key)) {
      if (auto v = node->value<double>()) {
        out = *v;
      } else {
        throw ConfigError(path(key) + " must be a number");
      }
    }
  }

  void read(const char* key, bool& out) const {
    if (const auto* node = find(key)) {
      if (auto v = node->value_exact<bool>()) {
        out = *v;
      } else {
        throw ConfigError(path(key) + " must be a boolean");
      }
    }
  }

  void read(const char* key, Index& out) const {
    if (const auto* node = find(key)) out = integer(*node, key);
  }

  void read(const char* key, std::uint64_t& out) const {
    if (const auto* node = find(key)) {
      const Index v = integer(*node, key);
      if (v < 0) throw ConfigError(path(key) + " must be non-negative");
      out = static_cast<std::uint64_t>(v);
    }
  }

  void read(const char* key, std::string& out) const {
    if (const auto* node = find(key)) {
      if (auto v = node->value_exact<std::string>()) {
        out = *v;
      } else {
        throw ConfigError(path(key) + " must be a string");
      }
    }
  }

  void read(const char* key, std::vector<Index>& out) const {
    if (const auto* node = find(key)) {
      const auto* array = node->as_array();
      if (!array) throw ConfigError(path(key) + " must be an array of integers");
      out.clear();
      for (const auto& item : *array) out.push_back(integer(item, key));
    }
  }

  void read(const char* key, std::vector<double>& out) const {
    if (const auto* node = find(key)) {
      const auto* array = node->as_array();
      if (!array) throw ConfigError(path(key) + " must be an array of numbers");
      out.clear();
      for (const auto& item : *array) {
        auto v = item.value<double>();
        if (!v) throw ConfigError(path(key) + " must be an array of numbers");
        out.push_back(*v);
      }
    }
  }

  template <class Enum, std::size_t N>
  void read_enum(const char* key, const Name<Enum> (&names)[N], Enum& out) const {
    std::string text;
    read(key, text);
    if (!text.empty()) out = parse_name(names, text, path(key));
  }

  bool has(const char* key) const { return find(key) != nullptr; }

 private:
  const toml::node* find(const char* key) const { return table_ ? table_->get(key) : nullptr; }
  std::string path(const std::string& key) const { return "[" + name_ + "]." + key; }

  Index integer(const toml::node& node, const char* key) const {
    if (auto v = node.value_exact<std::int64_t>()) return static_cast<Index>(*v);
    throw ConfigError(path(key) + " must be an integer");
  }

  const toml::table* table_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Writing

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

template <class T, class F>
std::string list(const std::vector<T>& values, F format) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + format(values[i]);
  return out + "]";
}

std::string format_index(Index v) { return std::to_string(v); }

}  // namespace

const char* to_string(ProblemKind kind) { return name_of(kProblemNames, kind); }
const char* to_string(ModelKind kind) { return name_of(kModelNames, kind); }

ExperimentConfig default_config(ProblemKind kind) {
  ExperimentConfig cfg;
  cfg.problem.kind = kind;
  switch (kind) {
    case ProblemKind::Wave:
      cfg.name = "wave";
      cfg.t_final = 4.0;
      cfg.model.kind = ModelKind::WaveTwoGaussian;
      cfg.dynamics.dt = 3e-4;
      cfg.dynamics.tau = 0.5;
      cfg.collocation.grid = {151};
      cfg.initial.fit_grid = {151};
      cfg.reference.grid = {512};
      break;
    case ProblemKind::AdvReact:
      cfg.name = "advreact";
      cfg.t_final = 6.0;
      cfg.model.kind = ModelKind::AdvReactSine;
      cfg.dynamics.dt = 1e-4;
      cfg.dynamics.tau = 0.05;
      cfg.dynamics.truncation = {1e-10, 1e-3};
      cfg.collocation.grid = {512};
      cfg.initial.fit_grid = {512};
      cfg.reference.grid = {512};
      break;
    case ProblemKind::Transport2d:
      cfg.name = "transport2d";
      cfg.t_final = 2.0;
      cfg.model.kind = ModelKind::PeriodicMlp;
      cfg.dynamics.dt = 2e-2;
      cfg.dynamics.tau = 0.1;
      cfg.dynamics.scheme = dynamics::Scheme::Rk4StageEma;
      cfg.dynamics.truncation.eps_rel = 1e-4;
      cfg.collocation.grid = {24, 24};
      cfg.initial.mode = InitialMode::Fit;
      cfg.initial.fit_grid = {64, 64};
      cfg.fit.iterations = 5000;
      cfg.fit.learning_rate = 3e-3;
      cfg.reference.grid = {128, 128};
      cfg.output.every = 5;
      break;
  }
  cfg.output.dir = "runs/" + cfg.name;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("[experiment].name must not be empty");
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw ConfigError("[experiment].t_final must be >= 0");
  dynamics.validate();
  fit.validate();

  const Index dim = problem.kind == ProblemKind::Transport2d ? 2 : 1;
  switch (problem.kind) {
    case ProblemKind::Wave:
      if (model.kind != ModelKind::WaveTwoGaussian) throw ConfigError("the wave problem needs model wave_two_gaussian");
      break;
    case ProblemKind::AdvReact:
      if (model.kind == ModelKind::WaveTwoGaussian) throw ConfigError("advreact needs a scalar model");
      break;
    case ProblemKind::Transport2d:
      if (model.kind != ModelKind::PeriodicMlp) throw ConfigError("transport2d needs model periodic_mlp");
      break;
  }
  if (model.kind == ModelKind::PeriodicMlp) {
    if (model.embed_width < 1) throw ConfigError("[model].embed_width must be positive");
    for (Index w : model.hidden) {
      if (w < 1) throw ConfigError("[model].hidden widths must be positive");
    }
  }
  if (!(model.rho >= 0.0)) throw ConfigError("[model].rho must be >= 0");

  auto check_grid = [&](const std::vector<Index>& grid, const char* key, Index min_cells) {
    if (static_cast<Index>(grid.size()) != dim) {
      throw ConfigError(std::string(key) + " needs " + std::to_string(dim) + " entr" + (dim == 1 ? "y" : "ies"));
    }
    for (Index n : grid) {
      if (n < min_cells) throw ConfigError(std::string(key) + " entries must be at least " + std::to_string(min_cells));
    }
  };
  if (collocation.mode == CollocationMode::Grid) {
    check_grid(collocation.grid, "[collocation].grid", 1);
  } else if (collocation.count < 1) {
    throw ConfigError("[collocation].count must be positive");
  }
  check_grid(reference.grid, "[reference].grid", problem.kind == ProblemKind::Transport2d ? 5 : 1);
  if (!(reference.fd_dt >= 0.0)) throw ConfigError("[reference].fd_dt must be >= 0");
  if (!(reference.max_cfl > 0.0)) throw ConfigError("[reference].max_cfl must be positive");
  if (output.every < 1) throw ConfigError("[output].every must be at least 1");

  switch (initial.mode) {
    case InitialMode::Exact:
      if (model.kind == ModelKind::PeriodicMlp) throw ConfigError("an MLP has no exact initial parameters; use fit");
      break;
    case InitialMode::Fit:
      check_grid(initial.fit_grid, "[initial].fit_grid", 1);
      break;
    case InitialMode::File:
      if (initial.path.empty()) throw ConfigError("[initial].path is required for mode file");
      break;
    case InitialMode::Given:
      if (initial.theta.empty()) throw ConfigError("[initial].theta is required for mode given");
      break;
  }
}

ExperimentConfig parse_config(const std::string& toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }

  for (const auto& [key, node] : root) {
    static const std::set<std::string> tables{"experiment", "problem",   "model",  "dynamics", "collocation",
                                              "initial",    "fit",       "reference", "output", "seeds"};
    if (!tables.contains(std::string(key.str())) || !node.is_table()) {
      throw ConfigError("unknown top-level entry '" + std::string(key.str()) + "'");
    }
  }
  auto section = [&](const char* name) { return Section(root[name].as_table(), name); };

  const Section experiment = section("experiment");
  experiment.check_keys({"name", "problem", "t_final"});
  if (!experiment.has("problem")) throw ConfigError("[experiment].problem is required");
  ProblemKind kind = ProblemKind::Wave;
  experiment.read_enum("problem", kProblemNames, kind);

  ExperimentConfig cfg = default_config(kind);
  const bool explicit_dir = section("output").has("dir");
  experiment.read("name", cfg.name);
  experiment.read("t_final", cfg.t_final);
  if (!explicit_dir) cfg.output.dir = "runs/" + cfg.name;

  const Section problem = section("problem");
  problem.check_keys({"speed", "kappa", "flow_ax", "flow_bx", "flow_kx", "flow_x0", "flow_lx", "flow_ay", "flow_by",
                      "flow_ky", "flow_y0", "flow_ly", "bump_sigma", "bump_center_x", "bump_center_y"});
  problem.read("speed", cfg.problem.speed);
  problem.read("kappa", cfg.problem.kappa);
  auto& flow = cfg.problem.flow;
  problem.read("flow_ax", flow.ax);
  problem.read("flow_bx", flow.bx);
  problem.read("flow_kx", flow.kx);
  problem.read("flow_x0", flow.x0);
  problem.read("flow_lx", flow.lx);
  problem.read("flow_ay", flow.ay);
  problem.read("flow_by", flow.by);
  problem.read("flow_ky", flow.ky);
  problem.read("flow_y0", flow.y0);
  problem.read("flow_ly", flow.ly);
  problem.read("bump_sigma", cfg.problem.bump.sigma);
  problem.read("bump_center_x", cfg.problem.bump.center_x);
  problem.read("bump_center_y", cfg.problem.bump.center_y);

  const Section model = section("model");
  model.check_keys({"kind", "rho", "speed", "embed_width", "hidden", "trainable_embedding"});
  model.read_enum("kind", kModelNames, cfg.model.kind);
  model.read("rho", cfg.model.rho);
  model.read("speed", cfg.model.speed);
  model.read("embed_width", cfg.model.embed_width);
  model.read("hidden", cfg.model.hidden);
  model.read("trainable_embedding", cfg.model.trainable_embedding);

  const Section dyn = section("dynamics");
  dyn.check_keys({"scheme", "dt", "tau", "beta", "lambda", "solver", "eps_rel", "abs_tol", "gamma", "sketch_size",
                  "oversampling"});
  auto& d = cfg.dynamics;
  dyn.read_enum("scheme", kSchemeNames, d.scheme);
  dyn.read("dt", d.dt);
  dyn.read("tau", d.tau);
  if (dyn.has("beta")) {
    double beta = 0.0;
    dyn.read("beta", beta);
    d.beta = beta;
  }
  dyn.read("lambda", d.lambda);
  dyn.read_enum("solver", kSolverNames, d.solver.kind);
  dyn.read("eps_rel", d.truncation.eps_rel);
  dyn.read("abs_tol", d.truncation.abs_tol);
  dyn.read("gamma", d.solver.gamma);
  dyn.read("sketch_size", d.solver.sketch.sketch_size);
  dyn.read("oversampling", d.solver.sketch.oversampling);

  const Section colloc = section("collocation");
  colloc.check_keys({"mode", "grid", "count", "resample"});
  colloc.read_enum("mode", kCollocationNames, cfg.collocation.mode);
  colloc.read("grid", cfg.collocation.grid);
  colloc.read("count", cfg.collocation.count);
  colloc.read("resample", cfg.collocation.resample);

  const Section initial = section("initial");
  initial.check_keys({"mode", "theta", "path", "fit_grid"});
  initial.read_enum("mode", kInitialNames, cfg.initial.mode);
  initial.read("theta", cfg.initial.theta);
  initial.read("path", cfg.initial.path);
  initial.read("fit_grid", cfg.initial.fit_grid);

  const Section fit = section("fit");
  fit.check_keys({"iterations", "learning_rate", "beta1", "beta2", "epsilon", "target_loss"});
  fit.read("iterations", cfg.fit.iterations);
  fit.read("learning_rate", cfg.fit.learning_rate);
  fit.read("beta1", cfg.fit.beta1);
  fit.read("beta2", cfg.fit.beta2);
  fit.read("epsilon", cfg.fit.epsilon);
  fit.read("target_loss", cfg.fit.target_loss);

  const Section ref = section("reference");
  ref.check_keys({"grid", "fd_dt", "max_cfl"});
  ref.read("grid", cfg.reference.grid);
  ref.read("fd_dt", cfg.reference.fd_dt);
  ref.read("max_cfl", cfg.reference.max_cfl);

  const Section output = section("output");
  output.check_keys({"dir", "every", "wall_time"});
  output.read("dir", cfg.output.dir);
  output.read("every", cfg.output.every);
  output.read("wall_time", cfg.output.wall_time);

  const Section seeds = section("seeds");
  seeds.check_keys({"init", "sketch", "collocation"});
  seeds.read("init", cfg.seeds.init);
  seeds.read("sketch", cfg.seeds.sketch);
  seeds.read("collocation", cfg.seeds.collocation);
  cfg.fit.seed = cfg.seeds.init;
  cfg.dynamics.solver.sketch.seed = cfg.seeds.sketch;

  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const auto& d = cfg.dynamics;
  const auto& flow = cfg.problem.flow;
  out << "[experiment]\n"
      << "name = " << quote(cfg.name) << "\n"
      << "problem = " << quote(to_string(cfg.problem.kind)) << "\n"
      << "t_final = " << format_double(cfg.t_final) << "\n\n";

  out << "[problem]\n"
      << "speed = " << format_double(cfg.problem.speed) << "\n"
      << "kappa = " << format_double(cfg.problem.kappa) << "\n"
      << "flow_ax = " << format_double(flow.ax) << "\n"
      << "flow_bx = " << format_double(flow.bx) << "\n"
      << "flow_kx = " << format_double(flow.kx) << "\n"
      << "flow_x0 = " << format_double(flow.x0) << "\n"
      << "flow_lx = " << format_double(flow.lx) << "\n"
      << "flow_ay = " << format_double(flow.ay) << "\n"
      << "flow_by = " << format_double(flow.by) << "\n"
      << "flow_ky = " << format_double(flow.ky) << "\n"
      << "flow_y0 = " << format_double(flow.y0) << "\n"
      << "flow_ly = " << format_double(flow.ly) << "\n"
      << "bump_sigma = " << format_double(cfg.problem.bump.sigma) << "\n"
      << "bump_center_x = " << format_double(cfg.problem.bump.center_x) << "\n"
      << "bump_center_y = " << format_double(cfg.problem.bump.center_y) << "\n\n";

  out << "[model]\n"
      << "kind = " << quote(to_string(cfg.model.kind)) << "\n"
      << "rho = " << format_double(cfg.model.rho) << "\n"
      << "speed = " << format_double(cfg.model.speed) << "\n"
      << "embed_width = " << cfg.model.embed_width << "\n"
      << "hidden = " << list(cfg.model.hidden, format_index) << "\n"
      << "trainable_embedding = " << (cfg.model.trainable_embedding ? "true" : "false") << "\n\n";

  out << "[dynamics]\n"
      << "scheme = " << quote(name_of(kSchemeNames, d.scheme)) << "\n"
      << "dt = " << format_double(d.dt) << "\n"
      << "tau = " << format_double(d.tau) << "\n";
  if (d.beta) out << "beta = " << format_double(*d.beta) << "\n";
  out << "lambda = " << format_double(d.lambda) << "\n"
      << "solver = " << quote(name_of(kSolverNames, d.solver.kind)) << "\n"
      << "eps_rel = " << format_double(d.truncation.eps_rel) << "\n"
      << "abs_tol = " << format_double(d.truncation.abs_tol) << "\n"
      << "gamma = " << format_double(d.solver.gamma) << "\n"
      << "sketch_size = " << d.solver.sketch.sketch_size << "\n"
      << "oversampling = " << d.solver.sketch.oversampling << "\n\n";

  out << "[collocation]\n"
      << "mode = " << quote(name_of(kCollocationNames, cfg.collocation.mode)) << "\n"
      << "grid = " << list(cfg.collocation.grid, format_index) << "\n"
      << "count = " << cfg.collocation.count << "\n"
      << "resample = " << (cfg.collocation.resample ? "true" : "false") << "\n\n";

  out << "[initial]\n"
      << "mode = " << quote(name_of(kInitialNames, cfg.initial.mode)) << "\n"
      << "theta = " << list(cfg.initial.theta, format_double) << "\n"
      << "path = " << quote(cfg.initial.path) << "\n"
      << "fit_grid = " << list(cfg.initial.fit_grid, format_index) << "\n\n";

  out << "[fit]\n"
      << "iterations = " << cfg.fit.iterations << "\n"
      << "learning_rate = " << format_double(cfg.fit.learning_rate) << "\n"
      << "beta1 = " << format_double(cfg.fit.beta1) << "\n"
      << "beta2 = " << format_double(cfg.fit.beta2) << "\n"
      << "epsilon = " << format_double(cfg.fit.epsilon) << "\n"
      << "target_loss = " << format_double(cfg.fit.target_loss) << "\n\n";

  out << "[reference]\n"
      << "grid = " << list(cfg.reference.grid, format_index) << "\n"
      << "fd_dt = " << format_double(cfg.reference.fd_dt) << "\n"
      << "max_cfl = " << format_double(cfg.reference.max_cfl) << "\n\n";

  out << "[output]\n"
      << "dir = " << quote(cfg.output.dir) << "\n"
      << "every = " << cfg.output.every << "\n"
      << "wall_time = " << (cfg.output.wall_time ? "true" : "false") << "\n\n";

  out << "[seeds]\n"
      << "init = " << cfg.seeds.init << "\n"
      << "sketch = " << cfg.seeds.sketch << "\n"
      << "collocation = " << cfg.seeds.collocation << "\n";
  return out.str();
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig cfg = parse_config(buffer.str());
  if (!cfg.initial.path.empty() && std::filesystem::path(cfg.initial.path).is_relative()) {
    cfg.initial.path = (std::filesystem::path(path).parent_path() / cfg.initial.path).lexically_normal().string();
  }
  return cfg;
}

bool apply_seed_override(ExperimentConfig& cfg) {
  const char* env = std::getenv("DFO_SEED");
  if (!env || !*env) return false;
  char* end = nullptr;
  errno = 0;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-') throw ConfigError("DFO_SEED must be a non-negative integer");
  cfg.seeds = {seed, seed, seed};
  cfg.fit.seed = seed;
  cfg.dynamics.solver.sketch.seed = seed;
  return true;
}

}  // namespace dfo::harness
