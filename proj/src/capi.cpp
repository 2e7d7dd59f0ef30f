#include "dfo/dfo.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "dfo/errors.hpp"
#include "dfo/experiment.hpp"
#include "dfo/linalg.hpp"
#include "dfo/presets.hpp"

using dfo::harness::ExperimentConfig;

struct dfo_experiment {
  ExperimentConfig config;
};

namespace {

thread_local std::string last_error;

template <class F>
dfo_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return DFO_OK;
  } catch (const dfo::Error& e) {
    last_error = e.what();
    return static_cast<dfo_status>(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DFO_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DFO_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return DFO_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw dfo::Error(dfo::ErrorKind::Usage, what);
}

dfo_status make_experiment(ExperimentConfig config, dfo_experiment** out) {
  return guarded([&] {
    require(out != nullptr, "output handle pointer is null");
    *out = nullptr;
    dfo::harness::apply_seed_override(config);
    config.validate();
    *out = new dfo_experiment{std::move(config)};
  });
}

void copy_out(const std::string& text, char* buffer, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buffer == nullptr || capacity < text.size() + 1) {
    throw dfo::Error(dfo::ErrorKind::Usage, "buffer too small");
  }
  std::memcpy(buffer, text.c_str(), text.size() + 1);
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

extern "C" {

const char* dfo_version(void) { return "1.0.0"; }

const char* dfo_last_error(void) { return last_error.c_str(); }

const char* dfo_status_name(dfo_status status) {
  switch (status) {
    case DFO_OK: return "ok";
    case DFO_ERR_USAGE: return "usage error";
    case DFO_ERR_CONFIG: return "configuration error";
    case DFO_ERR_FIT: return "fit error";
    case DFO_ERR_INTEGRATION: return "integration error";
    case DFO_ERR_IO: return "I/O error";
    case DFO_ERR_INPUT: return "input error";
    case DFO_ERR_NUMERICAL: return "numerical error";
    case DFO_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

dfo_status dfo_experiment_load_file(const char* path, dfo_experiment** out) {
  ExperimentConfig config;
  const dfo_status status = guarded([&] {
    require(path != nullptr, "config path is null");
    config = dfo::harness::load_config_file(path);
  });
  if (status != DFO_OK) return status;
  return make_experiment(std::move(config), out);
}

dfo_status dfo_experiment_load_preset(const char* name, dfo_experiment** out) {
  ExperimentConfig config;
  const dfo_status status = guarded([&] {
    require(name != nullptr, "preset name is null");
    config = dfo::harness::load_preset(name);
  });
  if (status != DFO_OK) return status;
  return make_experiment(std::move(config), out);
}

dfo_status dfo_experiment_load_string(const char* toml, dfo_experiment** out) {
  ExperimentConfig config;
  const dfo_status status = guarded([&] {
    require(toml != nullptr, "config text is null");
    config = dfo::harness::parse_config(toml);
  });
  if (status != DFO_OK) return status;
  return make_experiment(std::move(config), out);
}

void dfo_experiment_free(dfo_experiment* experiment) { delete experiment; }

dfo_status dfo_experiment_set_output_dir(dfo_experiment* experiment, const char* dir) {
  return guarded([&] {
    require(experiment != nullptr && dir != nullptr, "null argument");
    require(*dir != '\0', "output directory is empty");
    experiment->config.output.dir = dir;
  });
}

dfo_status dfo_experiment_output_dir(const dfo_experiment* experiment, char* buffer, size_t capacity,
                                     size_t* needed) {
  return guarded([&] {
    require(experiment != nullptr, "null experiment");
    copy_out(experiment->config.output.dir, buffer, capacity, needed);
  });
}

dfo_status dfo_experiment_param_count(const dfo_experiment* experiment, size_t* out) {
  return guarded([&] {
    require(experiment != nullptr && out != nullptr, "null argument");
    *out = static_cast<size_t>(dfo::harness::Experiment(experiment->config).model().param_count());
  });
}

dfo_status dfo_experiment_config_toml(const dfo_experiment* experiment, char* buffer, size_t capacity,
                                      size_t* needed) {
  return guarded([&] {
    require(experiment != nullptr, "null experiment");
    copy_out(dfo::harness::serialize_config(experiment->config), buffer, capacity, needed);
  });
}

dfo_status dfo_experiment_run(dfo_experiment* experiment, dfo_run_summary* summary) {
  return guarded([&] {
    require(experiment != nullptr, "null experiment");
    const auto result = dfo::harness::Experiment(experiment->config).run();
    if (summary) {
      *summary = dfo_run_summary{};
      summary->steps = static_cast<uint64_t>(result.steps);
      summary->rows = result.rows.size();
      summary->t_final = experiment->config.t_final;
      summary->max_error = result.max_error();
      summary->mean_error = result.time_averaged_error();
      if (!result.rows.empty()) {
        summary->final_error = result.rows.back().rel_l2_error;
        summary->final_rank = result.rows.back().retained_rank;
      }
    }
  });
}

dfo_status dfo_experiment_fit(dfo_experiment* experiment, double* final_loss, uint64_t* iterations) {
  return guarded([&] {
    require(experiment != nullptr, "null experiment");
    const auto fit = dfo::harness::run_fit(experiment->config);
    if (final_loss) *final_loss = fit.loss;
    if (iterations) *iterations = static_cast<uint64_t>(fit.iterations);
  });
}

dfo_status dfo_compare(const char* const* config_paths, size_t count, const char* output_dir) {
  return guarded([&] {
    require(output_dir != nullptr, "output directory is null");
    require(count == 0 || config_paths != nullptr, "config list is null");
    std::vector<std::string> paths;
    for (size_t i = 0; i < count; ++i) {
      require(config_paths[i] != nullptr, "config path is null");
      paths.emplace_back(config_paths[i]);
    }
    dfo::harness::compare(paths, output_dir);
  });
}

size_t dfo_preset_count(void) { return dfo::harness::presets().size(); }

const char* dfo_preset_name(size_t index) {
  const auto& table = dfo::harness::presets();
  return index < table.size() ? table[index].name.data() : nullptr;
}

const char* dfo_preset_toml(const char* name) {
  if (name == nullptr) return nullptr;
  const auto* preset = dfo::harness::find_preset(name);
  return preset ? preset->toml.data() : nullptr;
}

dfo_status dfo_solve_min_norm(const double* jacobian, size_t n, size_t p, const double* f, double eps_rel,
                              double abs_tol, double* eta, size_t* rank) {
  return guarded([&] {
    require(jacobian != nullptr && f != nullptr && eta != nullptr, "null argument");
    const RowMajor J = Eigen::Map<const RowMajor>(jacobian, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    const dfo::linalg::Vector rhs = Eigen::Map<const dfo::linalg::Vector>(f, static_cast<Eigen::Index>(n));
    const auto result = dfo::linalg::solve_min_norm(J, rhs, dfo::linalg::Truncation{eps_rel, abs_tol});
    Eigen::Map<dfo::linalg::Vector>(eta, static_cast<Eigen::Index>(p)) = result.eta_bar;
    if (rank) *rank = static_cast<size_t>(result.retained_rank());
  });
}

dfo_status dfo_solve_tikhonov(const double* jacobian, size_t n, size_t p, const double* f, double gamma,
                              double* eta) {
  return guarded([&] {
    require(jacobian != nullptr && f != nullptr && eta != nullptr, "null argument");
    const RowMajor J = Eigen::Map<const RowMajor>(jacobian, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    const dfo::linalg::Vector rhs = Eigen::Map<const dfo::linalg::Vector>(f, static_cast<Eigen::Index>(n));
    Eigen::Map<dfo::linalg::Vector>(eta, static_cast<Eigen::Index>(p)) = dfo::linalg::solve_tikhonov(J, rhs, gamma);
  });
}

dfo_status dfo_project_complement(const double* basis, size_t p, size_t r, const double* z, double* out) {
  return guarded([&] {
    require(z != nullptr && out != nullptr && (r == 0 || basis != nullptr), "null argument");
    const RowMajor B = r == 0 ? RowMajor(static_cast<Eigen::Index>(p), 0)
                              : RowMajor(Eigen::Map<const RowMajor>(basis, static_cast<Eigen::Index>(p),
                                                                    static_cast<Eigen::Index>(r)));
    const dfo::linalg::Vector zv = Eigen::Map<const dfo::linalg::Vector>(z, static_cast<Eigen::Index>(p));
    Eigen::Map<dfo::linalg::Vector>(out, static_cast<Eigen::Index>(p)) = dfo::linalg::project_complement(B, zv);
  });
}

}  // extern "C"
