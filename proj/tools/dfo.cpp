// dfo command-line front end. Exit codes are the dfo_status values.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfo/dfo.h"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace {

int fail(dfo_status status) {
  std::fprintf(stderr, "dfo: %s: %s\n", dfo_status_name(status), dfo_last_error());
  return static_cast<int>(status);
}

// A config argument is a file path, or a preset name when no such file exists.
dfo_status load(const std::string& config, dfo_experiment** out) {
  if (!std::filesystem::exists(config) && dfo_preset_toml(config.c_str()) != nullptr) {
    return dfo_experiment_load_preset(config.c_str(), out);
  }
  return dfo_experiment_load_file(config.c_str(), out);
}

struct Handle {
  dfo_experiment* ptr = nullptr;
  ~Handle() { dfo_experiment_free(ptr); }
};

std::string output_dir(const dfo_experiment* experiment) {
  size_t needed = 0;
  dfo_experiment_output_dir(experiment, nullptr, 0, &needed);
  std::string dir(needed, '\0');
  if (dfo_experiment_output_dir(experiment, dir.data(), dir.size(), &needed) != DFO_OK) return {};
  dir.resize(needed - 1);
  return dir;
}

int cmd_run(const std::string& config, const std::string& out) {
  Handle h;
  if (auto s = load(config, &h.ptr); s != DFO_OK) return fail(s);
  if (!out.empty()) {
    if (auto s = dfo_experiment_set_output_dir(h.ptr, out.c_str()); s != DFO_OK) return fail(s);
  }
  dfo_run_summary summary{};
  if (auto s = dfo_experiment_run(h.ptr, &summary); s != DFO_OK) return fail(s);
  std::printf("steps=%llu rows=%llu t=%g mean_rel_l2=%.6e max_rel_l2=%.6e final_rel_l2=%.6e rank=%lld\n",
              static_cast<unsigned long long>(summary.steps), static_cast<unsigned long long>(summary.rows),
              summary.t_final, summary.mean_error, summary.max_error, summary.final_error,
              static_cast<long long>(summary.final_rank));
  std::printf("wrote %s\n", (std::filesystem::path(output_dir(h.ptr)) / "metrics.csv").string().c_str());
  return 0;
}

int cmd_fit(const std::string& config, const std::string& out) {
  Handle h;
  if (auto s = load(config, &h.ptr); s != DFO_OK) return fail(s);
  if (!out.empty()) {
    if (auto s = dfo_experiment_set_output_dir(h.ptr, out.c_str()); s != DFO_OK) return fail(s);
  }
  double loss = 0.0;
  uint64_t iterations = 0;
  if (auto s = dfo_experiment_fit(h.ptr, &loss, &iterations); s != DFO_OK) return fail(s);
  std::printf("iterations=%llu loss=%.6e\n", static_cast<unsigned long long>(iterations), loss);
  std::printf("wrote %s\n", (std::filesystem::path(output_dir(h.ptr)) / "theta_initial.txt").string().c_str());
  return 0;
}

int cmd_compare(const std::vector<std::string>& configs, const std::string& out) {
  std::vector<const char*> paths;
  for (const auto& c : configs) paths.push_back(c.c_str());
  if (auto s = dfo_compare(paths.data(), paths.size(), out.c_str()); s != DFO_OK) return fail(s);
  std::printf("wrote %s\n", (std::filesystem::path(out) / "compare.csv").string().c_str());
  return 0;
}

int cmd_presets_list() {
  for (size_t i = 0; i < dfo_preset_count(); ++i) std::printf("%s\n", dfo_preset_name(i));
  return 0;
}

int cmd_presets_show(const std::string& name) {
  const char* toml = dfo_preset_toml(name.c_str());
  if (toml == nullptr) {
    std::fprintf(stderr, "dfo: unknown preset '%s'\n", name.c_str());
    return DFO_ERR_USAGE;
  }
  std::fputs(toml, stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // The solvers allocate and free large temporaries every step; keep them
  // out of mmap so glibc does not return pages to the kernel each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif

  CLI::App app{"Dirac-Frenkel and Dirac-Frenkel-Onsager integration of parametrized PDE solutions"};
  app.set_version_flag("--version", std::string(dfo_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;

  auto* run = app.add_subcommand("run", "Fit or load the initial parameters, integrate and write metrics");
  run->add_option("config", config, "Config file or preset name")->required();
  run->add_option("-o,--out", out, "Output directory (overrides [output].dir)");

  auto* fit = app.add_subcommand("fit", "Fit the initial condition only");
  fit->add_option("config", config, "Config file or preset name")->required();
  fit->add_option("-o,--out", out, "Output directory (overrides [output].dir)");

  std::vector<std::string> configs;
  std::string compare_out = "compare";
  auto* compare = app.add_subcommand("compare", "Run several configs and merge their error curves");
  compare->add_option("configs", configs, "Config files")->required();
  compare->add_option("-o,--out", compare_out, "Output directory")->capture_default_str();

  auto* presets = app.add_subcommand("presets", "Shipped benchmark configurations");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "List preset names");
  std::string preset_name;
  auto* show = presets->add_subcommand("show", "Print a preset as TOML");
  show->add_option("name", preset_name, "Preset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : DFO_ERR_USAGE;
  }

  if (*run) return cmd_run(config, out);
  if (*fit) return cmd_fit(config, out);
  if (*compare) return cmd_compare(configs, compare_out);
  if (*list) return cmd_presets_list();
  if (*show) return cmd_presets_show(preset_name);
  return DFO_ERR_USAGE;
}
