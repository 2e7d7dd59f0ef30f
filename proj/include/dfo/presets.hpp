#pragma once

// Benchmark configurations shipped with the library (the files under
// presets/, embedded at build time).

#include <string>
#include <string_view>
#include <vector>

#include "dfo/config.hpp"

namespace dfo::harness {

struct Preset {
  std::string_view name;
  std::string_view toml;
};

/// Sorted by name.
const std::vector<Preset>& presets();

/// nullptr when no preset has this name.
const Preset* find_preset(std::string_view name);

/// Throws ConfigError for an unknown name.
ExperimentConfig load_preset(std::string_view name);

}  // namespace dfo::harness
