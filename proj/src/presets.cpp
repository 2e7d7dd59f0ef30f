#include "dfo/presets.hpp"

#include "dfo/errors.hpp"

namespace dfo::harness {

const Preset* find_preset(std::string_view name) {
  for (const auto& preset : presets()) {
    if (preset.name == name) return &preset;
  }
  return nullptr;
}

ExperimentConfig load_preset(std::string_view name) {
  const Preset* preset = find_preset(name);
  if (!preset) throw ConfigError("unknown preset '" + std::string(name) + "'");
  return parse_config(std::string(preset->toml));
}

}  // namespace dfo::harness
