#pragma once

#include "iplpmb/scenario.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace iplpmb {

/// Reads an experiment from YAML. Every key is optional and falls back to the
/// defaults of ExperimentConfig; unknown keys and ill-typed values throw ConfigError
/// naming the dotted key path (e.g. "scenario.sensor.clutter_rate").
[[nodiscard]] ExperimentConfig parse_experiment_config(std::string_view yaml);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Full YAML echo of a configuration; parsing it back yields the same values.
[[nodiscard]] std::string dump_experiment_config(const ExperimentConfig& config);

}  // namespace iplpmb
