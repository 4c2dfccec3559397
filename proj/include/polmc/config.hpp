#pragma once

// JSON documents mirroring SimConfig field names.

#include <string>

#include "polmc/engine.hpp"

namespace polmc {

/// Parses a SimConfig JSON document; unspecified fields keep their defaults.
/// The medium may give `volume_fraction` instead of `number_density`.
/// Unknown keys are rejected.
SimConfig sim_config_from_json(const std::string &text);
SimConfig sim_config_from_file(const std::string &path);
std::string sim_config_to_json(const SimConfig &config);

/// Applies a JSON object of overrides onto an existing config.
void apply_sim_config_overrides(SimConfig &config, const std::string &overrides_json);

SourcePolarization parse_polarization(const std::string &name);
std::string polarization_name(SourcePolarization p);

/// Stable 64-bit hash of the canonical JSON form.
std::uint64_t config_hash(const SimConfig &config);

} // namespace polmc
