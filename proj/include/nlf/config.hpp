#ifndef NLF_CONFIG_HPP
#define NLF_CONFIG_HPP

// JSON parameter files.  Layout:
//
//   { "preset": "paper-device",
//     "mode1":   { "omega_rad_s": ..., "gamma_rad_s": ..., "mass_kg": ... },
//     "mode2":   { ... },
//     "rwa":     { "lambda11_per_s": ..., "lambda22_per_s": ..., "lambda12_per_s": ...,
//                  "fp_per_s": ..., "delta_hz": ..., "sideband": "upper" | "lower" },
//     "scaling": { "c_sc_joule_s": ... },
//     "experiment": { ... options of the chosen experiment ... } }
//
// Every key is optional; missing values come from the preset.  Unknown keys
// are rejected with their field path.

#include <string>

#include <json.hpp>

#include "nlf/params.hpp"

namespace nlf {

/// Reads and parses a JSON file.  Throws IoError when unreadable and
/// ConfigError (field "<file>", with line/column) on syntax errors.
nlohmann::json load_json_file(const std::string& path);

/// Resolves a parameter block on top of its preset (or `default_preset`).
SystemParams system_params_from_json(const nlohmann::json& j,
                                     const std::string& default_preset = "paper-device");

nlohmann::json system_params_to_json(const SystemParams& s);

}  // namespace nlf

#endif  // NLF_CONFIG_HPP
