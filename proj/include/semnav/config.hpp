// Run configuration: one JSON document with a global seed, an output
// directory, and one flat block of parameters per subcommand. Every key has
// a default; documents and overrides may only name known keys, and values
// must keep the default's JSON type (integers are accepted where a float is
// expected).
#pragma once

#include "semnav/bias.hpp"
#include "semnav/capture.hpp"
#include "semnav/eval.hpp"
#include "semnav/field.hpp"
#include "semnav/planner.hpp"
#include "semnav/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace semnav {

// {"seed", "out", "scene", "capture", "train", "bias", "plan", "eval"}.
nlohmann::json default_run_config();

// Returns `base` with `overrides` applied recursively. Throws
// std::invalid_argument naming the key path for unknown keys and type
// mismatches.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& overrides);

nlohmann::json load_run_config(const std::filesystem::path& path);

// Parses a flag value: JSON when it parses, otherwise a plain string.
nlohmann::json parse_flag_value(const std::string& text);

// Typed views of a resolved document. Sub-seeds derive from the global seed.
CaptureConfig capture_config(const nlohmann::json& run);
TrainConfig train_config(const nlohmann::json& run);
FieldConfig field_config(const nlohmann::json& run, const Scene& scene);
PlannerParams planner_params(const nlohmann::json& run);
SuiteConfig suite_config(const nlohmann::json& run);
NoiseModel bias_noise(const nlohmann::json& run);

// Scene by bundled name, or from a scene file when the name ends in ".json".
Scene resolve_scene(const std::string& name_or_path);

}  // namespace semnav
