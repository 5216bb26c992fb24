#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "bglstm/data.hpp"

namespace bglstm {

// Keys are the field names in kebab case; missing keys keep their defaults,
// unknown keys raise ConfigError.
nlohmann::json scene_config_to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const nlohmann::json& j);

// Built-in 32x32 scenes used by the benchmarks. "A": two objects moving
// right over a dark texture. "B": two objects moving diagonally, a little
// faster, over a brighter texture. Both test splits cycle through every anomaly kind.
SceneConfig benchmark_scene(const std::string& id, std::uint64_t seed = 7);

}  // namespace bglstm
