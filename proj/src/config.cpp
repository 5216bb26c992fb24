#include "bglstm/config.hpp"

#include <set>

#include "bglstm/errors.hpp"

namespace bglstm {

using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scene config key '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError(std::string("unknown key '") + k + "' in " + where);
}

}  // namespace

json scene_config_to_json(const SceneConfig& c) {
    json anomalies = json::array();
    for (const auto& a : c.anomalies)
        anomalies.push_back({{"kind", to_string(a.kind)}, {"onset", a.onset}, {"duration", a.duration}});
    return {{"scene-id", c.scene_id},
            {"width", c.width},
            {"height", c.height},
            {"train-sequences", c.train_sequences},
            {"test-sequences", c.test_sequences},
            {"frames-per-sequence", c.frames_per_sequence},
            {"motion",
             {{"object-count", c.motion.object_count},
              {"size-min", c.motion.size_min},
              {"size-max", c.motion.size_max},
              {"speed-min", c.motion.speed_min},
              {"speed-max", c.motion.speed_max},
              {"directions-deg", c.motion.directions_deg}}},
            {"anomalies", anomalies},
            {"background-low", c.background_low},
            {"background-high", c.background_high},
            {"object-intensity", c.object_intensity},
            {"noise-std", c.noise_std},
            {"fast-factor", c.fast_factor},
            {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const json& j) {
    reject_unknown(j,
                   {"scene-id", "width", "height", "train-sequences", "test-sequences", "frames-per-sequence", "motion",
                    "anomalies", "background-low", "background-high", "object-intensity", "noise-std", "fast-factor",
                    "seed"},
                   "scene config");
    SceneConfig c;
    take(j, "scene-id", c.scene_id);
    take(j, "width", c.width);
    take(j, "height", c.height);
    take(j, "train-sequences", c.train_sequences);
    take(j, "test-sequences", c.test_sequences);
    take(j, "frames-per-sequence", c.frames_per_sequence);
    if (j.contains("motion")) {
        const json& m = j["motion"];
        reject_unknown(m, {"object-count", "size-min", "size-max", "speed-min", "speed-max", "directions-deg"},
                       "motion");
        take(m, "object-count", c.motion.object_count);
        take(m, "size-min", c.motion.size_min);
        take(m, "size-max", c.motion.size_max);
        take(m, "speed-min", c.motion.speed_min);
        take(m, "speed-max", c.motion.speed_max);
        take(m, "directions-deg", c.motion.directions_deg);
    }
    if (j.contains("anomalies")) {
        if (!j["anomalies"].is_array()) throw ConfigError("anomalies must be an array");
        c.anomalies.clear();
        for (const json& a : j["anomalies"]) {
            reject_unknown(a, {"kind", "onset", "duration"}, "anomaly");
            AnomalySpec s;
            std::string kind = to_string(s.kind);
            take(a, "kind", kind);
            s.kind = parse_anomaly_kind(kind);
            take(a, "onset", s.onset);
            take(a, "duration", s.duration);
            c.anomalies.push_back(s);
        }
    }
    take(j, "background-low", c.background_low);
    take(j, "background-high", c.background_high);
    take(j, "object-intensity", c.object_intensity);
    take(j, "noise-std", c.noise_std);
    take(j, "fast-factor", c.fast_factor);
    take(j, "seed", c.seed);
    c.validate();
    return c;
}

SceneConfig benchmark_scene(const std::string& id, std::uint64_t seed) {
    SceneConfig c;
    c.seed = seed;
    c.anomalies = {{AnomalyKind::FastObject, 20, 15},
                   {AnomalyKind::WrongDirection, 25, 15},
                   {AnomalyKind::NewObjectShape, 15, 15},
                   {AnomalyKind::FastObject, 35, 15}};
    if (id == "A") {
        c.scene_id = "A";
        return c;
    }
    if (id == "B") {
        c.scene_id = "B";
        c.motion.size_min = 3.0;
        c.motion.size_max = 4.5;
        c.motion.speed_min = 0.7;
        c.motion.speed_max = 1.1;
        c.motion.directions_deg = {315.0};
        c.background_low = 0.25;
        c.background_high = 0.55;
        c.object_intensity = 0.85;
        c.seed = seed + 1000;
        return c;
    }
    throw ConfigError("unknown benchmark scene '" + id + "' (expected A or B)");
}

}  // namespace bglstm
