#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bglstm/pipeline.hpp"

namespace bglstm {

// One line of a results table. `seed` is a number or "median".
struct ReportRow {
    std::string method;
    std::string scene;
    std::string seed;
    double auc = 0.0;
    double eer = 0.0;
    double train_seconds_per_epoch = 0.0;
    double test_fps = 0.0;
};

// method,scene,seed,AUC,EER,train_seconds_per_epoch,test_fps
std::string report_csv(const std::vector<ReportRow>& rows);

enum class AblationSuite { InputBased, ComponentBased };

std::string to_string(AblationSuite s);
AblationSuite parse_ablation_suite(const std::string& s);

struct AblationConfig {
    AblationSuite suite = AblationSuite::ComponentBased;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    TrainOptions train;  // variant and seed are overridden per cell
    FlowOptions flow;
    std::size_t height = 32;
    std::size_t width = 32;
};

// Finished runs keyed by scene/input/variant/seed/epochs, so suites that
// share a cell (BiGated on dense flow) train it once.
using RunCache = std::map<std::string, ReportRow>;

using ProgressFn = std::function<void(const std::string&)>;

// Input-based: BiGated on raw, sparse-flow and dense-flow input.
// Component-based: Standard, NoInputGate and BiGated on dense flow.
// Returns one row per (method, scene, seed), then one median row per
// (method, scene). The per-row AUC/EER come from the best epoch.
std::vector<ReportRow> run_ablation(const std::vector<SceneData>& scenes, const AblationConfig& config,
                                    RunCache* cache = nullptr, const ProgressFn& progress = {});

// Frozen model on a foreign scene's test split, preprocessed with that
// scene's own constants.
EvalResult run_generalization(Autoencoder& model, const PreparedScene& foreign, const EvalOptions& options = {});

struct CrossSceneCell {
    std::string train_scene;
    std::string test_scene;
    double auc = 0.0;
    double eer = 0.0;
};

// Every model against every scene; models[i] was trained on train_scenes[i].
std::vector<CrossSceneCell> cross_scene_matrix(std::vector<Autoencoder>& models,
                                               const std::vector<std::string>& train_scenes,
                                               const std::vector<PreparedScene>& scenes,
                                               const EvalOptions& options = {});

// train_scene,test_scene,AUC,EER
std::string cross_scene_csv(const std::vector<CrossSceneCell>& cells);

double median(std::vector<double> values);

}  // namespace bglstm
