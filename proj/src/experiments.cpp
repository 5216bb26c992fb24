#include "bglstm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

std::string variant_name(const CellVariant& v) {
    std::string s = to_string(v.kind);
    if (v.literal_eq13) s += "-literal";
    return s;
}

struct Cell {
    std::string method;
    InputKind input;
    CellVariant variant;
};

std::vector<Cell> cells_for(AblationSuite suite) {
    if (suite == AblationSuite::InputBased)
        return {{"bigated/raw", InputKind::Raw, CellVariant::bi_gated()},
                {"bigated/sparse-flow", InputKind::SparseFlow, CellVariant::bi_gated()},
                {"bigated/dense-flow", InputKind::DenseFlow, CellVariant::bi_gated()}};
    return {{"standard/dense-flow", InputKind::DenseFlow, CellVariant::standard()},
            {"no-input-gate/dense-flow", InputKind::DenseFlow, CellVariant::no_input_gate()},
            {"bigated/dense-flow", InputKind::DenseFlow, CellVariant::bi_gated()}};
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream s;
    s.precision(10);
    s << "method,scene,seed,AUC,EER,train_seconds_per_epoch,test_fps\n";
    for (const auto& r : rows)
        s << r.method << ',' << r.scene << ',' << r.seed << ',' << r.auc << ',' << r.eer << ','
          << r.train_seconds_per_epoch << ',' << r.test_fps << '\n';
    return s.str();
}

std::string to_string(AblationSuite s) { return s == AblationSuite::InputBased ? "input" : "component"; }

AblationSuite parse_ablation_suite(const std::string& s) {
    if (s == "input" || s == "input-based") return AblationSuite::InputBased;
    if (s == "component" || s == "component-based") return AblationSuite::ComponentBased;
    throw ConfigError("unknown ablation suite '" + s + "' (expected input or component)");
}

std::vector<ReportRow> run_ablation(const std::vector<SceneData>& scenes, const AblationConfig& config, RunCache* cache,
                                    const ProgressFn& progress) {
    if (scenes.empty()) throw ConfigError("ablation needs at least one scene");
    if (config.seeds.empty()) throw ConfigError("ablation needs at least one seed");
    const auto cells = cells_for(config.suite);
    std::vector<ReportRow> rows, medians;
    for (const SceneData& data : scenes) {
        std::map<InputKind, PreparedScene> prepared;
        auto scene_for = [&](InputKind k) -> const PreparedScene& {
            auto it = prepared.find(k);
            if (it == prepared.end())
                it = prepared.emplace(k, prepare_scene(make_input_scene(data, k, config.flow), config.height,
                                                       config.width)).first;
            return it->second;
        };
        const std::string scene_id = data.train.empty() ? std::string("?") : data.train.front().scene_id;
        for (const Cell& cell : cells) {
            std::vector<double> aucs, eers, secs, fps;
            for (std::uint64_t seed : config.seeds) {
                TrainOptions opts = config.train;
                opts.variant = cell.variant;
                opts.seed = seed;
                std::ostringstream key;
                key << scene_id << '|' << to_string(cell.input) << '|' << variant_name(cell.variant) << '|' << seed
                    << '|' << opts.epochs << '|' << opts.learning_rate << '|' << opts.T << '|' << opts.batch;
                ReportRow row;
                if (cache && cache->count(key.str())) {
                    row = cache->at(key.str());
                } else {
                    if (progress) progress("training " + cell.method + " on " + scene_id + " seed " + std::to_string(seed));
                    const PreparedScene& scene = scene_for(cell.input);
                    TrainResult tr = train_model(scene, opts);
                    EvalResult ev = evaluate_model(tr.best_model, scene);
                    double sec = 0.0;
                    for (const auto& l : tr.log) sec += l.seconds;
                    row.auc = tr.best_auc;
                    row.eer = tr.best_eer;
                    row.train_seconds_per_epoch = tr.log.empty() ? 0.0 : sec / static_cast<double>(tr.log.size());
                    row.test_fps = ev.fps;
                    if (cache) (*cache)[key.str()] = row;
                }
                row.method = cell.method;
                row.scene = scene_id;
                row.seed = std::to_string(seed);
                rows.push_back(row);
                aucs.push_back(row.auc);
                eers.push_back(row.eer);
                secs.push_back(row.train_seconds_per_epoch);
                fps.push_back(row.test_fps);
            }
            medians.push_back({cell.method, scene_id, "median", median(aucs), median(eers), median(secs), median(fps)});
        }
    }
    rows.insert(rows.end(), medians.begin(), medians.end());
    return rows;
}

EvalResult run_generalization(Autoencoder& model, const PreparedScene& foreign, const EvalOptions& options) {
    return evaluate_model(model, foreign, options);
}

std::vector<CrossSceneCell> cross_scene_matrix(std::vector<Autoencoder>& models,
                                               const std::vector<std::string>& train_scenes,
                                               const std::vector<PreparedScene>& scenes, const EvalOptions& options) {
    if (models.size() != train_scenes.size()) throw ShapeError("cross_scene_matrix: one scene name per model expected");
    std::vector<CrossSceneCell> out;
    for (std::size_t m = 0; m < models.size(); ++m)
        for (const auto& s : scenes) {
            const EvalResult r = run_generalization(models[m], s, options);
            out.push_back({train_scenes[m], s.scene_id, r.auc, r.eer});
        }
    return out;
}

std::string cross_scene_csv(const std::vector<CrossSceneCell>& cells) {
    std::ostringstream s;
    s.precision(10);
    s << "train_scene,test_scene,AUC,EER\n";
    for (const auto& c : cells) s << c.train_scene << ',' << c.test_scene << ',' << c.auc << ',' << c.eer << '\n';
    return s.str();
}

}  // namespace bglstm
