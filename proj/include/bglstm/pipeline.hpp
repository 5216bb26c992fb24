#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bglstm/data.hpp"
#include "bglstm/eval.hpp"
#include "bglstm/flow.hpp"
#include "bglstm/network.hpp"
#include "bglstm/optim.hpp"

namespace bglstm {

enum class InputKind { Raw, SparseFlow, DenseFlow };

std::string to_string(InputKind k);
InputKind parse_input_kind(const std::string& s);

struct FlowOptions {
    FarnebackParams dense{1, 1.2, 2.0, 3};
    LucasKanadeParams sparse{9, 2, 20, 1e-4};
    FeatureParams features{0.01, 1e-4, 3.0, 4};
    std::size_t max_features = 64;
    std::size_t splat_radius = 1;
    // Flow magnitude rendered at full brightness, shared by every frame.
    double render_norm = 3.0;
};

// One rendered frame per consecutive pair, with the first rendered frame
// duplicated so the output has as many frames as the input.
struct RenderedFlow {
    std::vector<GrayFrame> frames;
    std::vector<FlowField> flows;  // frames.size() - 1 fields, before duplication
};

RenderedFlow render_flow_sequence(const std::vector<GrayFrame>& frames, InputKind kind, const FlowOptions& options);

// Frames of one input kind, grouped per video.
struct InputScene {
    std::string scene_id;
    std::vector<std::vector<GrayFrame>> train;
    std::vector<std::vector<GrayFrame>> test;
    std::vector<std::vector<int>> test_labels;
};

InputScene make_input_scene(const SceneData& data, InputKind kind, const FlowOptions& options = {});

// Preprocessed, model-ready frames.
struct PreparedScene {
    std::string scene_id;
    std::size_t height = 0;
    std::size_t width = 0;
    NormConstants norm;
    std::vector<std::vector<Vector>> train;
    std::vector<std::vector<Vector>> test;
    std::vector<std::vector<int>> test_labels;

    std::size_t frame_dim() const { return height * width; }
};

// Constants default to those of the scene's own training frames.
PreparedScene prepare_scene(const InputScene& scene, std::size_t height, std::size_t width,
                            std::optional<NormConstants> norm = std::nullopt);

struct TrainOptions {
    CellVariant variant = CellVariant::bi_gated();
    ActivationKind activation = ActivationKind::Relu;
    std::vector<std::size_t> hidden{32, 16, 8, 16, 32};
    std::size_t epochs = 60;
    std::size_t batch = 8;
    std::size_t T = 4;
    std::vector<std::size_t> strides{1};
    double learning_rate = 1e-5;
    std::uint64_t seed = 1;
    bool evaluate_each_epoch = true;
    bool range_denominator = false;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;   // training wall time of this epoch
    double auc = 0.0;       // NaN when not evaluated
    double eer = 0.0;
};

enum class ScoreSource { RecError, Regularity };

struct EvalOptions {
    std::size_t batch = 8;
    bool range_denominator = false;
    ScoreSource source = ScoreSource::RecError;
};

struct EvalResult {
    double auc = 0.0;
    double eer = 0.0;
    RocCurve curve;
    std::vector<VideoScores> videos;
    std::size_t frames = 0;
    double seconds = 0.0;
    double fps = 0.0;
};

// Frame-level scores of every test video, then one ROC over all frames.
EvalResult evaluate_model(Autoencoder& model, const PreparedScene& scene, const EvalOptions& options = {});

struct TrainState {
    Autoencoder model;
    AdamState optimizer;
    std::size_t epochs_done = 0;
};

struct TrainResult {
    TrainState final_state;
    Autoencoder best_model;
    std::size_t best_epoch = 0;
    double best_auc = 0.0;
    double best_eer = 0.0;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

AutoencoderConfig model_config_for(const PreparedScene& scene, const TrainOptions& options);

// Trains from a fresh model, or continues `resume` up to options.epochs.
// The shuffle of epoch e depends only on (seed, e), so resuming from a
// snapshot reproduces the uninterrupted run.
TrainResult train_model(const PreparedScene& scene, const TrainOptions& options, const EpochCallback& on_epoch = {},
                        std::optional<TrainState> resume = std::nullopt);

}  // namespace bglstm
