#include "bglstm/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
    return seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(epoch) + 1);
}

std::vector<std::vector<Vector>> gather(const std::vector<Cuboid>& cuboids, std::span<const std::size_t> idx) {
    std::vector<std::vector<Vector>> batch;
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(cuboids[i].frames);
    return batch;
}

double batch_loss(Autoencoder& model, const std::vector<std::vector<Vector>>& batch, Mode mode) {
    const Sequence input = to_sequence(batch);
    const Sequence out = model.forward(input, mode, nullptr, false);
    return mse_loss(out, input).loss;
}

}  // namespace

std::string to_string(InputKind k) {
    switch (k) {
        case InputKind::Raw: return "raw";
        case InputKind::SparseFlow: return "sparse-flow";
        case InputKind::DenseFlow: return "dense-flow";
    }
    return "?";
}

InputKind parse_input_kind(const std::string& s) {
    if (s == "raw") return InputKind::Raw;
    if (s == "sparse-flow" || s == "sparse") return InputKind::SparseFlow;
    if (s == "dense-flow" || s == "dense") return InputKind::DenseFlow;
    throw ConfigError("unknown input kind '" + s + "' (expected raw, sparse-flow or dense-flow)");
}

RenderedFlow render_flow_sequence(const std::vector<GrayFrame>& frames, InputKind kind, const FlowOptions& options) {
    if (kind == InputKind::Raw) throw InvalidInput("render_flow_sequence: raw input has no flow");
    if (frames.size() < 2) throw InvalidInput("render_flow_sequence: need at least 2 frames");
    RenderedFlow out;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const GrayFrame& a = frames[t - 1];
        const GrayFrame& b = frames[t];
        FlowField f;
        if (kind == InputKind::DenseFlow) {
            f = farneback_dense(a, b, options.dense);
        } else {
            FeatureParams fp = options.features;
            fp.margin = std::max(fp.margin, options.sparse.window / 2);
            const auto pts = select_features(a, options.max_features, fp);
            f = rasterize_sparse(lucas_kanade(a, b, pts, options.sparse), a.width, a.height, options.splat_radius);
        }
        GrayFrame r = flow_to_frame(f, options.render_norm);
        quantize8(r);
        out.frames.push_back(std::move(r));
        out.flows.push_back(std::move(f));
    }
    out.frames.insert(out.frames.begin(), out.frames.front());
    return out;
}

InputScene make_input_scene(const SceneData& data, InputKind kind, const FlowOptions& options) {
    InputScene s;
    auto convert = [&](const FrameSequence& seq) {
        if (s.scene_id.empty()) s.scene_id = seq.scene_id;
        return kind == InputKind::Raw ? seq.frames : render_flow_sequence(seq.frames, kind, options).frames;
    };
    for (const auto& seq : data.train) s.train.push_back(convert(seq));
    for (const auto& seq : data.test) {
        s.test.push_back(convert(seq));
        s.test_labels.push_back(seq.labels);
    }
    return s;
}

PreparedScene prepare_scene(const InputScene& scene, std::size_t height, std::size_t width,
                            std::optional<NormConstants> norm) {
    PreparedScene p;
    p.scene_id = scene.scene_id;
    p.height = height;
    p.width = width;
    if (norm) {
        p.norm = *norm;
    } else {
        std::vector<GrayFrame> all;
        for (const auto& v : scene.train) all.insert(all.end(), v.begin(), v.end());
        if (all.empty()) throw DegenerateData("scene has no training frames");
        p.norm = compute_normalization(all, height, width);
    }
    if (!(p.norm.std >= 1e-8)) throw DegenerateData("training frames have (near) zero variance");
    auto convert = [&](const std::vector<GrayFrame>& frames) {
        std::vector<Vector> out;
        out.reserve(frames.size());
        for (const auto& f : frames) out.push_back(preprocess_frame(f, p.norm, height, width));
        return out;
    };
    for (const auto& v : scene.train) p.train.push_back(convert(v));
    for (const auto& v : scene.test) p.test.push_back(convert(v));
    p.test_labels = scene.test_labels;
    if (p.test.size() != p.test_labels.size()) throw ShapeError("prepare_scene: one label list per test video expected");
    for (std::size_t k = 0; k < p.test.size(); ++k)
        if (p.test[k].size() != p.test_labels[k].size())
            throw ShapeError("prepare_scene: label count differs from frame count in test video " + std::to_string(k));
    return p;
}

EvalResult evaluate_model(Autoencoder& model, const PreparedScene& scene, const EvalOptions& options) {
    const std::size_t T = model.config().T;
    if (model.config().frame_dim != scene.frame_dim())
        throw ShapeError("model expects frame_dim " + std::to_string(model.config().frame_dim) + ", scene has " +
                         std::to_string(scene.frame_dim()));
    if (scene.test.empty()) throw InvalidInput("evaluate_model: scene has no test videos");
    if (options.batch < 1) throw ConfigError("evaluation batch must be at least 1");

    EvalResult res;
    const auto t0 = Clock::now();
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t v = 0; v < scene.test.size(); ++v) {
        const auto& frames = scene.test[v];
        const auto cuboids = build_cuboids(frames, T, 1, v);
        std::vector<std::vector<double>> errs(cuboids.size());
        for (std::size_t start = 0; start < cuboids.size(); start += options.batch) {
            const std::size_t end = std::min(cuboids.size(), start + options.batch);
            std::vector<std::size_t> idx(end - start);
            std::iota(idx.begin(), idx.end(), start);
            const auto batch = gather(cuboids, idx);
            const Sequence recon = model.forward(to_sequence(batch), Mode::Infer);
            for (std::size_t b = 0; b < batch.size(); ++b)
                for (std::size_t t = 0; t < T; ++t)
                    errs[start + b].push_back(reconstruction_error(batch[b][t].span(), recon[t].row(b)));
        }
        VideoScores vs;
        vs.rec_err = aggregate_per_frame(cuboids, errs, frames.size());
        vs.reg_score = regularity_score(vs.rec_err, options.range_denominator);
        vs.labels = scene.test_labels[v];
        for (std::size_t f = 0; f < frames.size(); ++f)
            scores.push_back(options.source == ScoreSource::RecError ? vs.rec_err[f] : 1.0 - vs.reg_score[f]);
        labels.insert(labels.end(), vs.labels.begin(), vs.labels.end());
        res.frames += frames.size();
        res.videos.push_back(std::move(vs));
    }
    res.seconds = seconds_since(t0);
    res.fps = static_cast<double>(res.frames) / std::max(res.seconds, 1e-9);
    res.curve = roc_points(scores, labels);
    res.auc = auc(res.curve);
    res.eer = eer(res.curve);
    return res;
}

AutoencoderConfig model_config_for(const PreparedScene& scene, const TrainOptions& options) {
    AutoencoderConfig c;
    c.frame_dim = c.output_dim = scene.frame_dim();
    c.T = options.T;
    c.hidden = options.hidden;
    c.variant = options.variant;
    c.activation = options.activation;
    c.validate();
    return c;
}

TrainResult train_model(const PreparedScene& scene, const TrainOptions& options, const EpochCallback& on_epoch,
                        std::optional<TrainState> resume) {
    if (options.batch < 1) throw ConfigError("batch size must be at least 1");
    if (options.strides.empty()) throw ConfigError("stride set must not be empty");
    if (!(options.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    const AutoencoderConfig config = model_config_for(scene, options);

    std::vector<Cuboid> cuboids;
    for (std::size_t stride : options.strides)
        for (std::size_t v = 0; v < scene.train.size(); ++v) {
            if (scene.train[v].size() < 1 + (options.T - 1) * stride) continue;
            auto c = build_cuboids(scene.train[v], options.T, stride, v);
            cuboids.insert(cuboids.end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
        }
    const SplitSizes split = train_val_split(cuboids.size());
    if (options.T * std::min(options.batch, split.train) < 2)
        throw DegenerateData("batch normalization needs at least 2 rows per batch");

    TrainResult res;
    TrainState& st = res.final_state;
    if (resume) {
        if (!(resume->model.config() == config)) throw ConfigError("resume snapshot was trained with another configuration");
        st = std::move(*resume);
    } else {
        st.model = build_autoencoder(config, options.seed);
        AdamHyper hyper;
        hyper.learning_rate = options.learning_rate;
        st.optimizer = AdamState::for_params(std::span<const std::span<double>>(st.model.parameter_spans()), hyper);
    }
    st.optimizer.hyper.learning_rate = options.learning_rate;
    res.best_model = st.model;
    res.best_auc = -1.0;
    res.best_eer = 2.0;

    std::vector<std::size_t> val_idx(split.val);
    std::iota(val_idx.begin(), val_idx.end(), split.train);

    for (std::size_t epoch = st.epochs_done; epoch < options.epochs; ++epoch) {
        std::vector<std::size_t> order(split.train);
        std::iota(order.begin(), order.end(), 0);
        Rng rng(epoch_seed(options.seed, epoch));
        rng.shuffle(order);

        const auto t0 = Clock::now();
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch) {
            const std::size_t end = std::min(order.size(), start + options.batch);
            // Batch normalization needs two rows; drop a lone trailing item at T = 1.
            if ((end - start) * options.T < 2) break;
            const auto batch = gather(cuboids, std::span(order).subspan(start, end - start));
            loss_sum += train_step(st.model, batch, st.optimizer);
            ++steps;
        }
        EpochLog log;
        log.epoch = epoch + 1;
        log.seconds = seconds_since(t0);
        log.train_loss = steps ? loss_sum / static_cast<double>(steps) : std::numeric_limits<double>::quiet_NaN();

        double val_sum = 0.0;
        std::size_t val_items = 0;
        for (std::size_t start = 0; start < val_idx.size(); start += options.batch) {
            const std::size_t end = std::min(val_idx.size(), start + options.batch);
            const auto batch = gather(cuboids, std::span(val_idx).subspan(start, end - start));
            val_sum += batch_loss(st.model, batch, Mode::Infer) * static_cast<double>(batch.size());
            val_items += batch.size();
        }
        log.val_loss = val_sum / static_cast<double>(val_items);

        log.auc = log.eer = std::numeric_limits<double>::quiet_NaN();
        if (options.evaluate_each_epoch && !scene.test.empty()) {
            EvalOptions eo;
            eo.batch = options.batch;
            eo.range_denominator = options.range_denominator;
            const EvalResult ev = evaluate_model(st.model, scene, eo);
            log.auc = ev.auc;
            log.eer = ev.eer;
            if (ev.auc > res.best_auc || (ev.auc == res.best_auc && ev.eer < res.best_eer)) {
                res.best_auc = ev.auc;
                res.best_eer = ev.eer;
                res.best_epoch = log.epoch;
                res.best_model = st.model;
            }
        } else {
            res.best_epoch = log.epoch;
            res.best_model = st.model;
        }
        st.epochs_done = epoch + 1;
        res.log.push_back(log);
        if (on_epoch) on_epoch(log, st);
    }
    return res;
}

}  // namespace bglstm
