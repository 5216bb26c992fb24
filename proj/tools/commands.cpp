#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "bglstm/config.hpp"
#include "bglstm/errors.hpp"
#include "bglstm/experiments.hpp"
#include "bglstm/io.hpp"
#include "bglstm/model_io.hpp"

namespace bglstm::cli {

using nlohmann::json;

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, i, ext);
    return buf;
}

std::string video_name(std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "video_%03zu", v);
    return buf;
}

std::string flow_key(InputKind kind) {
    if (kind == InputKind::DenseFlow) return "dense";
    if (kind == InputKind::SparseFlow) return "sparse";
    throw InvalidInput("raw input has no flow files");
}

InputKind parse_flow_kind(const std::string& s) {
    if (s == "dense" || s == "dense-flow") return InputKind::DenseFlow;
    if (s == "sparse" || s == "sparse-flow") return InputKind::SparseFlow;
    throw ConfigError("unknown flow kind '" + s + "' (expected dense or sparse)");
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::istringstream one(item);
        T v{};
        if (!(one >> v) || !one.eof()) throw ConfigError(std::string("bad ") + what + " list '" + s + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

CellVariant parse_variant(const std::string& name, bool literal) {
    switch (parse_cell_kind(name)) {
        case CellKind::Standard: return CellVariant::standard();
        case CellKind::NoInputGate: return CellVariant::no_input_gate();
        case CellKind::BiGated: return CellVariant::bi_gated(literal);
    }
    return CellVariant::bi_gated(literal);
}

std::string variant_label(const CellVariant& v) {
    return to_string(v.kind) + (v.literal_eq13 ? "-literal" : "");
}

std::vector<std::vector<GrayFrame>> read_videos(const fs::path& dir, const json& files, const json& lengths) {
    std::vector<std::vector<GrayFrame>> out;
    std::size_t k = 0;
    for (const auto& len : lengths) {
        std::vector<GrayFrame> video;
        for (std::size_t i = 0; i < len.get<std::size_t>(); ++i) {
            if (k >= files.size()) throw IoError("manifest lists fewer files than its video lengths");
            const fs::path p = dir / files[k++].get<std::string>();
            if (!fs::exists(p)) throw IoError("missing frame " + p.string());
            video.push_back(read_pgm(p));
        }
        out.push_back(std::move(video));
    }
    return out;
}

std::vector<std::vector<int>> split_labels(const json& labels, const json& lengths) {
    std::vector<std::vector<int>> out;
    std::size_t k = 0;
    for (const auto& len : lengths) {
        std::vector<int> v;
        for (std::size_t i = 0; i < len.get<std::size_t>(); ++i) v.push_back(labels.at(k++).get<int>());
        out.push_back(std::move(v));
    }
    return out;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

json to_json(const NormConstants& n) { return {{"mean", n.mean}, {"std", n.std}}; }

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Mean per-epoch seconds from the train log beside a snapshot, if any.
double seconds_from_log(const fs::path& model_path) {
    const fs::path log = model_path.parent_path().parent_path() / "train_log.csv";
    if (!fs::exists(log)) return std::nan("");
    std::istringstream in(read_text(log));
    std::string line;
    std::getline(in, line);
    double sum = 0.0;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        std::stringstream row(line);
        std::string cell;
        for (int c = 0; c < 4 && std::getline(row, cell, ','); ++c)
            if (c == 3) sum += std::stod(cell), ++n;
    }
    return n ? sum / static_cast<double>(n) : std::nan("");
}

PreparedScene load_for_model(const fs::path& dataset, const ModelBundle& bundle, const std::string& kind_flag) {
    std::string kind = kind_flag;
    if (kind.empty()) kind = bundle.metadata.value("input_kind", std::string("dense-flow"));
    return load_prepared(dataset, parse_input_kind(kind));
}

void print_rows(const std::vector<ReportRow>& rows) {
    for (const auto& r : rows)
        if (r.seed == "median")
            std::cout << r.scene << "  " << r.method << "  median AUC " << fixed(r.auc) << "  EER " << fixed(r.eer)
                      << "  s/epoch " << fixed(r.train_seconds_per_epoch, 2) << "  fps " << fixed(r.test_fps, 1)
                      << "\n";
}

double median_of(const std::vector<ReportRow>& rows, const std::string& scene, const std::string& method) {
    for (const auto& r : rows)
        if (r.seed == "median" && r.scene == scene && r.method == method) return r.auc;
    return std::nan("");
}

// Config file values become command-line tokens placed before the user's,
// skipping any option the user spelled out.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::string config_path;
    std::set<std::string> given;
    std::size_t sub_at = 0;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--config=", 0) == 0) {
            config_path = a.substr(9);
            continue;
        }
        if (a == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
            continue;
        }
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos
                                                                                                 : a.find('=') - 2));
        else if (sub_at == 0 && a.rfind("-", 0) != 0) sub_at = i;
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            ++i;
            continue;
        }
        if (args[i].rfind("--config=", 0) == 0) continue;
        out.push_back(args[i]);
        if (i != sub_at || config_path.empty()) continue;
        json j;
        try {
            j = json::parse(read_text(config_path));
        } catch (const json::exception& e) {
            throw ConfigError("config file " + config_path + ": " + e.what());
        }
        if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (given.count(key)) continue;
            const std::string flag = "--" + key;
            if (value.is_boolean()) {
                out.push_back(flag + (value.get<bool>() ? "" : "=false"));
            } else if (value.is_string()) {
                out.push_back(flag);
                out.push_back(value.get<std::string>());
            } else if (value.is_number()) {
                out.push_back(flag);
                out.push_back(value.dump());
            } else if (value.is_array()) {
                std::string joined;
                for (const auto& e : value) {
                    if (e.is_string()) {
                        out.push_back(flag);
                        out.push_back(e.get<std::string>());
                    } else {
                        joined += (joined.empty() ? "" : ",") + e.dump();
                    }
                }
                if (!joined.empty()) {
                    out.push_back(flag);
                    out.push_back(joined);
                }
            } else {
                throw ConfigError("config key '" + key + "' has an unsupported value");
            }
        }
    }
    if (sub_at == 0 && !config_path.empty()) throw ConfigError("--config needs a subcommand");
    return out;
}

struct TrainFlags {
    std::string variant = "bigated";
    std::string activation = "relu";
    std::string stride_set = "1";
    std::string hidden = "32,16,8,16,32";
    std::size_t epochs = 60;
    std::size_t batch = 8;
    std::size_t T = 4;
    double learning_rate = 1e-5;
    std::uint64_t seed = 1;
    bool literal = false;
    bool range_denominator = false;

    void add_to(CLI::App* app, bool with_variant = true) {
        if (with_variant) {
            app->add_option("--variant", variant, "Cell variant: standard, bigated, no-input-gate")
                ->capture_default_str();
            app->add_flag("--literal-eq13", literal, "BiGated cell update without the input gate on the candidate");
        }
        app->add_option("--activation", activation, "Activation between layers: relu or tanh")->capture_default_str();
        app->add_option("--hidden", hidden, "Recurrent layer widths between input and output")->capture_default_str();
        app->add_option("--epochs", epochs)->capture_default_str();
        app->add_option("--batch", batch)->capture_default_str();
        app->add_option("--lr,--learning-rate", learning_rate)->capture_default_str();
        app->add_option("-T,--T", T, "Frames per cuboid")->capture_default_str();
        app->add_option("--stride-set", stride_set, "Comma-separated cuboid strides")->capture_default_str();
        app->add_option("--seed", seed)->capture_default_str();
        app->add_flag("--range-denominator", range_denominator, "Regularity uses max-min instead of max");
    }

    TrainOptions options() const {
        TrainOptions o;
        o.variant = parse_variant(variant, literal);
        o.activation = parse_activation(activation);
        o.hidden = parse_list<std::size_t>(hidden, "hidden");
        o.epochs = epochs;
        o.batch = batch;
        o.T = T;
        o.strides = parse_list<std::size_t>(stride_set, "stride");
        o.learning_rate = learning_rate;
        o.seed = seed;
        o.range_denominator = range_denominator;
        if (epochs < 1) throw ConfigError("--epochs must be at least 1");
        if (batch < 1 || T < 1) throw ConfigError("--batch and --T must be at least 1");
        if (!(learning_rate > 0.0)) throw ConfigError("--learning-rate must be positive");
        return o;
    }
};

json options_json(const TrainOptions& o) {
    return {{"variant", to_string(o.variant.kind)},
            {"literal-eq13", o.variant.literal_eq13},
            {"activation", to_string(o.activation)},
            {"hidden", o.hidden},
            {"epochs", o.epochs},
            {"batch", o.batch},
            {"learning-rate", o.learning_rate},
            {"T", o.T},
            {"stride-set", o.strides},
            {"seed", o.seed},
            {"range-denominator", o.range_denominator}};
}

// Scenes for ablate and bench: datasets on disk, else built-in presets.
std::vector<SceneData> gather_scenes(const std::vector<std::string>& datasets, const std::vector<std::string>& presets,
                                     std::uint64_t scene_seed) {
    std::vector<SceneData> out;
    for (const auto& d : datasets) out.push_back(read_scene_data(dataset_dir(d)));
    for (const auto& p : presets) out.push_back(synth_generate(benchmark_scene(p, scene_seed)));
    if (out.empty()) out.push_back(synth_generate(benchmark_scene("A", scene_seed)));
    return out;
}

}  // namespace

fs::path output_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("BGLSTM_OUTPUT_ROOT"); env && *env) return env;
    return "runs";
}

fs::path make_run_dir(const fs::path& root, const std::string& command, const std::string& name) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    const fs::path base = root / command / (name + "-" + stamp);
    fs::path dir = base;
    for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

void write_dataset(const SceneConfig& config, const fs::path& dir) {
    const SceneData data = synth_generate(config);
    std::vector<GrayFrame> train_frames;
    for (const auto& s : data.train) train_frames.insert(train_frames.end(), s.frames.begin(), s.frames.end());
    const NormConstants norm = compute_normalization(train_frames, config.height, config.width);

    write_json(dir / "scene.json", scene_config_to_json(config));
    for (const std::string split : {"train", "test"}) {
        const auto& seqs = split == "train" ? data.train : data.test;
        json m;
        m["scene_id"] = config.scene_id;
        m["split"] = split;
        m["width"] = config.width;
        m["height"] = config.height;
        json frames = json::array(), labels = json::array(), label_files = json::array(), lengths = json::array();
        for (std::size_t v = 0; v < seqs.size(); ++v) {
            const fs::path vdir = fs::path(split) / video_name(v);
            for (std::size_t i = 0; i < seqs[v].frames.size(); ++i) {
                const fs::path rel = vdir / numbered("frame", i, ".pgm");
                write_pgm(dir / rel, seqs[v].frames[i]);
                frames.push_back(rel.generic_string());
            }
            write_labels_csv(dir / vdir / "labels.csv", seqs[v].labels);
            label_files.push_back((vdir / "labels.csv").generic_string());
            for (int l : seqs[v].labels) labels.push_back(l);
            lengths.push_back(seqs[v].frames.size());
        }
        m["frame_files"] = frames;
        m["flow_files"] = json::array();
        m["label_files"] = label_files;
        m["labels"] = labels;
        m["video_lengths"] = lengths;
        m["mean"] = norm.mean;
        m["std"] = norm.std;
        m["created_with_seed"] = config.seed;
        m["flows"] = json::object();
        if (split == "test") m["train_manifest"] = "manifest_train.json";
        write_json(dir / ("manifest_" + split + ".json"), m);
    }
}

json read_manifest(const fs::path& dir, const std::string& split) {
    const fs::path p = dir / ("manifest_" + split + ".json");
    if (!fs::exists(p)) throw IoError("missing manifest " + p.string());
    try {
        return json::parse(read_text(p));
    } catch (const json::exception& e) {
        throw IoError("unreadable manifest " + p.string() + ": " + e.what());
    }
}

fs::path dataset_dir(const fs::path& arg) {
    if (fs::is_regular_file(arg)) return arg.parent_path().empty() ? fs::path(".") : arg.parent_path();
    if (!fs::is_directory(arg)) throw IoError("no dataset at " + arg.string());
    return arg;
}

void write_flow(const fs::path& dir, InputKind kind, const FlowOptions& options) {
    const std::string key = flow_key(kind);
    const fs::path sub = "flow-" + key;
    NormConstants norm;
    for (const std::string split : {"train", "test"}) {
        json m = read_manifest(dir, split);
        const auto videos = read_videos(dir, m.at("frame_files"), m.at("video_lengths"));
        json frames = json::array(), flos = json::array();
        std::vector<GrayFrame> rendered_all;
        for (std::size_t v = 0; v < videos.size(); ++v) {
            const fs::path vdir = sub / split / video_name(v);
            const RenderedFlow r = render_flow_sequence(videos[v], kind, options);
            for (std::size_t i = 0; i < r.flows.size(); ++i) {
                const fs::path rel = vdir / numbered("flow", i, ".flo");
                write_flo(dir / rel, r.flows[i]);
                flos.push_back(rel.generic_string());
            }
            for (std::size_t i = 0; i < r.frames.size(); ++i) {
                const fs::path rel = vdir / numbered("frame", i, ".pgm");
                write_pgm(dir / rel, r.frames[i]);
                frames.push_back(rel.generic_string());
            }
            if (split == "train") rendered_all.insert(rendered_all.end(), r.frames.begin(), r.frames.end());
        }
        if (split == "train")
            norm = compute_normalization(rendered_all, m.at("height").get<std::size_t>(),
                                         m.at("width").get<std::size_t>());
        m["flows"][key] = {{"frame_files", frames}, {"flow_files", flos}, {"mean", norm.mean}, {"std", norm.std}};
        json all = json::array();
        for (const char* k : {"dense", "sparse"})
            if (m["flows"].contains(k))
                for (const auto& f : m["flows"][k]["flow_files"]) all.push_back(f);
        m["flow_files"] = all;
        write_json(dir / ("manifest_" + split + ".json"), m);
    }
}

SceneData read_scene_data(const fs::path& dir) {
    SceneData out;
    for (const std::string split : {"train", "test"}) {
        const json m = read_manifest(dir, split);
        const auto videos = read_videos(dir, m.at("frame_files"), m.at("video_lengths"));
        const auto labels = split_labels(m.at("labels"), m.at("video_lengths"));
        for (std::size_t v = 0; v < videos.size(); ++v) {
            FrameSequence s{m.at("scene_id").get<std::string>(), videos[v], labels[v]};
            (split == "train" ? out.train : out.test).push_back(std::move(s));
        }
    }
    return out;
}

PreparedScene load_prepared(const fs::path& dir, InputKind kind) {
    const json train = read_manifest(dir, "train");
    const json test = read_manifest(dir, "test");
    InputScene in;
    in.scene_id = train.at("scene_id").get<std::string>();
    NormConstants norm;
    if (kind == InputKind::Raw) {
        in.train = read_videos(dir, train.at("frame_files"), train.at("video_lengths"));
        in.test = read_videos(dir, test.at("frame_files"), test.at("video_lengths"));
        norm = {train.at("mean").get<double>(), train.at("std").get<double>()};
    } else {
        const std::string key = flow_key(kind);
        if (!train["flows"].contains(key) || !test["flows"].contains(key))
            throw IoError("dataset " + dir.string() + " has no " + key + " flow; run `bglstm flow --kind " + key +
                          "` first");
        in.train = read_videos(dir, train["flows"][key].at("frame_files"), train.at("video_lengths"));
        in.test = read_videos(dir, test["flows"][key].at("frame_files"), test.at("video_lengths"));
        norm = {train["flows"][key].at("mean").get<double>(), train["flows"][key].at("std").get<double>()};
    }
    in.test_labels = split_labels(test.at("labels"), test.at("video_lengths"));
    return prepare_scene(in, train.at("height").get<std::size_t>(), train.at("width").get<std::size_t>(), norm);
}

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Bi-gated LSTM autoencoder for video anomaly detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bglstm 1.0");
    std::string output;
    auto add_common = [&](CLI::App* sub) {
        sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        sub->add_option("--output", output, "Output root (default $BGLSTM_OUTPUT_ROOT or ./runs)");
        sub->add_option("--config", "JSON file whose keys are long flag names; flags override it");
    };

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic scene as PGM frames, labels and manifests");
    add_common(gen);
    std::string scene_config, preset = "A", scene_id;
    std::uint64_t gen_seed = 7;
    gen->add_option("--scene-config", scene_config, "Scene description (JSON)");
    gen->add_option("--preset", preset, "Built-in scene when no --scene-config: A or B")->capture_default_str();
    gen->add_option("--scene-id", scene_id, "Override the scene id");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();

    // flow
    auto* flow = app.add_subcommand("flow", "Compute optical flow for every video of a dataset");
    add_common(flow);
    std::string flow_dataset, flow_kind = "dense";
    flow->add_option("--dataset,--manifest", flow_dataset, "Dataset directory or one of its manifests")->required();
    flow->add_option("--kind", flow_kind, "dense or sparse")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Train an autoencoder; one snapshot per epoch");
    add_common(train);
    TrainFlags tf;
    std::string train_dataset, train_kind = "dense-flow", resume;
    train->add_option("--dataset", train_dataset, "Dataset directory")->required();
    train->add_option("--input-kind", train_kind, "raw, sparse-flow or dense-flow")->capture_default_str();
    train->add_option("--resume", resume, "Continue from a snapshot written by train");
    tf.add_to(train);

    // eval
    auto* ev = app.add_subcommand("eval", "Score a dataset's test split with a trained model");
    add_common(ev);
    std::string eval_model, eval_dataset, eval_kind, eval_score = "rec-err";
    bool eval_range = false;
    std::size_t eval_batch = 8;
    ev->add_option("--model", eval_model)->required();
    ev->add_option("--dataset", eval_dataset)->required();
    ev->add_option("--input-kind", eval_kind, "Defaults to the kind the model was trained on");
    ev->add_option("--score", eval_score, "ROC sweep over rec-err or regularity")->capture_default_str();
    ev->add_option("--batch", eval_batch)->capture_default_str();
    ev->add_flag("--range-denominator", eval_range);

    // ablate
    auto* ab = app.add_subcommand("ablate", "Input-based or component-based ablation over seeds");
    add_common(ab);
    TrainFlags af;
    std::string suite = "component", seeds = "1,2,3";
    std::vector<std::string> ab_datasets, ab_scenes;
    std::uint64_t ab_scene_seed = 7;
    ab->add_option("--suite", suite, "input or component")->capture_default_str();
    ab->add_option("--seeds", seeds, "Comma-separated training seeds")->capture_default_str();
    ab->add_option("--dataset", ab_datasets, "Dataset directory (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    ab->add_option("--scene", ab_scenes, "Built-in scene A or B (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    ab->add_option("--scene-seed", ab_scene_seed, "Generator seed for built-in scenes")->capture_default_str();
    af.add_to(ab, false);

    // generalize
    auto* gz = app.add_subcommand("generalize", "Evaluate every model on every dataset");
    add_common(gz);
    std::vector<std::string> gz_models, gz_datasets;
    bool gz_range = false;
    gz->add_option("--model", gz_models, "Trained model (repeatable)")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    gz->add_option("--dataset", gz_datasets, "Dataset directory (repeatable)")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    gz->add_flag("--range-denominator", gz_range);

    // bench
    auto* bench = app.add_subcommand("bench", "Per-epoch training time and test fps per cell variant");
    add_common(bench);
    TrainFlags bf;
    bf.epochs = 1;
    std::string variants = "standard,no-input-gate,bigated", bench_kind = "dense-flow", bench_scene = "A";
    std::string bench_dataset;
    std::size_t runs = 3;
    bench->add_option("--variants", variants)->capture_default_str();
    bench->add_option("--runs", runs)->capture_default_str();
    bench->add_option("--input-kind", bench_kind)->capture_default_str();
    bench->add_option("--dataset", bench_dataset, "Dataset directory (default: built-in scene)");
    bench->add_option("--scene", bench_scene, "Built-in scene when no --dataset")->capture_default_str();
    bf.add_to(bench, false);

    std::vector<std::string> args;
    try {
        args = expand_config(raw_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        const fs::path root = output_root(output);
        if (*gen) {
            SceneConfig cfg = scene_config.empty() ? benchmark_scene(preset, gen_seed)
                                                   : scene_config_from_json(json::parse(read_text(scene_config)));
            if (!scene_config.empty() && gen_seed_opt->count()) cfg.seed = gen_seed;
            if (!scene_id.empty()) cfg.scene_id = scene_id;
            cfg.validate();
            const fs::path dir = make_run_dir(root, "data", cfg.scene_id + "-seed" + std::to_string(cfg.seed));
            write_dataset(cfg, dir);
            std::cout << "dataset: " << dir.string() << "\n";
        } else if (*flow) {
            const fs::path dir = dataset_dir(flow_dataset);
            const InputKind kind = parse_flow_kind(flow_kind);
            write_flow(dir, kind);
            std::cout << "flow: " << (dir / ("flow-" + flow_key(kind))).string() << "\n";
        } else if (*train) {
            const TrainOptions opts = tf.options();
            const InputKind kind = parse_input_kind(train_kind);
            const fs::path data = dataset_dir(train_dataset);
            const PreparedScene scene = load_prepared(data, kind);
            std::optional<TrainState> state;
            if (!resume.empty()) {
                ModelBundle b = load_model(resume);
                if (!b.optimizer) throw ConfigError("snapshot " + resume + " carries no optimizer state");
                state = TrainState{std::move(b.model), *b.optimizer, b.metadata.value("epoch", std::size_t{0})};
            }
            const fs::path dir = make_run_dir(root, "train",
                                              scene.scene_id + "-" + variant_label(opts.variant) + "-" +
                                                  to_string(kind) + "-seed" + std::to_string(opts.seed));
            json meta = {{"scene_id", scene.scene_id},
                         {"input_kind", to_string(kind)},
                         {"height", scene.height},
                         {"width", scene.width},
                         {"norm", to_json(scene.norm)},
                         {"options", options_json(opts)}};
            write_json(dir / "run_config.json", {{"dataset", fs::absolute(data).string()}, {"metadata", meta}});
            const fs::path log_path = dir / "train_log.csv";
            write_text(log_path, "epoch,train_loss,val_loss,seconds,auc,eer\n");
            auto on_epoch = [&](const EpochLog& l, const TrainState& st) {
                json m = meta;
                m["epoch"] = l.epoch;
                save_model(dir / "snapshots" / numbered("epoch", l.epoch, ".bglm"), st.model, &st.optimizer, m);
                std::ofstream log(log_path, std::ios::app);
                log.precision(10);
                log << l.epoch << ',' << l.train_loss << ',' << l.val_loss << ',' << l.seconds << ',' << l.auc << ','
                    << l.eer << '\n';
                if (!log) throw IoError("cannot append to " + log_path.string());
                std::cout << "epoch " << l.epoch << "  loss " << fixed(l.train_loss) << "  val " << fixed(l.val_loss)
                          << "  AUC " << fixed(l.auc) << "  EER " << fixed(l.eer) << "  " << fixed(l.seconds, 2)
                          << " s\n"
                          << std::flush;
            };
            const TrainResult r = train_model(scene, opts, on_epoch, std::move(state));
            if (r.log.empty()) throw ConfigError("nothing to train: snapshot already has " + std::to_string(opts.epochs) +
                                                 " epochs");
            const std::string best = "snapshots/" + numbered("epoch", r.best_epoch, ".bglm");
            write_json(dir / "best.json",
                       {{"best_epoch", r.best_epoch}, {"auc", r.best_auc}, {"eer", r.best_eer}, {"snapshot", best}});
            std::cout << "best epoch " << r.best_epoch << "  AUC " << fixed(r.best_auc) << "  EER "
                      << fixed(r.best_eer) << "\nrun: " << dir.string() << "\n";
        } else if (*ev) {
            ModelBundle b = load_model(eval_model);
            const fs::path data = dataset_dir(eval_dataset);
            const PreparedScene scene = load_for_model(data, b, eval_kind);
            EvalOptions eo;
            eo.batch = eval_batch;
            eo.range_denominator = eval_range;
            if (eval_score == "rec-err") eo.source = ScoreSource::RecError;
            else if (eval_score == "regularity") eo.source = ScoreSource::Regularity;
            else throw ConfigError("--score must be rec-err or regularity");
            const EvalResult r = evaluate_model(b.model, scene, eo);
            const fs::path dir = make_run_dir(root, "eval", scene.scene_id + "-" + fs::path(eval_model).stem().string());
            write_text(dir / "roc.csv", roc_csv(r.curve));
            for (std::size_t v = 0; v < r.videos.size(); ++v)
                write_text(dir / "regularity" / (video_name(v) + ".csv"), regularity_csv(r.videos[v]));
            ReportRow row;
            row.method = variant_label(b.model.config().variant) + "/" +
                         b.metadata.value("input_kind", std::string("dense-flow"));
            row.scene = scene.scene_id;
            if (b.metadata.contains("options")) row.seed = std::to_string(b.metadata["options"].value("seed", 0));
            row.auc = r.auc;
            row.eer = r.eer;
            row.train_seconds_per_epoch = seconds_from_log(eval_model);
            row.test_fps = r.fps;
            write_text(dir / "summary.csv", report_csv({row}));
            write_json(dir / "summary.json", {{"model", eval_model},
                                              {"dataset", fs::absolute(data).string()},
                                              {"auc", r.auc},
                                              {"eer", r.eer},
                                              {"frames", r.frames},
                                              {"seconds", r.seconds},
                                              {"test_fps", r.fps}});
            std::cout << "AUC " << fixed(r.auc) << "  EER " << fixed(r.eer) << "  fps " << fixed(r.fps, 1)
                      << "\nrun: " << dir.string() << "\n";
        } else if (*ab) {
            AblationConfig cfg;
            cfg.suite = parse_ablation_suite(suite);
            cfg.seeds = parse_list<std::uint64_t>(seeds, "seed");
            cfg.train = af.options();
            const auto scenes = gather_scenes(ab_datasets, ab_scenes, ab_scene_seed);
            cfg.height = scenes.front().train.front().frames.front().height;
            cfg.width = scenes.front().train.front().frames.front().width;
            const fs::path dir = make_run_dir(root, "ablate", to_string(cfg.suite));
            const auto rows = run_ablation(scenes, cfg, nullptr, [](const std::string& s) {
                std::cout << s << "\n" << std::flush;
            });
            write_text(dir / "report.csv", report_csv(rows));
            print_rows(rows);
            for (const auto& s : scenes) {
                const std::string id = s.train.front().scene_id;
                const bool ok = cfg.suite == AblationSuite::ComponentBased
                                    ? median_of(rows, id, "bigated/dense-flow") >=
                                              median_of(rows, id, "no-input-gate/dense-flow") &&
                                          median_of(rows, id, "no-input-gate/dense-flow") >=
                                              median_of(rows, id, "standard/dense-flow")
                                    : median_of(rows, id, "bigated/dense-flow") >= median_of(rows, id, "bigated/raw");
                std::cout << id << ": expected ordering " << (ok ? "holds" : "does not hold") << "\n";
            }
            std::cout << "report: " << (dir / "report.csv").string() << "\n";
        } else if (*gz) {
            std::vector<Autoencoder> models;
            std::vector<std::string> names;
            std::vector<std::string> kinds;
            for (const auto& m : gz_models) {
                ModelBundle b = load_model(m);
                names.push_back(b.metadata.value("scene_id", fs::path(m).stem().string()));
                kinds.push_back(b.metadata.value("input_kind", std::string("dense-flow")));
                models.push_back(std::move(b.model));
            }
            EvalOptions eo;
            eo.range_denominator = gz_range;
            std::vector<CrossSceneCell> cells;
            for (std::size_t i = 0; i < models.size(); ++i)
                for (const auto& d : gz_datasets) {
                    const PreparedScene scene = load_prepared(dataset_dir(d), parse_input_kind(kinds[i]));
                    const EvalResult r = run_generalization(models[i], scene, eo);
                    cells.push_back({names[i], scene.scene_id, r.auc, r.eer});
                    std::cout << names[i] << " -> " << scene.scene_id << "  AUC " << fixed(r.auc) << "  EER "
                              << fixed(r.eer) << "\n";
                }
            const fs::path dir = make_run_dir(root, "generalize", "matrix");
            write_text(dir / "matrix.csv", cross_scene_csv(cells));
            std::cout << "matrix: " << (dir / "matrix.csv").string() << "\n";
        } else if (*bench) {
            const InputKind kind = parse_input_kind(bench_kind);
            TrainOptions base = bf.options();
            base.evaluate_each_epoch = false;
            const PreparedScene scene =
                bench_dataset.empty()
                    ? prepare_scene(make_input_scene(synth_generate(benchmark_scene(bench_scene)), kind), 32, 32)
                    : load_prepared(dataset_dir(bench_dataset), kind);
            std::ostringstream csv;
            csv.precision(10);
            csv << "variant,run,train_seconds_per_epoch,test_fps\n";
            for (const auto& name : split_names(variants)) {
                TrainOptions o = base;
                o.variant = parse_variant(name, bf.literal);
                std::vector<double> secs, fps;
                for (std::size_t k = 0; k < runs; ++k) {
                    const TrainResult tr = train_model(scene, o);
                    double s = 0.0;
                    for (const auto& l : tr.log) s += l.seconds;
                    Autoencoder model = tr.final_state.model;
                    const EvalResult er = evaluate_model(model, scene);
                    secs.push_back(s / static_cast<double>(tr.log.size()));
                    fps.push_back(er.fps);
                    csv << variant_label(o.variant) << ',' << k + 1 << ',' << secs.back() << ',' << fps.back() << '\n';
                }
                std::cout << variant_label(o.variant) << "  median s/epoch " << fixed(median(secs), 3)
                          << "  median fps " << fixed(median(fps), 1) << "\n";
            }
            const fs::path dir = make_run_dir(root, "bench", to_string(kind));
            write_text(dir / "timing.csv", csv.str());
            std::cout << "timing: " << (dir / "timing.csv").string() << "\n";
        }
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMismatch;
    } catch (const DegenerateData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDegenerate;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << " (format code " << static_cast<int>(e.code()) << ")\n";
        return kIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}

}  // namespace bglstm::cli
