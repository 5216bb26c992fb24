#include <filesystem>
#include <map>
#include <set>

#include <unistd.h>

#include "doctest.h"

#include "bglstm/io.hpp"
#include "bglstm/model_io.hpp"
#include "commands.hpp"

using namespace bglstm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("bglstm_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const char* kScene = R"({"scene-id":"S","width":16,"height":16,"train-sequences":2,"test-sequences":2,
  "frames-per-sequence":16,"motion":{"size-min":2,"size-max":4},
  "anomalies":[{"kind":"fast-object","onset":6,"duration":5}]})";

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "bglstm");
    return cli::run(args);
}

fs::path only_child(const fs::path& dir) {
    std::vector<fs::path> kids;
    for (const auto& e : fs::directory_iterator(dir)) kids.push_back(e.path());
    REQUIRE(kids.size() == 1);
    return kids.front();
}

std::map<std::string, std::vector<std::uint8_t>> tree(const fs::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_bytes(e.path());
    return out;
}

std::vector<std::string> log_lines(const fs::path& run_dir) {
    std::vector<std::string> out;
    std::istringstream in(read_text(run_dir / "train_log.csv"));
    std::string line;
    while (std::getline(in, line)) out.push_back(line);
    return out;
}

// Log line without the timing column.
std::string untimed(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    cells.erase(cells.begin() + 3);
    std::string out;
    for (const auto& x : cells) out += x + ",";
    return out;
}

}  // namespace

TEST_CASE("cli: dataset, flow, train, eval") {
    TempDir tmp;
    const fs::path scene = tmp.path / "scene.json";
    write_text(scene, kScene);
    const std::string out1 = (tmp.path / "o1").string(), out2 = (tmp.path / "o2").string();

    REQUIRE(run({"gen-data", "--scene-config", scene.string(), "--seed", "3", "--output", out1}) == 0);
    REQUIRE(run({"gen-data", "--scene-config", scene.string(), "--seed", "3", "--output", out2}) == 0);
    const fs::path data = only_child(fs::path(out1) / "data");
    CHECK(tree(data) == tree(only_child(fs::path(out2) / "data")));

    const json train_m = cli::read_manifest(data, "train");
    const json test_m = cli::read_manifest(data, "test");
    int train_pos = 0, test_pos = 0;
    for (int l : train_m["labels"]) train_pos += l;
    for (int l : test_m["labels"]) test_pos += l;
    CHECK(train_pos == 0);
    CHECK(test_pos == 10);
    CHECK(train_m["created_with_seed"] == 3);

    for (const char* kind : {"dense", "sparse"})
        REQUIRE(run({"flow", "--dataset", data.string(), "--kind", kind, "--output", out1}) == 0);

    SUBCASE("manifests list every emitted file") {
        std::set<std::string> listed = {"scene.json", "manifest_train.json", "manifest_test.json"};
        for (const auto& m : {cli::read_manifest(data, "train"), cli::read_manifest(data, "test")}) {
            for (const char* key : {"frame_files", "flow_files", "label_files"})
                for (const auto& f : m[key]) listed.insert(f.get<std::string>());
            for (const auto& [k, v] : m["flows"].items())
                for (const auto& f : v["frame_files"]) listed.insert(f.get<std::string>());
        }
        std::set<std::string> on_disk;
        for (const auto& [name, bytes] : tree(data)) on_disk.insert(name);
        CHECK(listed == on_disk);
    }

    SUBCASE("flow keeps the frame count in disjoint directories") {
        const json m = cli::read_manifest(data, "train");
        CHECK(m["flows"]["dense"]["frame_files"].size() == m["frame_files"].size());
        CHECK(m["flows"]["dense"]["flow_files"].size() == m["frame_files"].size() - 2);
        for (const auto& f : m["flows"]["dense"]["frame_files"]) CHECK(f.get<std::string>().rfind("flow-dense/", 0) == 0);
        for (const auto& f : m["flows"]["sparse"]["frame_files"])
            CHECK(f.get<std::string>().rfind("flow-sparse/", 0) == 0);
        CHECK(read_pgm(data / m["flows"]["sparse"]["frame_files"][3].get<std::string>()).width == 16);
    }

    const fs::path cfg = tmp.path / "run.json";
    write_text(cfg, R"({"epochs": 5, "batch": 4, "T": 3, "hidden": [6, 4, 6], "learning-rate": 0.001, "seed": 4})");
    const std::string tr1 = (tmp.path / "t1").string(), tr2 = (tmp.path / "t2").string();

    SUBCASE("train: snapshots, log, resume") {
        REQUIRE(run({"train", "--dataset", data.string(), "--config", cfg.string(), "--epochs", "1", "--output",
                     tr1}) == 0);
        const fs::path one = only_child(fs::path(tr1) / "train");
        std::size_t snaps = 0;
        for ([[maybe_unused]] const auto& e : fs::directory_iterator(one / "snapshots")) ++snaps;
        CHECK(snaps == 1);
        CHECK(log_lines(one).size() == 2);
        CHECK(log_lines(one)[0] == "epoch,train_loss,val_loss,seconds,auc,eer");
        const auto first = load_model(one / "snapshots" / "epoch_0001.bglm");
        CHECK(first.optimizer.has_value());
        CHECK(first.metadata["epoch"] == 1);
        CHECK(first.metadata["options"]["seed"] == 4);

        REQUIRE(run({"train", "--dataset", data.string(), "--config", cfg.string(), "--epochs", "3", "--output",
                     tr2}) == 0);
        const fs::path full = only_child(fs::path(tr2) / "train");
        // Metadata records the requested epoch count; weights and optimizer must agree.
        const auto twin = load_model(full / "snapshots" / "epoch_0001.bglm");
        CHECK(serialize_model(twin.model, &*twin.optimizer) == serialize_model(first.model, &*first.optimizer));

        const std::string tr3 = (tmp.path / "t3").string();
        REQUIRE(run({"train", "--dataset", data.string(), "--config", cfg.string(), "--epochs", "3", "--resume",
                     (one / "snapshots" / "epoch_0001.bglm").string(), "--output", tr3}) == 0);
        const fs::path resumed = only_child(fs::path(tr3) / "train");
        const auto a = log_lines(full), b = log_lines(resumed);
        REQUIRE(a.size() == 4);
        REQUIRE(b.size() == 3);
        CHECK(untimed(b[1]) == untimed(a[2]));
        CHECK(untimed(b[2]) == untimed(a[3]));
        CHECK(read_bytes(resumed / "snapshots" / "epoch_0003.bglm") == read_bytes(full / "snapshots" / "epoch_0003.bglm"));
        const json best = json::parse(read_text(full / "best.json"));
        CHECK(best["best_epoch"].get<int>() >= 1);

        SUBCASE("eval") {
            const std::string model = (full / "snapshots" / "epoch_0002.bglm").string();
            const std::string e1 = (tmp.path / "e1").string();
            REQUIRE(run({"eval", "--model", model, "--dataset", data.string(), "--output", e1}) == 0);
            REQUIRE(run({"eval", "--model", model, "--dataset", data.string(), "--output", e1}) == 0);
            std::vector<json> sums;
            for (const auto& e : fs::directory_iterator(fs::path(e1) / "eval")) {
                sums.push_back(json::parse(read_text(e.path() / "summary.json")));
                CHECK(fs::exists(e.path() / "roc.csv"));
                CHECK(fs::exists(e.path() / "regularity" / "video_001.csv"));
                CHECK(read_text(e.path() / "summary.csv").rfind("method,scene,seed,AUC,EER", 0) == 0);
            }
            REQUIRE(sums.size() == 2);
            CHECK(sums[0]["auc"] == sums[1]["auc"]);
            CHECK(sums[0]["eer"] == sums[1]["eer"]);
            CHECK(sums[0]["auc"].get<double>() >= 0.0);
            CHECK(sums[0]["auc"].get<double>() <= 1.0);
            CHECK(sums[0]["test_fps"].get<double>() > 0.0);

            // A 12x12 scene cannot feed a 16x16 model.
            json small = json::parse(kScene);
            small["width"] = small["height"] = 12;
            write_text(tmp.path / "small.json", small.dump());
            const std::string o3 = (tmp.path / "o3").string();
            REQUIRE(run({"gen-data", "--scene-config", (tmp.path / "small.json").string(), "--output", o3}) == 0);
            const fs::path small_data = only_child(fs::path(o3) / "data");
            CHECK(run({"eval", "--model", model, "--dataset", small_data.string(), "--input-kind", "raw",
                       "--output", e1}) == 4);

            const std::string g = (tmp.path / "g").string();
            REQUIRE(run({"generalize", "--model", model, "--dataset", data.string(), "--output", g}) == 0);
            const std::string matrix = read_text(only_child(fs::path(g) / "generalize") / "matrix.csv");
            CHECK(matrix.rfind("train_scene,test_scene,AUC,EER\nS,S,", 0) == 0);
        }
    }

    SUBCASE("exit codes") {
        const std::string o = (tmp.path / "x").string();
        CHECK(run({"train", "--output", o}) == 1);
        CHECK(run({"frobnicate"}) == 1);
        CHECK(run({"train", "--dataset", data.string(), "--variant", "gru", "--output", o}) == 1);
        write_text(tmp.path / "bad.json", R"({"epochs": 1, "colour": "red"})");
        CHECK(run({"train", "--dataset", data.string(), "--config", (tmp.path / "bad.json").string(), "--output",
                   o}) == 1);
        CHECK(run({"train", "--dataset", (tmp.path / "nowhere").string(), "--output", o}) == 2);
        // More frames per cuboid than frames per video leaves nothing to train on.
        CHECK(run({"train", "--dataset", data.string(), "--T", "40", "--epochs", "1", "--output", o}) == 3);
        fs::remove(data / "test" / "video_001" / "frame_0004.pgm");
        CHECK(run({"flow", "--dataset", data.string(), "--output", o}) == 2);
    }
}
