#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "bglstm/data.hpp"
#include "bglstm/pipeline.hpp"

namespace bglstm::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kDegenerate = 3, kMismatch = 4 };

// --output, then $BGLSTM_OUTPUT_ROOT, then ./runs.
fs::path output_root(const std::string& flag);

// root/command/name-YYYYmmdd-HHMMSS, with a numeric suffix if taken.
fs::path make_run_dir(const fs::path& root, const std::string& command, const std::string& name);

// Dataset layout under `dir`:
//   scene.json, manifest_train.json, manifest_test.json
//   {train,test}/video_NNN/frame_NNNN.pgm + labels.csv
//   flow-{dense,sparse}/{train,test}/video_NNN/{flow_NNNN.flo,frame_NNNN.pgm}
// Manifest paths are relative to `dir`.
void write_dataset(const SceneConfig& config, const fs::path& dir);

// Adds flows of `kind` (SparseFlow or DenseFlow) to both manifests.
void write_flow(const fs::path& dir, InputKind kind, const FlowOptions& options = {});

nlohmann::json read_manifest(const fs::path& dir, const std::string& split);

// Raw frames and labels of a dataset on disk.
SceneData read_scene_data(const fs::path& dir);

// Frames of one input kind, standardized with the constants in the manifest.
PreparedScene load_prepared(const fs::path& dir, InputKind kind);

// Resolves a --dataset argument that may name a manifest file.
fs::path dataset_dir(const fs::path& arg);

// Whole command line, argv[0] included. Returns the process exit code.
int run(const std::vector<std::string>& args);

}  // namespace bglstm::cli
