#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bglstm/flow.hpp"
#include "bglstm/numerics.hpp"

namespace bglstm {

enum class AnomalyKind { FastObject, WrongDirection, NewObjectShape };

std::string to_string(AnomalyKind k);
AnomalyKind parse_anomaly_kind(const std::string& s);

struct AnomalySpec {
    AnomalyKind kind = AnomalyKind::FastObject;
    std::size_t onset = 0;
    std::size_t duration = 0;
};

struct MotionSpec {
    std::size_t object_count = 2;
    double size_min = 3.0;   // side length in pixels
    double size_max = 5.0;
    double speed_min = 0.6;  // pixels per frame
    double speed_max = 1.0;
    std::vector<double> directions_deg{0.0};
};

struct SceneConfig {
    std::string scene_id = "A";
    std::size_t width = 32;
    std::size_t height = 32;
    std::size_t train_sequences = 4;
    std::size_t test_sequences = 4;
    std::size_t frames_per_sequence = 60;
    MotionSpec motion;
    // Test sequence k carries anomalies[k % anomalies.size()].
    std::vector<AnomalySpec> anomalies{{AnomalyKind::FastObject, 20, 15}};
    double background_low = 0.15;
    double background_high = 0.45;
    double object_intensity = 0.9;
    double noise_std = 0.01;
    double fast_factor = 3.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct FrameSequence {
    std::string scene_id;
    std::vector<GrayFrame> frames;
    std::vector<int> labels;
};

struct SceneData {
    std::vector<FrameSequence> train;
    std::vector<FrameSequence> test;
};

// Deterministic in config.seed. Pixel values are multiples of 1/255 so frames
// survive an 8-bit file round trip unchanged.
SceneData synth_generate(const SceneConfig& config);

// Smoothed noise stretched to [lo, hi].
GrayFrame make_texture(std::size_t width, std::size_t height, Rng& rng, double lo, double hi, double smooth = 1.5);

// Round every pixel to the nearest multiple of 1/255 after clamping to [0, 1].
void quantize8(GrayFrame& frame);

// Bilinear resize with corner alignment.
GrayFrame resize_bilinear(const GrayFrame& frame, std::size_t height, std::size_t width);

struct NormConstants {
    double mean = 0.0;
    double std = 1.0;
};

// Pixel mean and (population) standard deviation over the frames after resizing.
NormConstants compute_normalization(std::span<const GrayFrame> frames, std::size_t height, std::size_t width);

// resize -> [0, 1] -> standardize -> flatten row-major.
Vector preprocess_frame(const GrayFrame& raw, const NormConstants& norm, std::size_t height, std::size_t width);
// 8-bit input, scaled by 1/255 first.
Vector preprocess_frame(std::span<const std::uint8_t> raw, std::size_t raw_width, std::size_t raw_height,
                        const NormConstants& norm, std::size_t height, std::size_t width);

struct Cuboid {
    std::vector<Vector> frames;
    std::vector<std::size_t> indices;  // positions in the source sequence
    std::size_t stride = 1;
    std::size_t video = 0;
};

std::vector<Cuboid> build_cuboids(std::span<const Vector> frames, std::size_t T, std::size_t stride,
                                  std::size_t video = 0);

// Prefix/suffix split of n items: floor(0.85 n) train, clamped so both sides
// are nonempty. Needs n >= 2.
struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
};
SplitSizes train_val_split(std::size_t n, double train_fraction = 0.85);

// Mean over cuboids of each frame's value; frames covered by no cuboid get
// NaN. `values[k][j]` belongs to frame cuboids[k].indices[j].
std::vector<double> aggregate_per_frame(std::span<const Cuboid> cuboids,
                                        std::span<const std::vector<double>> values, std::size_t frame_count);

}  // namespace bglstm
