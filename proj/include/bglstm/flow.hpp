#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace bglstm {

// Single-channel frame with intensities in [0, 1], row-major.
struct GrayFrame {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;

    GrayFrame() = default;
    GrayFrame(std::size_t w, std::size_t h, double value = 0.0) : width(w), height(h), pixels(w * h, value) {}

    double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
    // Replicate-padded access.
    double clamped(long x, long y) const;
    // Bilinear sample with replicate padding.
    double sample(double x, double y) const;
    void clamp_values();

    bool operator==(const GrayFrame&) const = default;
};

// Dense per-pixel displacement (u along x, v along y) in pixels.
struct FlowField {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> u;
    std::vector<double> v;

    FlowField() = default;
    FlowField(std::size_t w, std::size_t h) : width(w), height(h), u(w * h, 0.0), v(w * h, 0.0) {}

    bool operator==(const FlowField&) const = default;
};

struct TrackedPoint {
    double x = 0.0;
    double y = 0.0;
    double u = 0.0;
    double v = 0.0;
    bool trackable = true;
    double min_eigenvalue = 0.0;  // per-pixel normalized structure-tensor eigenvalue
};

using SparseFlow = std::vector<TrackedPoint>;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Local quadratic model f(p) ~ p^T A p + b^T p + c around each pixel, with p in
// pixel offsets (x to the right, y down).
struct PolyPixel {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;
    double b1 = 0.0, b2 = 0.0;
    double c = 0.0;
};

struct PolyCoeffs {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<PolyPixel> coeffs;

    const PolyPixel& at(std::size_t x, std::size_t y) const { return coeffs[y * width + x]; }
};

// Gaussian-weighted least-squares quadratic fit over a (2r+1)^2 neighbourhood,
// r = ceil(3 sigma), with replicate padding.
PolyCoeffs poly_expansion(const GrayFrame& frame, double window_sigma);

struct FarnebackParams {
    std::size_t levels = 1;       // pyramid levels, 1 = single scale
    double poly_sigma = 1.5;      // applicability of the polynomial fit
    double window_sigma = 2.5;    // averaging window for the displacement solve
    std::size_t iterations = 5;   // refinement passes per level
};

FlowField farneback_dense(const GrayFrame& prev, const GrayFrame& next, const FarnebackParams& params = {});

struct LucasKanadeParams {
    std::size_t window = 15;      // odd side length
    std::size_t levels = 3;
    std::size_t max_iterations = 20;
    double min_eigenvalue = 1e-4;  // below this the point is flagged untrackable
};

SparseFlow lucas_kanade(const GrayFrame& prev, const GrayFrame& next, const std::vector<Point2>& points,
                        const LucasKanadeParams& params = {});

struct FeatureParams {
    double quality = 0.01;       // relative to the strongest response
    double min_eigenvalue = 1e-4;
    double min_distance = 3.0;
    std::size_t margin = 1;      // skip points this close to the border
};

// Shi-Tomasi corners (minimum eigenvalue of the 3x3 structure tensor),
// strongest first, with non-maximum suppression.
std::vector<Point2> select_features(const GrayFrame& frame, std::size_t max_points,
                                    const FeatureParams& params = {});

// HSV rendering of a flow field: hue from direction, full saturation, value
// from magnitude / norm (clamped to 1).
struct FlowHsv {
    std::vector<double> hue;  // radians in [0, 2 pi)
    std::vector<double> value;
};

// norm: magnitude mapped to full brightness. Defaults to the field's maximum
// magnitude (or 1 for an all-zero field).
FlowHsv flow_to_hsv(const FlowField& flow, std::optional<double> norm = std::nullopt);
// Luminance (0.299 R + 0.587 G + 0.114 B) of the HSV rendering.
GrayFrame flow_to_frame(const FlowField& flow, std::optional<double> norm = std::nullopt);

// Paints each tracked displacement into a (2 radius + 1)^2 patch of an
// otherwise zero field.
FlowField rasterize_sparse(const SparseFlow& flow, std::size_t width, std::size_t height,
                           std::size_t radius = 1);

// Gaussian blur (replicate padding), sigma in pixels.
GrayFrame gaussian_blur(const GrayFrame& frame, double sigma);
// Blur then drop every other row and column.
GrayFrame downsample(const GrayFrame& frame);

}  // namespace bglstm
