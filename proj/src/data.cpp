#include "bglstm/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

struct MovingObject {
    double x = 0.0, y = 0.0;
    double w = 1.0, h = 1.0;
    double vx = 0.0, vy = 0.0;
    double intensity = 1.0;
};

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

// Box coverage of pixel (px, py) by an axis-aligned rectangle on a torus.
double coverage(const MovingObject& o, double px, double py, double W, double H) {
    double total = 0.0;
    for (int kx = -1; kx <= 1; ++kx) {
        const double cx = o.x + kx * W;
        const double ox = overlap(px - 0.5, px + 0.5, cx - 0.5 * o.w, cx + 0.5 * o.w);
        if (ox == 0.0) continue;
        for (int ky = -1; ky <= 1; ++ky) {
            const double cy = o.y + ky * H;
            total += ox * overlap(py - 0.5, py + 0.5, cy - 0.5 * o.h, cy + 0.5 * o.h);
        }
    }
    return std::min(1.0, total);
}

void paint(GrayFrame& f, const MovingObject& o) {
    const double W = static_cast<double>(f.width), H = static_cast<double>(f.height);
    for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            const double c = coverage(o, static_cast<double>(x), static_cast<double>(y), W, H);
            if (c > 0.0) f.at(x, y) = (1.0 - c) * f.at(x, y) + c * o.intensity;
        }
}

double wrap(double v, double n) {
    v = std::fmod(v, n);
    return v < 0.0 ? v + n : v;
}

FrameSequence render_sequence(const SceneConfig& c, Rng rng, const AnomalySpec* anomaly) {
    const double W = static_cast<double>(c.width), H = static_cast<double>(c.height);
    const GrayFrame background = make_texture(c.width, c.height, rng, c.background_low, c.background_high);
    const auto& m = c.motion;

    auto random_object = [&] {
        MovingObject o;
        o.x = rng.uniform(0.0, W);
        o.y = rng.uniform(0.0, H);
        o.w = rng.uniform(m.size_min, m.size_max);
        o.h = rng.uniform(m.size_min, m.size_max);
        const double speed = rng.uniform(m.speed_min, m.speed_max);
        const double theta = m.directions_deg[rng.below(m.directions_deg.size())] * std::numbers::pi / 180.0;
        o.vx = speed * std::cos(theta);
        o.vy = speed * std::sin(theta);
        o.intensity = c.object_intensity;
        return o;
    };
    std::vector<MovingObject> objects;
    for (std::size_t k = 0; k < m.object_count; ++k) objects.push_back(random_object());
    MovingObject intruder = random_object();
    intruder.w = std::min(W / 2.0, 2.5 * m.size_max);
    intruder.h = std::max(1.0, 0.6 * m.size_min);

    FrameSequence seq;
    seq.scene_id = c.scene_id;
    for (std::size_t t = 0; t < c.frames_per_sequence; ++t) {
        const bool active = anomaly && t >= anomaly->onset && t < anomaly->onset + anomaly->duration;
        GrayFrame f = background;
        for (const auto& o : objects) paint(f, o);
        if (active && anomaly->kind == AnomalyKind::NewObjectShape) paint(f, intruder);
        for (double& p : f.pixels) p += c.noise_std * rng.normal();
        quantize8(f);
        seq.frames.push_back(std::move(f));
        seq.labels.push_back(active ? 1 : 0);

        // Advance to the next frame; an anomaly alters motion on the frames it labels.
        const bool next_active =
            anomaly && t + 1 >= anomaly->onset && t + 1 < anomaly->onset + anomaly->duration;
        for (std::size_t k = 0; k < objects.size(); ++k) {
            MovingObject& o = objects[k];
            double vx = o.vx, vy = o.vy;
            if (next_active && k == 0) {
                if (anomaly->kind == AnomalyKind::FastObject) {
                    vx *= c.fast_factor;
                    vy *= c.fast_factor;
                } else if (anomaly->kind == AnomalyKind::WrongDirection) {
                    std::swap(vx, vy);
                    vx = -vx;
                }
            }
            o.x = wrap(o.x + vx, W);
            o.y = wrap(o.y + vy, H);
        }
        intruder.x = wrap(intruder.x + intruder.vx, W);
        intruder.y = wrap(intruder.y + intruder.vy, H);
    }
    return seq;
}

}  // namespace

std::string to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::FastObject: return "fast-object";
        case AnomalyKind::WrongDirection: return "wrong-direction";
        case AnomalyKind::NewObjectShape: return "new-object-shape";
    }
    return "?";
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
    if (s == "fast-object") return AnomalyKind::FastObject;
    if (s == "wrong-direction") return AnomalyKind::WrongDirection;
    if (s == "new-object-shape") return AnomalyKind::NewObjectShape;
    throw ConfigError("unknown anomaly type '" + s + "'");
}

void SceneConfig::validate() const {
    if (scene_id.empty()) throw ConfigError("scene id must not be empty");
    if (width < 8 || height < 8) throw ConfigError("frame size must be at least 8x8");
    if (train_sequences < 1 || test_sequences < 1) throw ConfigError("need at least one train and one test sequence");
    if (frames_per_sequence < 2) throw ConfigError("sequences need at least 2 frames");
    if (motion.object_count < 1) throw ConfigError("need at least one moving object");
    if (!(motion.size_min > 0.0) || motion.size_min > motion.size_max ||
        motion.size_max > static_cast<double>(std::min(width, height)) / 2.0)
        throw ConfigError("object size range must satisfy 0 < min <= max <= half the frame");
    if (!(motion.speed_min >= 0.0) || motion.speed_min > motion.speed_max)
        throw ConfigError("speed range must satisfy 0 <= min <= max");
    if (motion.directions_deg.empty()) throw ConfigError("direction set must not be empty");
    if (anomalies.empty()) throw ConfigError("test sequences need an anomaly spec");
    for (const auto& a : anomalies)
        if (a.duration < 1 || a.onset + a.duration > frames_per_sequence)
            throw ConfigError("anomaly interval must lie within the sequence");
    if (!(background_low >= 0.0 && background_low < background_high && background_high <= 1.0))
        throw ConfigError("background range must lie in [0, 1]");
    if (!(object_intensity >= 0.0 && object_intensity <= 1.0)) throw ConfigError("object intensity must lie in [0, 1]");
    if (!(noise_std >= 0.0)) throw ConfigError("noise std must be non-negative");
    if (!(fast_factor > 0.0)) throw ConfigError("fast factor must be positive");
}

SceneData synth_generate(const SceneConfig& config) {
    config.validate();
    Rng root(config.seed);
    Rng train_root = root.split();
    Rng test_root = root.split();
    SceneData out;
    for (std::size_t k = 0; k < config.train_sequences; ++k)
        out.train.push_back(render_sequence(config, train_root.split(), nullptr));
    for (std::size_t k = 0; k < config.test_sequences; ++k)
        out.test.push_back(render_sequence(config, test_root.split(), &config.anomalies[k % config.anomalies.size()]));
    return out;
}

GrayFrame make_texture(std::size_t width, std::size_t height, Rng& rng, double lo, double hi, double smooth) {
    GrayFrame f(width, height);
    for (double& p : f.pixels) p = rng.uniform();
    f = gaussian_blur(f, smooth);
    const auto [mn, mx] = std::minmax_element(f.pixels.begin(), f.pixels.end());
    const double a = *mn, range = *mx - *mn;
    for (double& p : f.pixels) p = range > 0.0 ? lo + (hi - lo) * (p - a) / range : 0.5 * (lo + hi);
    return f;
}

void quantize8(GrayFrame& frame) {
    for (double& p : frame.pixels) p = std::round(std::clamp(p, 0.0, 1.0) * 255.0) / 255.0;
}

GrayFrame resize_bilinear(const GrayFrame& frame, std::size_t height, std::size_t width) {
    if (frame.width == 0 || frame.height == 0 || width == 0 || height == 0)
        throw InvalidInput("resize_bilinear: empty frame or target");
    if (frame.width == width && frame.height == height) return frame;
    GrayFrame out(width, height);
    const double sx = width > 1 ? static_cast<double>(frame.width - 1) / static_cast<double>(width - 1) : 0.0;
    const double sy = height > 1 ? static_cast<double>(frame.height - 1) / static_cast<double>(height - 1) : 0.0;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            out.at(x, y) = frame.sample(static_cast<double>(x) * sx, static_cast<double>(y) * sy);
    return out;
}

NormConstants compute_normalization(std::span<const GrayFrame> frames, std::size_t height, std::size_t width) {
    if (frames.empty()) throw DegenerateData("normalization needs at least one frame");
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const GrayFrame& f : frames) {
        const GrayFrame r = resize_bilinear(f, height, width);
        for (double p : r.pixels) {
            const double v = std::clamp(p, 0.0, 1.0);
            sum += v;
            sq += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    return {mean, std::sqrt(var)};
}

Vector preprocess_frame(const GrayFrame& raw, const NormConstants& norm, std::size_t height, std::size_t width) {
    if (height < 8 || width < 8) throw InvalidInput("preprocess_frame: target size must be at least 8x8");
    if (!std::isfinite(norm.mean) || !std::isfinite(norm.std)) throw DegenerateData("non-finite normalization constants");
    if (norm.std < 1e-8) throw DegenerateData("normalization std below 1e-8");
    const GrayFrame r = resize_bilinear(raw, height, width);
    Vector out(r.pixels.size());
    for (std::size_t i = 0; i < r.pixels.size(); ++i) out[i] = (std::clamp(r.pixels[i], 0.0, 1.0) - norm.mean) / norm.std;
    return out;
}

Vector preprocess_frame(std::span<const std::uint8_t> raw, std::size_t raw_width, std::size_t raw_height,
                        const NormConstants& norm, std::size_t height, std::size_t width) {
    if (raw.size() != raw_width * raw_height) throw ShapeError("preprocess_frame: byte count does not match dimensions");
    GrayFrame f(raw_width, raw_height);
    for (std::size_t i = 0; i < raw.size(); ++i) f.pixels[i] = static_cast<double>(raw[i]) / 255.0;
    return preprocess_frame(f, norm, height, width);
}

std::vector<Cuboid> build_cuboids(std::span<const Vector> frames, std::size_t T, std::size_t stride, std::size_t video) {
    if (T < 1) throw InvalidInput("build_cuboids: T must be at least 1");
    if (stride < 1) throw InvalidInput("build_cuboids: stride must be at least 1");
    const std::size_t span = (T - 1) * stride;
    if (frames.size() < span + 1)
        throw InvalidInput("build_cuboids: " + std::to_string(frames.size()) + " frames cannot fill a window of " +
                           std::to_string(span + 1));
    std::vector<Cuboid> out;
    for (std::size_t s = 0; s + span < frames.size(); ++s) {
        Cuboid c;
        c.stride = stride;
        c.video = video;
        for (std::size_t t = 0; t < T; ++t) {
            c.indices.push_back(s + t * stride);
            c.frames.push_back(frames[s + t * stride]);
        }
        out.push_back(std::move(c));
    }
    return out;
}

SplitSizes train_val_split(std::size_t n, double train_fraction) {
    if (n < 2) throw DegenerateData("train/val split needs at least 2 cuboids, got " + std::to_string(n));
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    std::size_t t = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    t = std::clamp<std::size_t>(t, 1, n - 1);
    return {t, n - t};
}

std::vector<double> aggregate_per_frame(std::span<const Cuboid> cuboids, std::span<const std::vector<double>> values,
                                        std::size_t frame_count) {
    if (cuboids.size() != values.size()) throw ShapeError("aggregate_per_frame: one value list per cuboid expected");
    std::vector<double> sum(frame_count, 0.0);
    std::vector<std::size_t> count(frame_count, 0);
    for (std::size_t k = 0; k < cuboids.size(); ++k) {
        if (values[k].size() != cuboids[k].indices.size())
            throw ShapeError("aggregate_per_frame: value count differs from cuboid length");
        for (std::size_t j = 0; j < values[k].size(); ++j) {
            const std::size_t f = cuboids[k].indices[j];
            if (f >= frame_count) throw ShapeError("aggregate_per_frame: frame index out of range");
            sum[f] += values[k][j];
            ++count[f];
        }
    }
    std::vector<double> out(frame_count);
    for (std::size_t f = 0; f < frame_count; ++f)
        out[f] = count[f] ? sum[f] / static_cast<double>(count[f]) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

}  // namespace bglstm
