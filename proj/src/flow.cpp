#include "bglstm/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "bglstm/errors.hpp"
#include "bglstm/numerics.hpp"

namespace bglstm {

namespace {

long clamp_index(long i, std::size_t n) { return std::clamp<long>(i, 0, static_cast<long>(n) - 1); }

std::vector<double> gaussian_kernel(double sigma, long radius) {
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

long radius_for(double sigma) { return std::max(1L, static_cast<long>(std::ceil(3.0 * sigma))); }

// Separable blur of a plane with replicate padding.
std::vector<double> blur_plane(const std::vector<double>& src, std::size_t w, std::size_t h, double sigma) {
    const long r = radius_for(sigma);
    const auto k = gaussian_kernel(sigma, r);
    std::vector<double> tmp(src.size()), out(src.size());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long i = -r; i <= r; ++i)
                acc += k[static_cast<std::size_t>(i + r)] *
                       src[y * w + static_cast<std::size_t>(clamp_index(static_cast<long>(x) + i, w))];
            tmp[y * w + x] = acc;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long i = -r; i <= r; ++i)
                acc += k[static_cast<std::size_t>(i + r)] *
                       tmp[static_cast<std::size_t>(clamp_index(static_cast<long>(y) + i, h)) * w + x];
            out[y * w + x] = acc;
        }
    return out;
}

double sample_plane(const std::vector<double>& p, std::size_t w, std::size_t h, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const double ax = x - fx, ay = y - fy;
    const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
    auto at = [&](long xx, long yy) {
        return p[static_cast<std::size_t>(clamp_index(yy, h)) * w + static_cast<std::size_t>(clamp_index(xx, w))];
    };
    return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) +
           ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1));
}

void require_same_dims(const GrayFrame& a, const GrayFrame& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError(std::string(what) + ": frame dimensions differ");
    if (a.pixels.size() != a.width * a.height || b.pixels.size() != b.width * b.height)
        throw ShapeError(std::string(what) + ": pixel count does not match dimensions");
}

struct Gradients {
    std::vector<double> ix, iy;
};

Gradients central_gradients(const GrayFrame& f) {
    Gradients g{std::vector<double>(f.pixels.size()), std::vector<double>(f.pixels.size())};
    for (std::size_t y = 0; y < f.height; ++y)
        for (std::size_t x = 0; x < f.width; ++x) {
            const long xi = static_cast<long>(x), yi = static_cast<long>(y);
            g.ix[y * f.width + x] = 0.5 * (f.clamped(xi + 1, yi) - f.clamped(xi - 1, yi));
            g.iy[y * f.width + x] = 0.5 * (f.clamped(xi, yi + 1) - f.clamped(xi, yi - 1));
        }
    return g;
}

std::vector<GrayFrame> build_pyramid(const GrayFrame& f, std::size_t levels, std::size_t min_side) {
    std::vector<GrayFrame> pyr{f};
    while (pyr.size() < levels) {
        const GrayFrame& top = pyr.back();
        if (top.width / 2 < min_side || top.height / 2 < min_side) break;
        pyr.push_back(downsample(top));
    }
    return pyr;
}

FlowField upsample_flow(const FlowField& coarse, std::size_t w, std::size_t h) {
    FlowField out(w, h);
    const double sx = static_cast<double>(coarse.width) / static_cast<double>(w);
    const double sy = static_cast<double>(coarse.height) / static_cast<double>(h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double cx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            const double cy = (static_cast<double>(y) + 0.5) * sy - 0.5;
            out.u[y * w + x] = sample_plane(coarse.u, coarse.width, coarse.height, cx, cy) / sx;
            out.v[y * w + x] = sample_plane(coarse.v, coarse.width, coarse.height, cx, cy) / sy;
        }
    return out;
}

// One Farneback level: refine `flow` in place.
void farneback_level(const GrayFrame& prev, const GrayFrame& next, const FarnebackParams& p, FlowField& flow) {
    const PolyCoeffs e1 = poly_expansion(prev, p.poly_sigma);
    const PolyCoeffs e2 = poly_expansion(next, p.poly_sigma);
    const std::size_t w = prev.width, h = prev.height, n = w * h;

    // Planes of the second expansion for bilinear sampling at displaced positions.
    std::array<std::vector<double>, 5> planes;
    for (auto& pl : planes) pl.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PolyPixel& c = e2.coeffs[i];
        planes[0][i] = c.a11;
        planes[1][i] = c.a12;
        planes[2][i] = c.a22;
        planes[3][i] = c.b1;
        planes[4][i] = c.b2;
    }

    // Normal-equation terms: G = A^T A (symmetric), rhs = A^T db.
    std::array<std::vector<double>, 5> terms;
    for (auto& t : terms) t.resize(n);
    for (std::size_t it = 0; it < p.iterations; ++it) {
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                const double du = flow.u[i], dv = flow.v[i];
                const double sx = static_cast<double>(x) + du, sy = static_cast<double>(y) + dv;
                const PolyPixel& c1 = e1.coeffs[i];
                const double a11 = 0.5 * (c1.a11 + sample_plane(planes[0], w, h, sx, sy));
                const double a12 = 0.5 * (c1.a12 + sample_plane(planes[1], w, h, sx, sy));
                const double a22 = 0.5 * (c1.a22 + sample_plane(planes[2], w, h, sx, sy));
                const double db1 = -0.5 * (sample_plane(planes[3], w, h, sx, sy) - c1.b1) + a11 * du + a12 * dv;
                const double db2 = -0.5 * (sample_plane(planes[4], w, h, sx, sy) - c1.b2) + a12 * du + a22 * dv;
                terms[0][i] = a11 * a11 + a12 * a12;
                terms[1][i] = a11 * a12 + a12 * a22;
                terms[2][i] = a12 * a12 + a22 * a22;
                terms[3][i] = a11 * db1 + a12 * db2;
                terms[4][i] = a12 * db1 + a22 * db2;
            }
        std::array<std::vector<double>, 5> avg;
        for (std::size_t k = 0; k < 5; ++k) avg[k] = blur_plane(terms[k], w, h, p.window_sigma);
        for (std::size_t i = 0; i < n; ++i) {
            const double g11 = avg[0][i], g12 = avg[1][i], g22 = avg[2][i];
            const double det = g11 * g22 - g12 * g12;
            const double scale = g11 + g22;
            if (!(det > 1e-12 * scale * scale) || scale <= 0.0) continue;
            flow.u[i] = (g22 * avg[3][i] - g12 * avg[4][i]) / det;
            flow.v[i] = (g11 * avg[4][i] - g12 * avg[3][i]) / det;
        }
    }
}

void hsv_to_rgb(double hue, double s, double v, double& r, double& g, double& b) {
    const double hp = hue / (std::numbers::pi / 3.0);
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    const int sector = std::min(5, static_cast<int>(hp));
    switch (sector) {
        case 0: r = c, g = x, b = 0; break;
        case 1: r = x, g = c, b = 0; break;
        case 2: r = 0, g = c, b = x; break;
        case 3: r = 0, g = x, b = c; break;
        case 4: r = x, g = 0, b = c; break;
        default: r = c, g = 0, b = x; break;
    }
    const double m = v - c;
    r += m, g += m, b += m;
}

}  // namespace

double GrayFrame::clamped(long x, long y) const {
    return pixels[static_cast<std::size_t>(clamp_index(y, height)) * width +
                  static_cast<std::size_t>(clamp_index(x, width))];
}

double GrayFrame::sample(double x, double y) const { return sample_plane(pixels, width, height, x, y); }

void GrayFrame::clamp_values() {
    for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
}

GrayFrame gaussian_blur(const GrayFrame& frame, double sigma) {
    if (!(sigma > 0.0)) throw InvalidInput("gaussian_blur: sigma must be positive");
    GrayFrame out(frame.width, frame.height);
    out.pixels = blur_plane(frame.pixels, frame.width, frame.height, sigma);
    return out;
}

GrayFrame downsample(const GrayFrame& frame) {
    const GrayFrame blurred = gaussian_blur(frame, 1.0);
    GrayFrame out((frame.width + 1) / 2, (frame.height + 1) / 2);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x) out.at(x, y) = blurred.at(2 * x, 2 * y);
    return out;
}

PolyCoeffs poly_expansion(const GrayFrame& frame, double window_sigma) {
    if (frame.width < 7 || frame.height < 7)
        throw InvalidInput("poly_expansion: frame must be at least 7x7");
    if (!(window_sigma > 0.0)) throw InvalidInput("poly_expansion: window_sigma must be positive");
    if (frame.pixels.size() != frame.width * frame.height)
        throw ShapeError("poly_expansion: pixel count does not match dimensions");

    // Basis 1, x, y, x^2, y^2, xy. The weighted least-squares solution is a
    // fixed linear filter per coefficient: F = (B^T W B)^-1 B^T W.
    const long r = radius_for(window_sigma);
    const long side = 2 * r + 1;
    Eigen::MatrixXd basis(side * side, 6);
    Eigen::VectorXd weight(side * side);
    for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
            const long k = (dy + r) * side + (dx + r);
            const double x = static_cast<double>(dx), y = static_cast<double>(dy);
            basis.row(k) << 1.0, x, y, x * x, y * y, x * y;
            weight(k) = std::exp(-0.5 * (x * x + y * y) / (window_sigma * window_sigma));
        }
    const Eigen::MatrixXd bw = basis.transpose() * weight.asDiagonal();
    const Eigen::MatrixXd filters = (bw * basis).ldlt().solve(bw);  // 6 x side^2

    PolyCoeffs out;
    out.width = frame.width;
    out.height = frame.height;
    out.coeffs.resize(frame.pixels.size());
    std::vector<double> patch(static_cast<std::size_t>(side * side));
    for (std::size_t y = 0; y < frame.height; ++y)
        for (std::size_t x = 0; x < frame.width; ++x) {
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx)
                    patch[static_cast<std::size_t>((dy + r) * side + (dx + r))] =
                        frame.clamped(static_cast<long>(x) + dx, static_cast<long>(y) + dy);
            std::array<double, 6> rr{};
            for (int c = 0; c < 6; ++c) {
                double acc = 0.0;
                for (long k = 0; k < side * side; ++k) acc += filters(c, k) * patch[static_cast<std::size_t>(k)];
                rr[static_cast<std::size_t>(c)] = acc;
            }
            PolyPixel& px = out.coeffs[y * frame.width + x];
            px.c = rr[0];
            px.b1 = rr[1];
            px.b2 = rr[2];
            px.a11 = rr[3];
            px.a22 = rr[4];
            px.a12 = 0.5 * rr[5];
        }
    return out;
}

FlowField farneback_dense(const GrayFrame& prev, const GrayFrame& next, const FarnebackParams& params) {
    require_same_dims(prev, next, "farneback_dense");
    if (params.levels < 1) throw InvalidInput("farneback_dense: levels must be at least 1");
    if (!(params.window_sigma > 0.0)) throw InvalidInput("farneback_dense: window_sigma must be positive");
    const auto p1 = build_pyramid(prev, params.levels, 7);
    const auto p2 = build_pyramid(next, params.levels, 7);
    FlowField flow(p1.back().width, p1.back().height);
    for (std::size_t lv = p1.size(); lv-- > 0;) {
        if (flow.width != p1[lv].width || flow.height != p1[lv].height)
            flow = upsample_flow(flow, p1[lv].width, p1[lv].height);
        farneback_level(p1[lv], p2[lv], params, flow);
    }
    return flow;
}

SparseFlow lucas_kanade(const GrayFrame& prev, const GrayFrame& next, const std::vector<Point2>& points,
                        const LucasKanadeParams& params) {
    require_same_dims(prev, next, "lucas_kanade");
    if (params.window < 3 || params.window % 2 == 0)
        throw InvalidInput("lucas_kanade: window must be an odd count of at least 3");
    const long half = static_cast<long>(params.window / 2);
    for (const Point2& pt : points) {
        if (!(pt.x >= static_cast<double>(half) && pt.y >= static_cast<double>(half) &&
              pt.x <= static_cast<double>(prev.width) - 1.0 - static_cast<double>(half) &&
              pt.y <= static_cast<double>(prev.height) - 1.0 - static_cast<double>(half)))
            throw InvalidInput("lucas_kanade: point (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) +
                               ") is not interior by half a window");
    }

    const auto pyr_prev = build_pyramid(prev, std::max<std::size_t>(1, params.levels), 2 * params.window);
    const auto pyr_next = build_pyramid(next, pyr_prev.size(), params.window);
    std::vector<Gradients> grads;
    for (const auto& f : pyr_prev) grads.push_back(central_gradients(f));
    const double area = static_cast<double>(params.window * params.window);

    SparseFlow out;
    out.reserve(points.size());
    for (const Point2& pt : points) {
        TrackedPoint tp;
        tp.x = pt.x;
        tp.y = pt.y;
        double gx = 0.0, gy = 0.0;
        for (std::size_t lv = pyr_prev.size(); lv-- > 0;) {
            const GrayFrame& I = pyr_prev[lv];
            const GrayFrame& J = pyr_next[lv];
            const Gradients& g = grads[lv];
            const double scale = std::ldexp(1.0, -static_cast<int>(lv));
            const double px = pt.x * scale, py = pt.y * scale;
            const std::size_t m = params.window * params.window;
            std::vector<double> wi(m), wx(m), wy(m);
            double g11 = 0, g12 = 0, g22 = 0;
            std::size_t k = 0;
            for (long dy = -half; dy <= half; ++dy)
                for (long dx = -half; dx <= half; ++dx, ++k) {
                    const double sx = px + static_cast<double>(dx), sy = py + static_cast<double>(dy);
                    wi[k] = I.sample(sx, sy);
                    wx[k] = sample_plane(g.ix, I.width, I.height, sx, sy);
                    wy[k] = sample_plane(g.iy, I.width, I.height, sx, sy);
                    g11 += wx[k] * wx[k];
                    g12 += wx[k] * wy[k];
                    g22 += wy[k] * wy[k];
                }
            const double tr = g11 + g22;
            const double min_eig = 0.5 * (tr - std::sqrt((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12)) / area;
            if (lv == 0) tp.min_eigenvalue = min_eig;
            const double det = g11 * g22 - g12 * g12;
            double dx_res = 0.0, dy_res = 0.0;
            if (min_eig >= params.min_eigenvalue && det > 0.0) {
                for (std::size_t iter = 0; iter < params.max_iterations; ++iter) {
                    double b1 = 0, b2 = 0;
                    k = 0;
                    for (long dy = -half; dy <= half; ++dy)
                        for (long dx = -half; dx <= half; ++dx, ++k) {
                            const double diff =
                                wi[k] - J.sample(px + gx + dx_res + static_cast<double>(dx),
                                                 py + gy + dy_res + static_cast<double>(dy));
                            b1 += diff * wx[k];
                            b2 += diff * wy[k];
                        }
                    const double ex = (g22 * b1 - g12 * b2) / det;
                    const double ey = (g11 * b2 - g12 * b1) / det;
                    dx_res += ex;
                    dy_res += ey;
                    if (std::hypot(dx_res, dy_res) > static_cast<double>(half)) {
                        dx_res = dy_res = 0.0;
                        break;
                    }
                    if (ex * ex + ey * ey < 1e-6) break;
                }
            }
            gx += dx_res;
            gy += dy_res;
            if (lv > 0) gx *= 2.0, gy *= 2.0;
        }
        tp.trackable = tp.min_eigenvalue >= params.min_eigenvalue;
        if (tp.trackable && std::isfinite(gx) && std::isfinite(gy)) {
            tp.u = gx;
            tp.v = gy;
        } else {
            tp.trackable = false;
        }
        out.push_back(tp);
    }
    return out;
}

std::vector<Point2> select_features(const GrayFrame& frame, std::size_t max_points, const FeatureParams& params) {
    if (max_points < 1) throw InvalidInput("select_features: max_points must be at least 1");
    const std::size_t w = frame.width, h = frame.height;
    if (w == 0 || h == 0) return {};
    const Gradients g = central_gradients(frame);
    std::vector<double> score(w * h, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double g11 = 0, g12 = 0, g22 = 0;
            for (long dy = -1; dy <= 1; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const std::size_t i = static_cast<std::size_t>(clamp_index(static_cast<long>(y) + dy, h)) * w +
                                          static_cast<std::size_t>(clamp_index(static_cast<long>(x) + dx, w));
                    g11 += g.ix[i] * g.ix[i];
                    g12 += g.ix[i] * g.iy[i];
                    g22 += g.iy[i] * g.iy[i];
                }
            const double tr = g11 + g22;
            score[y * w + x] = 0.5 * (tr - std::sqrt((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12)) / 9.0;
        }
    const double best = *std::max_element(score.begin(), score.end());
    const double cutoff = std::max(params.min_eigenvalue, params.quality * best);

    struct Candidate {
        double score;
        std::size_t x, y;
    };
    std::vector<Candidate> cands;
    const std::size_t m = params.margin;
    for (std::size_t y = m; y + m < h; ++y)
        for (std::size_t x = m; x + m < w; ++x) {
            const double s = score[y * w + x];
            if (s < cutoff) continue;
            bool is_max = true;
            for (long dy = -1; dy <= 1 && is_max; ++dy)
                for (long dx = -1; dx <= 1; ++dx) {
                    const double o = score[static_cast<std::size_t>(clamp_index(static_cast<long>(y) + dy, h)) * w +
                                           static_cast<std::size_t>(clamp_index(static_cast<long>(x) + dx, w))];
                    if (o > s) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) cands.push_back({s, x, y});
        }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return a.score > b.score;
    });
    std::vector<Point2> out;
    const double min_d2 = params.min_distance * params.min_distance;
    for (const Candidate& c : cands) {
        if (out.size() >= max_points) break;
        const Point2 p{static_cast<double>(c.x), static_cast<double>(c.y)};
        const bool crowded = std::any_of(out.begin(), out.end(), [&](const Point2& q) {
            return (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) < min_d2;
        });
        if (!crowded) out.push_back(p);
    }
    return out;
}

FlowHsv flow_to_hsv(const FlowField& flow, std::optional<double> norm) {
    const std::size_t n = flow.width * flow.height;
    if (flow.u.size() != n || flow.v.size() != n) throw ShapeError("flow_to_hsv: field size mismatch");
    if (!all_finite(flow.u) || !all_finite(flow.v)) throw InvalidInput("flow_to_hsv: non-finite flow");
    double scale = 0.0;
    if (norm) {
        if (!(*norm > 0.0)) throw InvalidInput("flow_to_hsv: norm must be positive");
        scale = *norm;
    } else {
        for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::hypot(flow.u[i], flow.v[i]));
        if (scale == 0.0) scale = 1.0;
    }
    FlowHsv out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        double hue = std::atan2(flow.v[i], flow.u[i]);
        if (hue < 0.0) hue += 2.0 * std::numbers::pi;
        if (hue >= 2.0 * std::numbers::pi) hue = 0.0;
        out.hue[i] = hue;
        out.value[i] = std::min(1.0, std::hypot(flow.u[i], flow.v[i]) / scale);
    }
    return out;
}

GrayFrame flow_to_frame(const FlowField& flow, std::optional<double> norm) {
    const FlowHsv hsv = flow_to_hsv(flow, norm);
    GrayFrame out(flow.width, flow.height);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        double r, g, b;
        hsv_to_rgb(hsv.hue[i], 1.0, hsv.value[i], r, g, b);
        out.pixels[i] = std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
    }
    return out;
}

FlowField rasterize_sparse(const SparseFlow& flow, std::size_t width, std::size_t height, std::size_t radius) {
    FlowField out(width, height);
    const long r = static_cast<long>(radius);
    for (const TrackedPoint& p : flow) {
        if (!p.trackable) continue;
        const long cx = std::lround(p.x), cy = std::lround(p.y);
        for (long y = cy - r; y <= cy + r; ++y)
            for (long x = cx - r; x <= cx + r; ++x) {
                if (x < 0 || y < 0 || x >= static_cast<long>(width) || y >= static_cast<long>(height)) continue;
                const std::size_t i = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
                out.u[i] = p.u;
                out.v[i] = p.v;
            }
    }
    return out;
}

}  // namespace bglstm
