#include <algorithm>
#include <array>
#include <cmath>

#include "doctest.h"

#include "bglstm/errors.hpp"
#include "bglstm/flow.hpp"
#include "bglstm/numerics.hpp"

using namespace bglstm;

namespace {

// Smoothed uniform noise, stretched to [0.05, 0.95].
GrayFrame texture(std::size_t w, std::size_t h, std::uint64_t seed, double smooth = 1.5) {
    Rng rng(seed);
    GrayFrame f(w, h);
    for (double& p : f.pixels) p = rng.uniform();
    f = gaussian_blur(f, smooth);
    const auto [lo, hi] = std::minmax_element(f.pixels.begin(), f.pixels.end());
    const double a = *lo, b = *hi;
    for (double& p : f.pixels) p = 0.05 + 0.9 * (p - a) / (b - a);
    return f;
}

// Two views of one larger texture; content of `next` is moved by (dx, dy).
std::pair<GrayFrame, GrayFrame> shifted_pair(std::size_t size, int dx, int dy, std::uint64_t seed) {
    const std::size_t pad = 8;
    GrayFrame big = texture(size + 2 * pad, size + 2 * pad, seed);
    GrayFrame prev(size, size), next(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            prev.at(x, y) = big.at(x + pad, y + pad);
            next.at(x, y) = big.at(static_cast<std::size_t>(static_cast<long>(x + pad) - dx),
                                   static_cast<std::size_t>(static_cast<long>(y + pad) - dy));
        }
    return {prev, next};
}

double interior_median_error(const FlowField& f, double dx, double dy, std::size_t band) {
    std::vector<double> err;
    for (std::size_t y = band; y + band < f.height; ++y)
        for (std::size_t x = band; x + band < f.width; ++x) {
            const std::size_t i = y * f.width + x;
            err.push_back(std::hypot(f.u[i] - dx, f.v[i] - dy));
        }
    std::nth_element(err.begin(), err.begin() + static_cast<long>(err.size() / 2), err.end());
    return err[err.size() / 2];
}

// Independent weighted least-squares fit on one neighbourhood, solved by
// Gaussian elimination on the 6x6 normal equations.
std::array<double, 6> wls_fit(const GrayFrame& f, long cx, long cy, double sigma) {
    const long r = static_cast<long>(std::ceil(3.0 * sigma));
    double m[6][7] = {};
    for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
            const double x = static_cast<double>(dx), y = static_cast<double>(dy);
            const double phi[6] = {1, x, y, x * x, y * y, x * y};
            const double w = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
            const double val = f.clamped(cx + dx, cy + dy);
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) m[i][j] += w * phi[i] * phi[j];
                m[i][6] += w * phi[i] * val;
            }
        }
    for (int c = 0; c < 6; ++c) {
        int piv = c;
        for (int r2 = c + 1; r2 < 6; ++r2)
            if (std::abs(m[r2][c]) > std::abs(m[piv][c])) piv = r2;
        for (int k = 0; k < 7; ++k) std::swap(m[c][k], m[piv][k]);
        for (int r2 = 0; r2 < 6; ++r2) {
            if (r2 == c) continue;
            const double factor = m[r2][c] / m[c][c];
            for (int k = 0; k < 7; ++k) m[r2][k] -= factor * m[c][k];
        }
    }
    std::array<double, 6> out{};
    for (int i = 0; i < 6; ++i) out[static_cast<std::size_t>(i)] = m[i][6] / m[i][i];
    return out;
}

}  // namespace

TEST_CASE("poly_expansion on constant, quadratic and ramp signals") {
    SUBCASE("constant") {
        GrayFrame f(15, 15, 0.37);
        auto p = poly_expansion(f, 1.0);
        for (std::size_t y = 3; y < 12; ++y)
            for (std::size_t x = 3; x < 12; ++x) {
                const auto& c = p.at(x, y);
                CHECK(std::abs(c.a11) < 1e-6);
                CHECK(std::abs(c.a12) < 1e-6);
                CHECK(std::abs(c.a22) < 1e-6);
                CHECK(std::abs(c.b1) < 1e-6);
                CHECK(std::abs(c.b2) < 1e-6);
                CHECK(std::abs(c.c - 0.37) < 1e-6);
            }
    }
    SUBCASE("pure quadratic") {
        GrayFrame f(31, 31);
        for (std::size_t y = 0; y < 31; ++y)
            for (std::size_t x = 0; x < 31; ++x) {
                const double lx = static_cast<double>(x) - 15.0;
                f.at(x, y) = 0.001 * lx * lx;
            }
        auto p = poly_expansion(f, 1.5);
        const std::size_t r = 5;
        for (std::size_t y = r; y < 31 - r; ++y)
            for (std::size_t x = r; x < 31 - r; ++x) {
                const auto& c = p.at(x, y);
                CHECK(c.a11 == doctest::Approx(0.001).epsilon(0.05));
                CHECK(std::abs(c.a12) < 1e-9);
                CHECK(std::abs(c.a22) < 1e-9);
                CHECK(std::abs(c.b2) < 1e-9);
            }
        CHECK(std::abs(p.at(15, 15).b1) < 1e-9);
        CHECK(p.at(20, 15).b1 == doctest::Approx(0.002 * 5.0).epsilon(1e-6));
    }
    SUBCASE("linear ramp matches the weighted least-squares oracle") {
        GrayFrame f(21, 21);
        for (std::size_t y = 0; y < 21; ++y)
            for (std::size_t x = 0; x < 21; ++x) f.at(x, y) = 0.01 * static_cast<double>(x);
        auto p = poly_expansion(f, 1.2);
        const auto& c = p.at(10, 10);
        const auto o = wls_fit(f, 10, 10, 1.2);
        CHECK(std::abs(c.a11) < 1e-9);
        CHECK(std::abs(c.a22) < 1e-9);
        CHECK(std::abs(c.a12) < 1e-9);
        CHECK(c.b1 == doctest::Approx(0.01).epsilon(1e-9));
        CHECK(std::abs(c.b1 - o[1]) < 1e-12);
        CHECK(std::abs(c.b2 - o[2]) < 1e-12);
    }
    SUBCASE("textured frame matches the oracle, including near borders") {
        GrayFrame f = texture(16, 16, 9);
        auto p = poly_expansion(f, 1.5);
        for (auto [x, y] : {std::pair{8L, 8L}, std::pair{0L, 0L}, std::pair{15L, 3L}}) {
            const auto o = wls_fit(f, x, y, 1.5);
            const auto& c = p.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            CHECK(std::abs(c.c - o[0]) < 1e-10);
            CHECK(std::abs(c.b1 - o[1]) < 1e-10);
            CHECK(std::abs(c.b2 - o[2]) < 1e-10);
            CHECK(std::abs(c.a11 - o[3]) < 1e-10);
            CHECK(std::abs(c.a22 - o[4]) < 1e-10);
            CHECK(std::abs(2.0 * c.a12 - o[5]) < 1e-10);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(poly_expansion(GrayFrame(6, 10), 1.0), InvalidInput);
        CHECK_THROWS_AS(poly_expansion(GrayFrame(10, 10), 0.0), InvalidInput);
    }
}

TEST_CASE("farneback_dense recovers translations") {
    SUBCASE("zero motion") {
        GrayFrame f = texture(64, 64, 1);
        auto flow = farneback_dense(f, f);
        double su = 0, sv = 0;
        for (std::size_t i = 0; i < flow.u.size(); ++i) su += std::abs(flow.u[i]), sv += std::abs(flow.v[i]);
        CHECK(su / static_cast<double>(flow.u.size()) < 0.05);
        CHECK(sv / static_cast<double>(flow.v.size()) < 0.05);
    }
    SUBCASE("shift (2, 0)") {
        auto [a, b] = shifted_pair(64, 2, 0, 2);
        CHECK(interior_median_error(farneback_dense(a, b), 2.0, 0.0, 8) < 0.5);
    }
    SUBCASE("shift (0, -1)") {
        auto [a, b] = shifted_pair(64, 0, -1, 3);
        CHECK(interior_median_error(farneback_dense(a, b), 0.0, -1.0, 8) < 0.5);
    }
    SUBCASE("all shifts up to 3 px") {
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                auto [a, b] = shifted_pair(64, dx, dy, 40 + static_cast<std::uint64_t>(dx + 7 * dy + 30));
                CAPTURE(dx);
                CAPTURE(dy);
                CHECK(interior_median_error(farneback_dense(a, b), dx, dy, 8) < 0.5);
            }
    }
    SUBCASE("pyramid levels") {
        auto [a, b] = shifted_pair(64, 3, -2, 5);
        FarnebackParams p;
        p.levels = 3;
        CHECK(interior_median_error(farneback_dense(a, b, p), 3.0, -2.0, 8) < 0.5);
    }
    CHECK_THROWS_AS(farneback_dense(GrayFrame(16, 16), GrayFrame(16, 17)), ShapeError);
}

TEST_CASE("lucas_kanade tracks translated corners") {
    LucasKanadeParams lk;
    lk.window = 15;
    FeatureParams fp;
    fp.margin = 8;
    SUBCASE("zero motion") {
        GrayFrame f = texture(64, 64, 4);
        auto pts = select_features(f, 30, fp);
        REQUIRE(!pts.empty());
        for (const auto& t : lucas_kanade(f, f, pts, lk)) {
            CHECK(t.trackable);
            CHECK(t.u == 0.0);
            CHECK(t.v == 0.0);
        }
    }
    SUBCASE("shift (1, 1)") {
        auto [a, b] = shifted_pair(64, 1, 1, 6);
        auto pts = select_features(a, 30, fp);
        REQUIRE(pts.size() >= 5);
        for (const auto& t : lucas_kanade(a, b, pts, lk)) {
            REQUIRE(t.trackable);
            CHECK(std::hypot(t.u - 1.0, t.v - 1.0) < 0.25);
        }
    }
    SUBCASE("all shifts up to 3 px") {
        // Keep the displaced window inside the frame.
        fp.margin = 7 + 4;
        for (int dy = -3; dy <= 3; ++dy)
            for (int dx = -3; dx <= 3; ++dx) {
                auto [a, b] = shifted_pair(64, dx, dy, 100 + static_cast<std::uint64_t>(dx + 7 * dy + 30));
                auto pts = select_features(a, 20, fp);
                for (const auto& t : lucas_kanade(a, b, pts, lk)) {
                    CAPTURE(dx);
                    CAPTURE(dy);
                    if (t.trackable) CHECK(std::hypot(t.u - dx, t.v - dy) < 0.25);
                }
            }
    }
    SUBCASE("uniform region is untrackable") {
        GrayFrame f = texture(64, 64, 7);
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 32; x < 64; ++x) f.at(x, y) = 0.5;
        auto out = lucas_kanade(f, f, {Point2{50, 32}, Point2{14, 32}}, lk);
        CHECK_FALSE(out[0].trackable);
        CHECK(out[0].min_eigenvalue < 1e-4);
        CHECK(out[0].u == 0.0);
        CHECK(out[1].trackable);
    }
    SUBCASE("errors") {
        GrayFrame f(32, 32, 0.5);
        CHECK_THROWS_AS(lucas_kanade(f, f, {Point2{3, 16}}, lk), InvalidInput);
        CHECK_THROWS_AS(lucas_kanade(f, f, {Point2{16, 25}}, lk), InvalidInput);
        lk.window = 4;
        CHECK_THROWS_AS(lucas_kanade(f, f, {Point2{16, 16}}, lk), InvalidInput);
    }
}

TEST_CASE("select_features") {
    CHECK(select_features(GrayFrame(32, 32, 0.4), 10).empty());

    GrayFrame sq(24, 24, 0.0);
    for (std::size_t y = 10; y < 13; ++y)
        for (std::size_t x = 10; x < 13; ++x) sq.at(x, y) = 1.0;
    auto pts = select_features(sq, 10);
    REQUIRE(!pts.empty());
    const std::array<Point2, 4> corners{Point2{9.5, 9.5}, Point2{12.5, 9.5}, Point2{9.5, 12.5}, Point2{12.5, 12.5}};
    for (const auto& p : pts) {
        double best = 1e9;
        for (const auto& c : corners) best = std::min(best, std::hypot(p.x - c.x, p.y - c.y));
        // A 3x3 square is one blob at this gradient scale; its centre is
        // sqrt(2) * 1.5 px from every corner.
        CHECK(best <= 2.13);
    }

    // Oracle: the strongest returned point carries the map's maximum score.
    auto score = [&](long x, long y) {
        double g11 = 0, g12 = 0, g22 = 0;
        for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
                const long px = x + dx, py = y + dy;
                const double ix = 0.5 * (sq.clamped(px + 1, py) - sq.clamped(px - 1, py));
                const double iy = 0.5 * (sq.clamped(px, py + 1) - sq.clamped(px, py - 1));
                g11 += ix * ix, g12 += ix * iy, g22 += iy * iy;
            }
        return 0.5 * (g11 + g22 - std::sqrt((g11 - g22) * (g11 - g22) + 4 * g12 * g12));
    };
    double best = 0;
    for (long y = 1; y < 23; ++y)
        for (long x = 1; x < 23; ++x) best = std::max(best, score(x, y));
    CHECK(score(static_cast<long>(pts[0].x), static_cast<long>(pts[0].y)) == doctest::Approx(best).epsilon(1e-12));

    GrayFrame big(32, 32, 0.0);
    for (std::size_t y = 10; y < 19; ++y)
        for (std::size_t x = 10; x < 19; ++x) big.at(x, y) = 1.0;
    auto four = select_features(big, 4);
    CHECK(four.size() == 4);
    const std::array<Point2, 4> big_corners{Point2{9.5, 9.5}, Point2{18.5, 9.5}, Point2{9.5, 18.5},
                                            Point2{18.5, 18.5}};
    for (const auto& c : big_corners) {
        double nearest = 1e9;
        for (const auto& p : four) nearest = std::min(nearest, std::hypot(p.x - c.x, p.y - c.y));
        CHECK(nearest <= 1.6);
    }

    CHECK(select_features(texture(48, 48, 3), 5).size() <= 5);
    CHECK_THROWS_AS(select_features(sq, 0), InvalidInput);
}

TEST_CASE("flow_to_frame rendering") {
    FlowField zero(8, 8);
    auto z = flow_to_frame(zero);
    for (double p : z.pixels) CHECK(p == z.pixels[0]);

    Rng rng(5);
    FlowField f(10, 10), rot(10, 10);
    const double th = 0.7;
    for (std::size_t i = 0; i < 100; ++i) {
        f.u[i] = rng.normal();
        f.v[i] = rng.normal();
        rot.u[i] = std::cos(th) * f.u[i] - std::sin(th) * f.v[i];
        rot.v[i] = std::sin(th) * f.u[i] + std::cos(th) * f.v[i];
    }
    auto a = flow_to_hsv(f), b = flow_to_hsv(rot);
    for (std::size_t i = 0; i < 100; ++i) CHECK(a.value[i] == doctest::Approx(b.value[i]).epsilon(1e-12));
    for (double p : flow_to_frame(f).pixels) CHECK((p >= 0.0 && p <= 1.0));

    FlowField one(4, 4), three(4, 4);
    std::fill(one.u.begin(), one.u.end(), 1.0);
    std::fill(three.u.begin(), three.u.end(), 3.0);
    auto r1 = flow_to_frame(one, 4.0), r3 = flow_to_frame(three, 4.0);
    for (std::size_t i = 0; i < 16; ++i) CHECK(r3.pixels[i] > r1.pixels[i]);

    FlowField bad(2, 2);
    bad.u[0] = std::nan("");
    CHECK_THROWS_AS(flow_to_frame(bad), InvalidInput);
}

TEST_CASE("rasterize_sparse") {
    SparseFlow s{TrackedPoint{5, 5, 1.5, -2.0, true, 1.0}, TrackedPoint{1, 1, 9.0, 9.0, false, 0.0}};
    auto f = rasterize_sparse(s, 10, 10, 1);
    CHECK(f.u[5 * 10 + 5] == 1.5);
    CHECK(f.v[4 * 10 + 6] == -2.0);
    CHECK(f.u[1 * 10 + 1] == 0.0);
    CHECK(f.u[7 * 10 + 7] == 0.0);
}
