#include <cmath>

#include "doctest.h"

#include "bglstm/cells.hpp"
#include "bglstm/errors.hpp"
#include "fd_oracle.hpp"

using namespace bglstm;

namespace {

CellState zero_state(std::size_t hidden) { return {Vector(hidden), Vector(hidden)}; }

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.span()) v = scale * rng.normal();
    return m;
}

void randomize(CellWeights& w, Rng& rng, double scale) {
    for (auto s : w.parameter_spans())
        for (double& v : s) v = scale * rng.normal();
}

double objective(const CellVariant& v, const CellWeights& w, const BatchState& init,
                 const std::vector<Matrix>& xs, const std::vector<Matrix>& g) {
    auto out = sequence_forward(v, w, init, xs);
    double sum = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t)
        for (std::size_t k = 0; k < g[t].size(); ++k) sum += g[t].data()[k] * out.hs[t].data()[k];
    return sum;
}

double gradient_check(const CellVariant& variant, std::uint64_t seed) {
    const std::size_t in = 3, hid = 4, T = 5, batch = 2;
    Rng rng(seed);
    CellWeights w(variant.kind, in, hid);
    randomize(w, rng, 0.5);
    BatchState init{random_matrix(batch, hid, rng, 0.5), random_matrix(batch, hid, rng, 0.5)};
    std::vector<Matrix> xs, g;
    for (std::size_t t = 0; t < T; ++t) {
        xs.push_back(random_matrix(batch, in, rng));
        g.push_back(random_matrix(batch, hid, rng));
    }
    auto out = sequence_forward(variant, w, init, xs);
    auto grads = sequence_backward(w, out.cache, g);

    std::vector<std::span<double>> params = w.parameter_spans();
    std::vector<std::vector<double>> analytic;
    for (auto s : grads.weights.parameter_spans()) analytic.emplace_back(s.begin(), s.end());
    params.push_back(init.h.span());
    analytic.emplace_back(grads.init.h.span().begin(), grads.init.h.span().end());
    params.push_back(init.c.span());
    analytic.emplace_back(grads.init.c.span().begin(), grads.init.c.span().end());
    for (std::size_t t = 0; t < T; ++t) {
        params.push_back(xs[t].span());
        analytic.emplace_back(grads.xs[t].span().begin(), grads.xs[t].span().end());
    }
    auto res = testing::check_gradients(params, analytic, 1e-5,
                                        [&] { return objective(variant, w, init, xs, g); });
    CHECK(res.checked > 100);
    return res.worst;
}

}  // namespace

TEST_CASE("zero-weight cell steps") {
    SUBCASE("standard from zero state stays at zero") {
        CellWeights w(CellKind::Standard, 2, 1);
        auto r = cell_step(CellVariant::standard(), w, zero_state(1), Vector{3.0, -1.0});
        CHECK(r.state.h[0] == 0.0);
        CHECK(r.state.c[0] == 0.0);
    }
    SUBCASE("standard halves the carried cell") {
        CellWeights w(CellKind::Standard, 1, 1);
        auto r = cell_step(CellVariant::standard(), w, {Vector{0.0}, Vector{1.0}}, Vector{0.0});
        CHECK(r.state.c[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(r.state.h[0] == doctest::Approx(0.2310585786).epsilon(1e-10));
    }
    SUBCASE("bi-gated adds i * candidate") {
        CellWeights w(CellKind::BiGated, 1, 1);
        auto r = cell_step(CellVariant::bi_gated(), w, zero_state(1), Vector{0.0});
        CHECK(r.state.c[0] == doctest::Approx(0.25).epsilon(1e-15));
        CHECK(r.state.h[0] == doctest::Approx(0.1224593312).epsilon(1e-10));
    }
    SUBCASE("bi-gated literal update adds the bare candidate") {
        CellWeights w(CellKind::BiGated, 1, 1);
        auto r = cell_step(CellVariant::bi_gated(true), w, zero_state(1), Vector{0.0});
        CHECK(r.state.c[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(r.state.h[0] == doctest::Approx(0.2310585786).epsilon(1e-10));
    }
}

TEST_CASE("zero-weight sequences") {
    std::vector<Matrix> xs(3, Matrix(1, 1));
    SUBCASE("bi-gated accumulates 0.25 per step") {
        CellWeights w(CellKind::BiGated, 1, 1);
        auto out = sequence_forward(CellVariant::bi_gated(), w, BatchState::zeros(1, 1), xs);
        const double expected[] = {0.25, 0.5, 0.75};
        for (std::size_t t = 0; t < 3; ++t) {
            const double c = t + 1 < 3 ? out.cache.steps[t + 1].c_prev(0, 0) : out.final_state.c(0, 0);
            CHECK(c == doctest::Approx(expected[t]).epsilon(1e-15));
        }
    }
    SUBCASE("standard halves every step") {
        CellWeights w(CellKind::Standard, 1, 1);
        BatchState init{Matrix(1, 1), Matrix(1, 1, 1.0)};
        auto out = sequence_forward(CellVariant::standard(), w, init, xs);
        const double expected[] = {0.5, 0.25, 0.125};
        for (std::size_t t = 0; t < 3; ++t) {
            const double c = t + 1 < 3 ? out.cache.steps[t + 1].c_prev(0, 0) : out.final_state.c(0, 0);
            CHECK(c == doctest::Approx(expected[t]).epsilon(1e-15));
        }
    }
}

TEST_CASE("length-1 sequence matches a single step") {
    Rng rng(3);
    auto w = CellWeights::glorot(CellKind::Standard, 3, 2, rng);
    Vector x{0.1, -0.4, 0.7};
    CellState prev{Vector{0.2, -0.1}, Vector{0.5, 0.3}};
    auto step = cell_step(CellVariant::standard(), w, prev, x);
    Matrix xm(1, 3);
    std::copy(x.begin(), x.end(), xm.data());
    BatchState init{Matrix(1, 2), Matrix(1, 2)};
    std::copy(prev.h.begin(), prev.h.end(), init.h.data());
    std::copy(prev.c.begin(), prev.c.end(), init.c.data());
    auto seq = sequence_forward(CellVariant::standard(), w, init, std::vector<Matrix>{xm});
    CHECK(seq.hs[0].row_vector(0) == step.state.h);
    CHECK(seq.final_state.c.row_vector(0) == step.state.c);
}

TEST_CASE("cell errors") {
    CellWeights w(CellKind::BiGated, 3, 2);
    CHECK_THROWS_AS(cell_step(CellVariant::bi_gated(), w, zero_state(2), Vector{1.0}), ShapeError);
    CHECK_THROWS_AS(cell_step(CellVariant::bi_gated(), w, zero_state(3), Vector(3)), ShapeError);
    CHECK_THROWS_AS(cell_step(CellVariant::standard(), w, zero_state(2), Vector(3)), InvalidInput);
    CHECK_THROWS_AS(sequence_forward(CellVariant::bi_gated(), w, BatchState::zeros(1, 2), {}),
                    InvalidInput);
    auto out = sequence_forward(CellVariant::bi_gated(), w, BatchState::zeros(1, 2),
                                std::vector<Matrix>(2, Matrix(1, 3)));
    CHECK_THROWS_AS(sequence_backward(w, out.cache, std::vector<Matrix>(3, Matrix(1, 2))), InvalidInput);
    CHECK_FALSE(w.has(Gate::Forget));
    CHECK_THROWS_AS(w.gate(Gate::Forget), InvalidInput);
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
    Rng rng(8);
    auto w = CellWeights::glorot(CellKind::Standard, 3, 4, rng);
    std::vector<Matrix> xs(4, random_matrix(2, 3, rng));
    auto out = sequence_forward(CellVariant::standard(), w, BatchState::zeros(2, 4), xs);
    auto g = sequence_backward(w, out.cache, std::vector<Matrix>(4, Matrix(2, 4)));
    for (auto s : g.weights.parameter_spans())
        for (double v : s) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences for every cell variant") {
    CHECK(gradient_check(CellVariant::standard(), 101) < 1e-4);
    CHECK(gradient_check(CellVariant::bi_gated(), 102) < 1e-4);
    CHECK(gradient_check(CellVariant::bi_gated(true), 103) < 1e-4);
    CHECK(gradient_check(CellVariant::no_input_gate(), 104) < 1e-4);
    // Swapped candidate activations.
    CHECK(gradient_check({CellKind::Standard, CandidateActivation::Sigmoid, false}, 105) < 1e-4);
    CHECK(gradient_check({CellKind::BiGated, CandidateActivation::Tanh, false}, 106) < 1e-4);
    CHECK(gradient_check({CellKind::NoInputGate, CandidateActivation::Sigmoid, false}, 107) < 1e-4);
}

TEST_CASE("bi-gated cell path has unit Jacobian") {
    const std::size_t in = 3, hid = 5, T = 50;
    Rng rng(77);
    auto w = CellWeights::glorot(CellKind::BiGated, in, hid, rng);
    // Cut the recurrent columns so C_0 reaches C_T only through the cell path.
    for (Gate g : gates_of(CellKind::BiGated))
        for (std::size_t r = 0; r < hid; ++r)
            for (std::size_t c = 0; c < hid; ++c) w.gate(g).weight(r, c) = 0.0;
    std::vector<Matrix> xs;
    for (std::size_t t = 0; t < T; ++t) xs.push_back(random_matrix(1, in, rng));
    BatchState init{Matrix(1, hid), random_matrix(1, hid, rng)};
    auto out = sequence_forward(CellVariant::bi_gated(), w, init, xs);
    for (std::size_t k = 0; k < hid; ++k) {
        BatchState seed = BatchState::zeros(1, hid);
        seed.c(0, k) = 1.0;
        auto g = sequence_backward(w, out.cache, std::vector<Matrix>(T, Matrix(1, hid)), &seed);
        for (std::size_t j = 0; j < hid; ++j) CHECK(g.init.c(0, j) == (j == k ? 1.0 : 0.0));
    }
}

TEST_CASE("param_count") {
    CHECK(param_count(CellKind::Standard, 16, 8) == 800);
    CHECK(param_count(CellKind::BiGated, 16, 8) == 600);
    CHECK(param_count(CellKind::NoInputGate, 16, 8) == 600);
    Rng rng(2);
    auto w = CellWeights::glorot(CellKind::BiGated, 16, 8, rng);
    std::size_t stored = 0;
    for (auto s : w.parameter_spans()) stored += s.size();
    CHECK(stored == 600);
}

TEST_CASE("bi-gated equals standard with forget pinned to one and sigmoid candidate") {
    Rng rng(2024);
    const std::size_t in = 4, hid = 3;
    auto bi = CellWeights::glorot(CellKind::BiGated, in, hid, rng);
    randomize(bi, rng, 0.8);
    CellWeights st(CellKind::Standard, in, hid);
    for (Gate g : gates_of(CellKind::BiGated)) st.gate(g) = bi.gate(g);
    st.gate(Gate::Forget).weight = random_matrix(hid, hid + in, rng);
    StepOverride pin{true, CandidateActivation::Sigmoid};
    CellState a = zero_state(hid), b = zero_state(hid);
    for (int t = 0; t < 100; ++t) {
        Vector x(in);
        for (double& v : x) v = rng.normal();
        a = cell_step(CellVariant::bi_gated(), bi, a, x).state;
        b = cell_step(CellVariant::standard(), st, b, x, pin).state;
        CHECK(a.h == b.h);
        CHECK(a.c == b.c);
    }
}

TEST_CASE("gate ranges, bounded outputs, growing bi-gated cell") {
    Rng rng(31);
    for (CellKind kind : {CellKind::Standard, CellKind::BiGated, CellKind::NoInputGate}) {
        CellVariant v = kind == CellKind::Standard   ? CellVariant::standard()
                        : kind == CellKind::BiGated ? CellVariant::bi_gated()
                                                    : CellVariant::no_input_gate();
        auto w = CellWeights::glorot(kind, 3, 4, rng);
        CellState s = zero_state(4);
        for (int t = 0; t < 30; ++t) {
            Vector x(3);
            for (double& e : x) e = 2.0 * rng.normal();
            auto r = cell_step(v, w, s, x);
            for (Gate g : gates_of(kind)) {
                if (g == Gate::Candidate && v.candidate == CandidateActivation::Tanh) continue;
                for (double a : r.cache.activation[static_cast<std::size_t>(g)].span()) {
                    CHECK(a > 0.0);
                    CHECK(a < 1.0);
                }
            }
            for (double h : r.state.h) CHECK(std::abs(h) < 1.0);
            if (kind == CellKind::BiGated)
                for (std::size_t k = 0; k < 4; ++k) CHECK(r.state.c[k] > s.c[k]);
            s = r.state;
        }
    }
}
