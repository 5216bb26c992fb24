#include "bglstm/cells.hpp"

#include <cmath>

#include "bglstm/errors.hpp"

namespace bglstm {

namespace {

constexpr std::size_t idx(Gate g) { return static_cast<std::size_t>(g); }

struct Resolved {
    bool forget_param;    // forget gate computed from parameters and used
    bool forget_present;  // forget gate has storage (computed even if pinned)
    bool input_used;      // input gate multiplies the candidate
    CandidateActivation candidate;
};

Resolved resolve(const CellVariant& v, const StepOverride& o) {
    Resolved r{};
    switch (v.kind) {
        case CellKind::Standard:
            r.forget_present = true;
            r.forget_param = !o.forget_to_one;
            r.input_used = true;
            r.candidate = o.candidate.value_or(v.candidate);
            break;
        case CellKind::BiGated:
            r.forget_present = false;
            r.forget_param = false;
            r.input_used = !v.literal_eq13;
            r.candidate = v.candidate;
            break;
        case CellKind::NoInputGate:
            r.forget_present = true;
            r.forget_param = true;
            r.input_used = false;
            r.candidate = v.candidate;
            break;
    }
    return r;
}

void check_variant(const CellVariant& v, const CellWeights& w) {
    if (v.kind != w.kind())
        throw InvalidInput("cell variant " + to_string(v.kind) + " does not match weights of kind " +
                           to_string(w.kind()));
}

// z = hx W^T + b, then the gate nonlinearity in place.
void gate_forward(const GateParams& p, const Matrix& hx, bool use_sigmoid, Matrix& out) {
    matmul_nt(hx, p.weight, out);
    const std::size_t n = p.bias.size();
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t j = 0; j < n; ++j) {
            const double z = row[j] + p.bias[j];
            row[j] = use_sigmoid ? sigmoid(z) : std::tanh(z);
        }
    }
}

StepCache forward_step(const Resolved& rv, const CellWeights& w, const Matrix& h_prev,
                       const Matrix& c_prev, const Matrix& x, Matrix& h_out, Matrix& c_out) {
    const std::size_t batch = x.rows();
    const std::size_t hid = w.hidden_dim();
    const std::size_t in = w.input_dim();
    if (x.cols() != in) throw ShapeError("cell step: input has " + std::to_string(x.cols()) +
                                         " features, expected " + std::to_string(in));
    if (h_prev.rows() != batch || h_prev.cols() != hid || c_prev.rows() != batch ||
        c_prev.cols() != hid)
        throw ShapeError("cell step: state shape does not match batch x hidden");

    StepCache cache;
    cache.hx = Matrix(batch, hid + in);
    for (std::size_t r = 0; r < batch; ++r) {
        auto dst = cache.hx.row(r);
        auto hr = h_prev.row(r);
        auto xr = x.row(r);
        std::copy(hr.begin(), hr.end(), dst.begin());
        std::copy(xr.begin(), xr.end(), dst.begin() + static_cast<std::ptrdiff_t>(hid));
    }

    for (Gate g : gates_of(w.kind())) {
        const bool sig = g != Gate::Candidate || rv.candidate == CandidateActivation::Sigmoid;
        gate_forward(w.gate(g), cache.hx, sig, cache.activation[idx(g)]);
    }
    if (rv.forget_present && !rv.forget_param) cache.activation[idx(Gate::Forget)].fill(1.0);

    cache.c_prev = c_prev;
    c_out = Matrix(batch, hid);
    cache.tanh_c = Matrix(batch, hid);
    h_out = Matrix(batch, hid);
    const Matrix& cand = cache.activation[idx(Gate::Candidate)];
    const Matrix& out_gate = cache.activation[idx(Gate::Output)];
    for (std::size_t k = 0; k < batch * hid; ++k) {
        double carried = c_prev.data()[k];
        if (rv.forget_present) carried = cache.activation[idx(Gate::Forget)].data()[k] * carried;
        double added = cand.data()[k];
        if (rv.input_used) added = cache.activation[idx(Gate::Input)].data()[k] * added;
        const double c = carried + added;
        c_out.data()[k] = c;
        const double tc = std::tanh(c);
        cache.tanh_c.data()[k] = tc;
        h_out.data()[k] = out_gate.data()[k] * tc;
    }
    return cache;
}

Matrix to_row(const Vector& v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.data());
    return m;
}

}  // namespace

std::string to_string(CellKind kind) {
    switch (kind) {
        case CellKind::Standard: return "standard";
        case CellKind::BiGated: return "bigated";
        case CellKind::NoInputGate: return "no-input-gate";
    }
    return "?";
}

std::string to_string(CandidateActivation act) {
    return act == CandidateActivation::Tanh ? "tanh" : "sigmoid";
}

CellKind parse_cell_kind(const std::string& name) {
    if (name == "standard") return CellKind::Standard;
    if (name == "bigated" || name == "bi-gated") return CellKind::BiGated;
    if (name == "no-input-gate" || name == "noinputgate") return CellKind::NoInputGate;
    throw ConfigError("unknown cell variant '" + name + "'");
}

CandidateActivation parse_candidate_activation(const std::string& name) {
    if (name == "tanh") return CandidateActivation::Tanh;
    if (name == "sigmoid") return CandidateActivation::Sigmoid;
    throw ConfigError("unknown candidate activation '" + name + "'");
}

std::vector<Gate> gates_of(CellKind kind) {
    switch (kind) {
        case CellKind::Standard: return {Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output};
        case CellKind::BiGated: return {Gate::Input, Gate::Candidate, Gate::Output};
        case CellKind::NoInputGate: return {Gate::Forget, Gate::Candidate, Gate::Output};
    }
    return {};
}

std::size_t param_count(CellKind kind, std::size_t input_dim, std::size_t hidden_dim) {
    return gates_of(kind).size() * (hidden_dim * (hidden_dim + input_dim) + hidden_dim);
}

CellWeights::CellWeights(CellKind kind, std::size_t input_dim, std::size_t hidden_dim)
    : kind_(kind), input_dim_(input_dim), hidden_dim_(hidden_dim) {
    if (input_dim == 0 || hidden_dim == 0) throw InvalidInput("CellWeights: zero dimension");
    for (Gate g : gates_of(kind))
        gates_[idx(g)] = GateParams{Matrix(hidden_dim, hidden_dim + input_dim), Vector(hidden_dim)};
}

CellWeights CellWeights::glorot(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                                Rng& rng) {
    CellWeights w(kind, input_dim, hidden_dim);
    for (Gate g : gates_of(kind)) w.gate(g).weight = glorot_init(hidden_dim, hidden_dim + input_dim, rng);
    return w;
}

GateParams& CellWeights::gate(Gate g) {
    auto& slot = gates_[idx(g)];
    if (!slot) throw InvalidInput("gate not present in " + to_string(kind_) + " cell");
    return *slot;
}

const GateParams& CellWeights::gate(Gate g) const {
    const auto& slot = gates_[idx(g)];
    if (!slot) throw InvalidInput("gate not present in " + to_string(kind_) + " cell");
    return *slot;
}

std::size_t CellWeights::param_count() const {
    return bglstm::param_count(kind_, input_dim_, hidden_dim_);
}

std::vector<std::span<double>> CellWeights::parameter_spans() {
    std::vector<std::span<double>> out;
    for (Gate g : gates_of(kind_)) {
        out.push_back(gate(g).weight.span());
        out.push_back(gate(g).bias.span());
    }
    return out;
}

std::vector<std::span<const double>> CellWeights::parameter_spans() const {
    std::vector<std::span<const double>> out;
    for (Gate g : gates_of(kind_)) {
        out.push_back(gate(g).weight.span());
        out.push_back(gate(g).bias.span());
    }
    return out;
}

StepResult cell_step(const CellVariant& variant, const CellWeights& w, const CellState& prev,
                     const Vector& x, const StepOverride& override_) {
    check_variant(variant, w);
    if (x.size() != w.input_dim())
        throw ShapeError("cell_step: input length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(w.input_dim()));
    if (prev.h.size() != w.hidden_dim() || prev.c.size() != w.hidden_dim())
        throw ShapeError("cell_step: state length does not match hidden_dim");
    Matrix h, c;
    StepCache cache = forward_step(resolve(variant, override_), w, to_row(prev.h), to_row(prev.c),
                                   to_row(x), h, c);
    return {CellState{h.row_vector(0), c.row_vector(0)}, std::move(cache)};
}

SequenceOutput sequence_forward(const CellVariant& variant, const CellWeights& w,
                                const BatchState& init, std::span<const Matrix> xs,
                                const StepOverride& override_) {
    check_variant(variant, w);
    if (xs.empty()) throw InvalidInput("sequence_forward: empty sequence");
    const Resolved rv = resolve(variant, override_);

    SequenceOutput out;
    out.cache.variant = variant;
    out.cache.override_ = override_;
    out.cache.steps.reserve(xs.size());
    out.hs.reserve(xs.size());
    Matrix h = init.h;
    Matrix c = init.c;
    for (const Matrix& x : xs) {
        Matrix h_next, c_next;
        out.cache.steps.push_back(forward_step(rv, w, h, c, x, h_next, c_next));
        h = std::move(h_next);
        c = std::move(c_next);
        out.hs.push_back(h);
    }
    out.final_state = {std::move(h), std::move(c)};
    return out;
}

SequenceGradients sequence_backward(const CellWeights& w, const SequenceCache& cache,
                                    std::span<const Matrix> grad_hs, const BatchState* grad_final) {
    check_variant(cache.variant, w);
    const std::size_t steps = cache.steps.size();
    if (steps == 0) throw InvalidInput("sequence_backward: empty cache");
    if (grad_hs.size() != steps)
        throw InvalidInput("sequence_backward: " + std::to_string(grad_hs.size()) +
                           " output gradients for " + std::to_string(steps) + " cached steps");

    const Resolved rv = resolve(cache.variant, cache.override_);
    const std::size_t batch = cache.steps.front().hx.rows();
    const std::size_t hid = w.hidden_dim();
    const std::size_t in = w.input_dim();
    const std::size_t n = batch * hid;

    SequenceGradients grads{CellWeights(w.kind(), in, hid), BatchState::zeros(batch, hid),
                            std::vector<Matrix>(steps)};

    Matrix dh(batch, hid), dc(batch, hid);
    if (grad_final) {
        if (grad_final->h.rows() != batch || grad_final->h.cols() != hid ||
            grad_final->c.rows() != batch || grad_final->c.cols() != hid)
            throw ShapeError("sequence_backward: final-state gradient shape");
        dh = grad_final->h;
        dc = grad_final->c;
    }

    const std::vector<Gate> gates = gates_of(w.kind());
    // Pre-activation gradients for every step, stacked step-major so the
    // weight gradients come out of one product per gate.
    std::array<Matrix, kMaxGates> dz_all;
    for (Gate g : gates) dz_all[idx(g)] = Matrix(steps * batch, hid);
    Matrix hx_all(steps * batch, hid + in);
    Matrix dhx(batch, hid + in);
    Matrix tmp;

    for (std::size_t t = steps; t-- > 0;) {
        const StepCache& sc = cache.steps[t];
        const Matrix& gh = grad_hs[t];
        if (gh.rows() != batch || gh.cols() != hid)
            throw ShapeError("sequence_backward: output gradient shape at step " + std::to_string(t));
        std::copy(sc.hx.data(), sc.hx.data() + sc.hx.size(), hx_all.data() + t * sc.hx.size());

        std::array<double*, kMaxGates> dz{};
        for (Gate g : gates) dz[idx(g)] = dz_all[idx(g)].data() + t * n;

        const Matrix& o = sc.activation[idx(Gate::Output)];
        const Matrix& cand = sc.activation[idx(Gate::Candidate)];
        const bool sig_cand = rv.candidate == CandidateActivation::Sigmoid;
        for (std::size_t k = 0; k < n; ++k) {
            const double dht = dh.data()[k] + gh.data()[k];
            const double tc = sc.tanh_c.data()[k];
            const double ok = o.data()[k];
            const double dct = dc.data()[k] + dht * ok * (1.0 - tc * tc);
            dz[idx(Gate::Output)][k] = dht * tc * ok * (1.0 - ok);

            const double ck = cand.data()[k];
            double dcand = dct;
            if (rv.input_used) {
                const double ik = sc.activation[idx(Gate::Input)].data()[k];
                dcand = dct * ik;
                dz[idx(Gate::Input)][k] = dct * ck * ik * (1.0 - ik);
            } else if (w.has(Gate::Input)) {
                dz[idx(Gate::Input)][k] = 0.0;
            }
            dz[idx(Gate::Candidate)][k] = sig_cand ? dcand * ck * (1.0 - ck) : dcand * (1.0 - ck * ck);

            double dcp = dct;
            if (rv.forget_present) {
                const double fk = sc.activation[idx(Gate::Forget)].data()[k];
                dcp = dct * fk;
                dz[idx(Gate::Forget)][k] =
                    rv.forget_param ? dct * sc.c_prev.data()[k] * fk * (1.0 - fk) : 0.0;
            }
            dc.data()[k] = dcp;
        }

        dhx.fill(0.0);
        Matrix dz_step(batch, hid);
        for (Gate g : gates) {
            std::copy(dz[idx(g)], dz[idx(g)] + n, dz_step.data());
            matmul_nn(dz_step, w.gate(g).weight, tmp);
            for (std::size_t k = 0; k < dhx.size(); ++k) dhx.data()[k] += tmp.data()[k];
        }

        Matrix dx(batch, in);
        for (std::size_t r = 0; r < batch; ++r) {
            auto src = dhx.row(r);
            std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(hid), dh.row(r).begin());
            std::copy(src.begin() + static_cast<std::ptrdiff_t>(hid), src.end(), dx.row(r).begin());
        }
        grads.xs[t] = std::move(dx);
    }

    for (Gate g : gates) {
        GateParams& gp = grads.weights.gate(g);
        const Matrix& d = dz_all[idx(g)];
        matmul_tn_acc(d, hx_all, gp.weight);
        for (std::size_t r = 0; r < d.rows(); ++r) {
            auto row = d.row(r);
            for (std::size_t j = 0; j < hid; ++j) gp.bias[j] += row[j];
        }
    }
    grads.init = {std::move(dh), std::move(dc)};
    return grads;
}

}  // namespace bglstm
