#include "bglstm/optim.hpp"

#include <cmath>
#include <string>

#include "bglstm/errors.hpp"
#include "bglstm/numerics.hpp"

namespace bglstm {

AdamState AdamState::for_params(std::span<const std::span<double>> params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (auto p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

AdamState AdamState::for_params(std::span<const std::span<const double>> params, AdamHyper hyper) {
    AdamState s;
    s.hyper = hyper;
    for (auto p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
    }
    return s;
}

void adam_update(std::span<const std::span<double>> params,
                 std::span<const std::vector<double>> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw ShapeError("adam_update: tensor count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size() || params[k].size() != state.m[k].size() ||
            params[k].size() != state.v[k].size())
            throw ShapeError("adam_update: tensor " + std::to_string(k) + " shape mismatch");
        require_finite(grads[k], "adam_update gradient");
    }

    const AdamHyper& h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);
    const double b1 = h.beta1, b2 = h.beta2, lr = h.learning_rate, eps = h.epsilon;
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* __restrict m = state.m[k].data();
        double* __restrict v = state.v[k].data();
        const double* __restrict g = grads[k].data();
        double* __restrict p = params[k].data();
        const std::size_t n = params[k].size();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace bglstm
