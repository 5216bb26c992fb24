#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bglstm {

struct AdamHyper {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const AdamHyper&) const = default;
};

// Adam (Kingma & Ba) with bias-corrected moments, one moment pair per tensor.
struct AdamState {
    AdamHyper hyper;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    // Zero moments shaped after the given parameter tensors.
    static AdamState for_params(std::span<const std::span<double>> params, AdamHyper hyper = {});
    static AdamState for_params(std::span<const std::span<const double>> params, AdamHyper hyper = {});

    bool operator==(const AdamState&) const = default;
};

// One Adam step in place. Throws ShapeError on mismatched tensors and
// InvalidInput on non-finite gradients (parameters untouched in both cases).
void adam_update(std::span<const std::span<double>> params,
                 std::span<const std::vector<double>> grads, AdamState& state);

}  // namespace bglstm
