#pragma once

// Central finite-difference oracle shared by the gradient tests. It only
// evaluates the objective; it never touches the analytic backward code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace bglstm::testing {

inline double central_difference(double& param, double eps, const std::function<double()>& objective) {
    const double saved = param;
    param = saved + eps;
    const double up = objective();
    param = saved - eps;
    const double down = objective();
    param = saved;
    return (up - down) / (2.0 * eps);
}

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// gradient is ~0 from producing meaningless ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
    double worst = 0.0;
    std::size_t checked = 0;
};

// Compares every coordinate of `params` (with matching `analytic` gradients).
inline GradCheck check_gradients(const std::vector<std::span<double>>& params,
                                 const std::vector<std::vector<double>>& analytic, double eps,
                                 const std::function<double()>& objective) {
    GradCheck res;
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t j = 0; j < params[k].size(); ++j) {
            const double num = central_difference(params[k][j], eps, objective);
            res.worst = std::max(res.worst, relative_error(analytic[k][j], num));
            ++res.checked;
        }
    return res;
}

}  // namespace bglstm::testing
