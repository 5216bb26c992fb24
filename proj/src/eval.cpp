#include "bglstm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bglstm/errors.hpp"
#include "bglstm/numerics.hpp"

namespace bglstm {

double reconstruction_error(std::span<const double> target, std::span<const double> recon) {
    if (target.size() != recon.size())
        throw ShapeError("reconstruction_error: " + std::to_string(target.size()) + " vs " + std::to_string(recon.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double d = target[i] - recon[i];
        s += d * d;
    }
    return std::sqrt(s);
}

std::vector<double> regularity_score(std::span<const double> rec_errs, bool range_denominator) {
    if (rec_errs.empty()) throw InvalidInput("regularity_score: empty error list");
    require_finite(rec_errs, "regularity_score");
    const auto [lo_it, hi_it] = std::minmax_element(rec_errs.begin(), rec_errs.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo < 0.0) throw InvalidInput("regularity_score: negative reconstruction error");
    if (!(hi > 0.0)) throw DegenerateData("regularity_score: all reconstruction errors are zero");
    double denom = hi;
    if (range_denominator && hi > lo) denom = hi - lo;
    std::vector<double> out(rec_errs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 - (rec_errs[i] - lo) / denom;
    return out;
}

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("roc_points: scores and labels differ in length");
    require_finite(scores, "roc_points");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InvalidInput("roc_points: labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw InvalidInput("roc_points: labels must contain both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    constexpr double inf = std::numeric_limits<double>::infinity();
    RocCurve curve{{inf, 0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double thr = scores[order[k]];
        while (k < order.size() && scores[order[k]] == thr) {
            (labels[order[k]] ? tp : fp) += 1;
            ++k;
        }
        curve.push_back({thr, static_cast<double>(fp) / static_cast<double>(neg),
                         static_cast<double>(tp) / static_cast<double>(pos)});
    }
    curve.push_back({-inf, 1.0, 1.0});
    return curve;
}

double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
    return std::clamp(area, 0.0, 1.0);
}

double eer(const RocCurve& curve) {
    if (curve.empty()) throw InvalidInput("eer: empty curve");
    auto gap = [](const RocPoint& p) { return p.fpr + p.tpr - 1.0; };
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double g = gap(curve[i]);
        if (g == 0.0) return curve[i].fpr;
        if (g > 0.0) {
            if (i == 0) return curve[0].fpr;
            const double g0 = gap(curve[i - 1]);
            const double t = -g0 / (g - g0);
            return curve[i - 1].fpr + t * (curve[i].fpr - curve[i - 1].fpr);
        }
    }
    return curve.back().fpr;
}

std::string roc_csv(const RocCurve& curve) {
    std::ostringstream s;
    s.precision(10);
    s << "threshold,fpr,tpr\n";
    for (const auto& p : curve) s << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    return s.str();
}

std::string regularity_csv(const VideoScores& v) {
    if (v.rec_err.size() != v.reg_score.size() || v.rec_err.size() != v.labels.size())
        throw ShapeError("regularity_csv: column lengths differ");
    std::ostringstream s;
    s.precision(10);
    s << "frame_index,rec_err,reg_score,label\n";
    for (std::size_t i = 0; i < v.rec_err.size(); ++i)
        s << i << ',' << v.rec_err[i] << ',' << v.reg_score[i] << ',' << v.labels[i] << '\n';
    return s.str();
}

}  // namespace bglstm
