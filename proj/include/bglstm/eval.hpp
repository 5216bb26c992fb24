#pragma once

#include <span>
#include <string>
#include <vector>

namespace bglstm {

// Euclidean distance between a frame and its reconstruction.
double reconstruction_error(std::span<const double> target, std::span<const double> recon);

// 1 - (e - min) / max by default; with range_denominator the divisor is
// max - min (falls back to max when every error is equal).
std::vector<double> regularity_score(std::span<const double> rec_errs, bool range_denominator = false);

struct RocPoint {
    double threshold = 0.0;  // frames with score >= threshold are flagged
    double fpr = 0.0;
    double tpr = 0.0;

    bool operator==(const RocPoint&) const = default;
};

using RocCurve = std::vector<RocPoint>;

// Higher score = more anomalous. Thresholds: +inf, every distinct score, -inf.
RocCurve roc_points(std::span<const double> scores, std::span<const int> labels);
// Trapezoidal area under TPR(FPR).
double auc(const RocCurve& curve);
// FPR where the curve meets TPR = 1 - FPR, interpolated between bracketing points.
double eer(const RocCurve& curve);

struct VideoScores {
    std::vector<double> rec_err;
    std::vector<double> reg_score;
    std::vector<int> labels;
};

std::string roc_csv(const RocCurve& curve);
// frame_index,rec_err,reg_score,label
std::string regularity_csv(const VideoScores& scores);

}  // namespace bglstm
