#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfstab/error.hpp"
#include "rfstab/matrix.hpp"

namespace rfstab {

/// R x N matrix of positive-class probabilities: entry (j, i) is run j's prediction for validation point i.
class PredictionMatrix {
public:
    PredictionMatrix() = default;

    explicit PredictionMatrix(Matrix values) : values_(std::move(values)) {
        for (double v : values_.values()) {
            if (!(v >= 0.0 && v <= 1.0)) throw EvaluationError("prediction outside [0, 1]: " + std::to_string(v));
        }
    }

    static PredictionMatrix from_runs(const std::vector<std::vector<double>>& runs) {
        return PredictionMatrix(Matrix::from_rows(runs));
    }

    std::size_t runs() const noexcept { return values_.rows(); }
    std::size_t points() const noexcept { return values_.cols(); }
    double operator()(std::size_t run, std::size_t point) const noexcept { return values_(run, point); }
    std::span<const double> run(std::size_t j) const noexcept { return values_.row(j); }
    const Matrix& values() const noexcept { return values_; }

private:
    Matrix values_;
};

struct StabilityReport {
    double mspd = 0.0;
    double rmspd = 0.0;
    double mean_variance = 0.0;
    double upper_bound = 0.0; ///< 4 * mean_variance
};

namespace detail {

inline void require_runs(const PredictionMatrix& preds) {
    if (preds.runs() < 2) throw EvaluationError("stability needs at least 2 runs, got " + std::to_string(preds.runs()));
    if (preds.points() < 1) throw EvaluationError("stability needs at least 1 validation point");
}

} // namespace detail

/// Mean squared prediction delta averaged over all unordered run pairs.
inline double mspd_pairwise(const PredictionMatrix& preds) {
    detail::require_runs(preds);
    const std::size_t r = preds.runs();
    const std::size_t n = preds.points();
    long double pair_sum = 0.0L;
    for (std::size_t j = 1; j < r; ++j) {
        const auto yj = preds.run(j);
        for (std::size_t k = 0; k < j; ++k) {
            const auto yk = preds.run(k);
            long double sq = 0.0L;
            for (std::size_t i = 0; i < n; ++i) {
                const long double d = static_cast<long double>(yj[i]) - yk[i];
                sq += d * d;
            }
            pair_sum += sq / n;
        }
    }
    return static_cast<double>(2.0L * pair_sum / (static_cast<long double>(r) * (r - 1)));
}

/// Variance-minus-covariance form of the MSPD, evaluated term by term with the run mean of each
/// point as the expectation. The cross term is computed explicitly rather than assumed zero.
inline double mspd_decomposed(const PredictionMatrix& preds) {
    detail::require_runs(preds);
    const std::size_t r = preds.runs();
    const std::size_t n = preds.points();
    const long double rl = static_cast<long double>(r);
    long double total = 0.0L;
    std::vector<long double> centred(r);
    for (std::size_t i = 0; i < n; ++i) {
        long double mean = 0.0L;
        for (std::size_t l = 0; l < r; ++l) mean += preds(l, i);
        mean /= rl;
        long double var = 0.0L;
        for (std::size_t l = 0; l < r; ++l) {
            centred[l] = preds(l, i) - mean;
            var += centred[l] * centred[l];
        }
        var /= (rl - 1);
        long double cov = 0.0L;
        for (std::size_t j = 0; j < r; ++j) {
            for (std::size_t k = 0; k < r; ++k) cov += centred[j] * centred[k];
        }
        cov /= rl * (rl - 1);
        total += var - cov;
    }
    return static_cast<double>(2.0L * total / n);
}

inline double rmspd(const PredictionMatrix& preds) { return std::sqrt(mspd_pairwise(preds)); }

/// Mean over validation points of the across-run sample variance (1/(R-1) normalisation).
inline double mean_run_variance(const PredictionMatrix& preds) {
    detail::require_runs(preds);
    const std::size_t r = preds.runs();
    const std::size_t n = preds.points();
    long double total = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double mean = 0.0L;
        for (std::size_t l = 0; l < r; ++l) mean += preds(l, i);
        mean /= r;
        long double ss = 0.0L;
        for (std::size_t l = 0; l < r; ++l) {
            const long double d = preds(l, i) - mean;
            ss += d * d;
        }
        total += ss / (r - 1);
    }
    return static_cast<double>(total / n);
}

inline StabilityReport stability_report(const PredictionMatrix& preds) {
    StabilityReport rep;
    rep.mspd = mspd_pairwise(preds);
    rep.rmspd = std::sqrt(rep.mspd);
    rep.mean_variance = mean_run_variance(preds);
    rep.upper_bound = 4.0 * rep.mean_variance;
    return rep;
}

/// Exact Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as one half.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw EvaluationError("auc: scores and labels differ in length");
    std::uint64_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw EvaluationError("auc: labels must be 0 or 1");
        if (std::isnan(scores[i])) throw EvaluationError("auc: NaN score");
        n_pos += static_cast<std::uint64_t>(labels[i]);
    }
    const std::uint64_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw EvaluationError("AUC undefined: labels contain a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // numerator counts half-credits: 2 per strict win, 1 per tie
    std::uint64_t half_credits = 0;
    std::uint64_t neg_below = 0;
    for (std::size_t g = 0; g < order.size();) {
        std::size_t end = g;
        std::uint64_t pos_group = 0;
        std::uint64_t neg_group = 0;
        while (end < order.size() && scores[order[end]] == scores[order[g]]) {
            (labels[order[end]] ? pos_group : neg_group) += 1;
            ++end;
        }
        half_credits += 2 * pos_group * neg_below + pos_group * neg_group;
        neg_below += neg_group;
        g = end;
    }
    return static_cast<double>(half_credits) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

} // namespace rfstab
