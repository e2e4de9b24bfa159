#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "rfstab/dataset.hpp"
#include "rfstab/error.hpp"
#include "rfstab/forest.hpp"
#include "rfstab/metrics.hpp"
#include "rfstab/parallel.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

/// Trade-off weights: alpha on AUC, beta on RMSPD, gamma on runtime.
struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.01;

    void validate() const {
        for (double w : {alpha, beta, gamma}) {
            if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and >= 0");
        }
    }

    bool operator==(const LossWeights&) const = default;
};

enum class CostMode {
    wall_clock, ///< mean per-run training seconds on a monotonic clock
    model,      ///< analytic training_cost(), so results never depend on machine speed
};

struct EvaluationOptions {
    CostMode cost_mode = CostMode::wall_clock;
    /// Seconds per training_cost() unit in model mode; 1e-8 is roughly one modern core.
    double model_cost_scale = 1e-8;
    /// Wall-clock mode: threads per forest, runs sequential. Model mode: runs in parallel.
    std::size_t threads = 1;
    /// Degenerate mode: every run reuses the run-0 seeds, so all runs are identical.
    bool shared_seed = false;
};

struct EvaluationResult {
    double auc = 0.0;
    double rmspd = 0.0;
    double runtime = 0.0;
    double loss = 0.0;
    int runs = 0;
    ForestParams params;
};

/// beta * rmspd + gamma * runtime - alpha * auc
inline double loss(const LossWeights& w, double auc_value, double rmspd_value, double runtime) {
    if (!std::isfinite(auc_value) || !std::isfinite(rmspd_value) || !std::isfinite(runtime)) {
        throw EvaluationError("loss: non-finite input");
    }
    return w.beta * rmspd_value + w.gamma * runtime - w.alpha * auc_value;
}

/// Per-run outputs of repeated independent training on one parameter setting.
struct RunSet {
    PredictionMatrix predictions;
    std::vector<double> aucs;
    std::vector<double> runtimes;
};

/// Trains `runs` forests from scratch (fresh subsample and forest seed per run) and predicts
/// the full validation half with each.
inline RunSet collect_runs(const SplitDataset& data, const ForestParams& params, int runs, Seed seed,
                           const EvaluationOptions& options = {}) {
    params.validate();
    if (runs < 2) throw EvaluationError("need at least 2 runs, got " + std::to_string(runs));
    const auto& val = data.validation;
    const auto positives = std::count(val.labels.begin(), val.labels.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(val.size())) {
        throw EvaluationError("validation half contains a single class");
    }

    const auto n_runs = static_cast<std::size_t>(runs);
    std::vector<std::vector<double>> preds(n_runs);
    std::vector<double> aucs(n_runs);
    std::vector<double> runtimes(n_runs);

    auto one_run = [&](std::size_t r, std::size_t forest_threads) {
        const std::uint64_t stream_index = options.shared_seed ? 0 : r;
        const auto sample = subsample(data.train, params.train_proportion,
                                      derive_seed(seed, Stream::run_sample, stream_index));
        const auto start = std::chrono::steady_clock::now();
        const auto forest = train_forest(sample, params, derive_seed(seed, Stream::run_forest, stream_index),
                                         forest_threads);
        const auto stop = std::chrono::steady_clock::now();
        if (options.cost_mode == CostMode::wall_clock) {
            runtimes[r] = std::chrono::duration<double>(stop - start).count();
        } else {
            runtimes[r] = training_cost(sample.size(), params) * options.model_cost_scale;
        }
        preds[r] = predict_proba(forest, val.features);
        aucs[r] = auc(preds[r], val.labels);
    };

    if (options.cost_mode == CostMode::wall_clock) {
        for (std::size_t r = 0; r < n_runs; ++r) one_run(r, options.threads);
    } else {
        parallel_for(n_runs, options.threads, [&](std::size_t r) { one_run(r, 1); });
    }
    return {PredictionMatrix::from_runs(preds), std::move(aucs), std::move(runtimes)};
}

/// Evaluates one parameter setting: mean per-run AUC, RMSPD across runs, mean per-run training cost.
inline EvaluationResult evaluate_params(const SplitDataset& data, const ForestParams& params, int runs,
                                        const LossWeights& weights, Seed seed, const EvaluationOptions& options = {}) {
    weights.validate();
    const RunSet set = collect_runs(data, params, runs, seed, options);
    EvaluationResult res;
    res.params = params;
    res.runs = runs;
    res.auc = std::accumulate(set.aucs.begin(), set.aucs.end(), 0.0) / static_cast<double>(runs);
    res.rmspd = rmspd(set.predictions);
    res.runtime = std::accumulate(set.runtimes.begin(), set.runtimes.end(), 0.0) / static_cast<double>(runs);
    res.loss = loss(weights, res.auc, res.rmspd, res.runtime);
    return res;
}

} // namespace rfstab
