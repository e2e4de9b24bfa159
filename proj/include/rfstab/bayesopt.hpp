#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rfstab/error.hpp"
#include "rfstab/forest.hpp"
#include "rfstab/format.hpp"
#include "rfstab/gaussian_process.hpp"
#include "rfstab/objective.hpp"
#include "rfstab/optim.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

inline constexpr std::size_t kTunedDims = 3;
using CubePoint = std::array<double, kTunedDims>;
using Surrogate = GaussianProcess<kTunedDims>;

struct IntRange {
    int lo = 1;
    int hi = 1;
    bool operator==(const IntRange&) const = default;
};

struct RealRange {
    double lo = 0.0;
    double hi = 1.0;
    bool operator==(const RealRange&) const = default;
};

/// Search box for (n_trees, max_depth, train_proportion), affinely mapped onto [0,1]^3.
struct ParameterSpace {
    IntRange n_trees{1, 200};
    IntRange max_depth{1, 20};
    RealRange train_proportion{0.1, 1.0};
    /// Settings not tuned by the optimiser (features_per_split, min_samples_leaf).
    ForestParams base;

    void validate() const {
        if (n_trees.lo < 1 || n_trees.lo > n_trees.hi) throw ConfigError("space: n_trees bounds invalid");
        if (max_depth.lo < 1 || max_depth.lo > max_depth.hi) throw ConfigError("space: max_depth bounds invalid");
        if (!(train_proportion.lo > 0.0 && train_proportion.lo <= train_proportion.hi &&
              train_proportion.hi <= 1.0)) {
            throw ConfigError("space: train_proportion bounds must satisfy 0 < lo <= hi <= 1");
        }
    }

    CubePoint normalise(const ForestParams& p) const {
        auto unit = [](double v, double lo, double hi) { return hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0; };
        const double depth = p.max_depth ? *p.max_depth : max_depth.hi;
        return {unit(p.n_trees, n_trees.lo, n_trees.hi), unit(depth, max_depth.lo, max_depth.hi),
                unit(p.train_proportion, train_proportion.lo, train_proportion.hi)};
    }

    /// Maps a cube point to parameters; integer coordinates round to the nearest value within bounds.
    ForestParams denormalise(const CubePoint& x) const {
        auto to_int = [](double u, IntRange r) {
            const double v = r.lo + std::clamp(u, 0.0, 1.0) * (r.hi - r.lo);
            return std::clamp(static_cast<int>(std::lround(v)), r.lo, r.hi);
        };
        ForestParams p = base;
        p.n_trees = to_int(x[0], n_trees);
        p.max_depth = to_int(x[1], max_depth);
        p.train_proportion = std::clamp(
            train_proportion.lo + std::clamp(x[2], 0.0, 1.0) * (train_proportion.hi - train_proportion.lo),
            train_proportion.lo, train_proportion.hi);
        return p;
    }

    /// Cube point of the parameters actually evaluated (after rounding).
    CubePoint snap(const CubePoint& x) const { return normalise(denormalise(x)); }
};

struct Observation {
    CubePoint point{};
    ForestParams params;
    double value = 0.0;
    EvaluationResult result;
    bool failed = false;
    std::string error;
};

/// Radical-inverse (Halton) sequence in bases 2, 3, 5, shifted modulo 1 by `shift`.
inline CubePoint halton_point(std::uint64_t index, const CubePoint& shift) {
    constexpr std::array<std::uint64_t, kTunedDims> bases{2, 3, 5};
    CubePoint x{};
    for (std::size_t d = 0; d < kTunedDims; ++d) {
        double f = 1.0;
        double r = 0.0;
        for (std::uint64_t i = index; i > 0; i /= bases[d]) {
            f /= static_cast<double>(bases[d]);
            r += f * static_cast<double>(i % bases[d]);
        }
        x[d] = r + shift[d];
        x[d] -= std::floor(x[d]);
    }
    return x;
}

inline CubePoint random_shift(Engine& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CubePoint s{};
    for (auto& v : s) v = u(rng);
    return s;
}

struct AcquisitionOptions {
    std::size_t candidates = 2048;
    int refine_steps = 20;
    double refine_radius = 0.1;
};

/// Maximises expected improvement over the cube: quasi-random candidates, then a coordinate-wise
/// golden-section pass around the best. Equal EI prefers smaller n_trees, then smaller depth.
inline CubePoint suggest_point(const Surrogate& gp, Engine& rng, const AcquisitionOptions& options = {}) {
    const double best = gp.best_value();
    auto ei = [&](const CubePoint& x) { return expected_improvement(gp, x, best); };
    auto better = [](double ea, const CubePoint& a, double eb, const CubePoint& b) {
        if (ea != eb) return ea > eb;
        if (a[0] != b[0]) return a[0] < b[0];
        return a[1] < b[1];
    };

    const CubePoint shift = random_shift(rng);
    CubePoint best_x = halton_point(1, shift);
    double best_ei = ei(best_x);
    for (std::size_t i = 2; i <= options.candidates; ++i) {
        const CubePoint x = halton_point(i, shift);
        const double e = ei(x);
        if (better(e, x, best_ei, best_x)) {
            best_x = x;
            best_ei = e;
        }
    }

    for (std::size_t d = 0; d < kTunedDims; ++d) {
        const double lo = std::max(0.0, best_x[d] - options.refine_radius);
        const double hi = std::min(1.0, best_x[d] + options.refine_radius);
        CubePoint trial = best_x;
        trial[d] = golden_section_max(
            [&](double v) {
                CubePoint p = best_x;
                p[d] = v;
                return ei(p);
            },
            lo, hi, options.refine_steps);
        const double e = ei(trial);
        if (e > best_ei) {
            best_x = trial;
            best_ei = e;
        }
    }
    return best_x;
}

inline ForestParams suggest_next(const Surrogate& gp, const ParameterSpace& space, Engine& rng,
                                 const AcquisitionOptions& options = {}) {
    return space.denormalise(suggest_point(gp, rng, options));
}

struct OptimizerOptions {
    int n_init = 5;
    int n_iter = 20;
    Seed seed = 0;
    SurrogateFitOptions surrogate;
    AcquisitionOptions acquisition;
};

struct OptimizationResult {
    ForestParams best_params;
    EvaluationResult best_result;
    std::vector<Observation> trace;
    std::vector<std::string> log;
};

/// Running minimum of the successful observations in a trace.
inline std::vector<double> running_best(const std::vector<Observation>& trace) {
    std::vector<double> out;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : trace) {
        if (!o.failed) best = std::min(best, o.value);
        out.push_back(best);
    }
    return out;
}

/// Minimises evaluator(params).loss over the space: a quasi-random initial design, then
/// n_iter rounds of surrogate fit + expected-improvement suggestion. Returns the best observed
/// setting. A throwing evaluation is recorded as failed with value worst + 1 standard deviation.
template <typename Evaluator>
OptimizationResult optimize(Evaluator&& evaluator, const ParameterSpace& space, const OptimizerOptions& options) {
    space.validate();
    if (options.n_init < 1) throw ConfigError("optimize: n_init must be >= 1");
    if (options.n_iter < 0) throw ConfigError("optimize: n_iter must be >= 0");

    OptimizationResult out;
    auto record = [&](const CubePoint& raw_point) {
        Observation obs;
        obs.params = space.denormalise(raw_point);
        obs.point = space.normalise(obs.params);
        try {
            obs.result = evaluator(obs.params);
            obs.value = obs.result.loss;
            if (!std::isfinite(obs.value)) throw EvaluationError("non-finite loss");
        } catch (const std::exception& e) {
            std::vector<double> ok;
            for (const auto& o : out.trace) {
                if (!o.failed) ok.push_back(o.value);
            }
            double worst = 0.0;
            double unit = 1.0;
            if (!ok.empty()) {
                worst = *std::max_element(ok.begin(), ok.end());
                double mean = 0.0;
                for (double v : ok) mean += v;
                mean /= static_cast<double>(ok.size());
                double ss = 0.0;
                for (double v : ok) ss += (v - mean) * (v - mean);
                const double sd = std::sqrt(ss / static_cast<double>(ok.size()));
                if (sd > 0.0) unit = sd;
            }
            obs.failed = true;
            obs.error = e.what();
            obs.value = worst + unit;
            obs.result = EvaluationResult{};
            obs.result.params = obs.params;
            obs.result.loss = obs.value;
            out.log.push_back("evaluation failed at n_trees=" + std::to_string(obs.params.n_trees) +
                              " max_depth=" + std::to_string(obs.params.max_depth.value_or(0)) +
                              " train_proportion=" + format_double(obs.params.train_proportion) + ": " + e.what());
        }
        out.trace.push_back(std::move(obs));
    };

    Engine design_rng = make_engine(derive_seed(options.seed, Stream::initial_design));
    const CubePoint shift = random_shift(design_rng);
    for (int i = 0; i < options.n_init; ++i) record(halton_point(static_cast<std::uint64_t>(i + 1), shift));

    for (int it = 0; it < options.n_iter; ++it) {
        std::vector<std::pair<CubePoint, double>> data;
        data.reserve(out.trace.size());
        for (const auto& o : out.trace) data.emplace_back(o.point, o.value);
        SurrogateFitOptions fit = options.surrogate;
        fit.seed = derive_seed(options.seed, Stream::surrogate_fit, static_cast<std::uint64_t>(it));
        const Surrogate gp = Surrogate::fit(data, fit);
        for (const auto& msg : gp.log()) out.log.push_back(msg);
        Engine rng = make_engine(derive_seed(options.seed, Stream::acquisition, static_cast<std::uint64_t>(it)));
        record(suggest_point(gp, rng, options.acquisition));
    }

    const Observation* best = nullptr;
    for (const auto& o : out.trace) {
        if (!o.failed && (!best || o.value < best->value)) best = &o;
    }
    if (!best) throw EvaluationError("optimize: every evaluation failed");
    out.best_params = best->params;
    out.best_result = best->result;
    return out;
}

} // namespace rfstab
