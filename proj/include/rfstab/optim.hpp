#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace rfstab {

struct MinimizeResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
};

/// Box-constrained Nelder-Mead; trial points are clamped into [lower, upper].
template <typename Fn>
MinimizeResult nelder_mead(Fn&& f, std::vector<double> x0, const std::vector<double>& lower,
                           const std::vector<double>& upper, std::size_t max_evals = 400, double step = 0.25,
                           double tolerance = 1e-8) {
    const std::size_t n = x0.size();
    auto clamp = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    };
    MinimizeResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };

    clamp(x0);
    std::vector<std::vector<double>> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        const double span = (upper[i] - lower[i]) * step;
        simplex[i + 1][i] = x0[i] + span <= upper[i] ? x0[i] + span : x0[i] - span;
        clamp(simplex[i + 1]);
    }
    std::vector<double> fx(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fx[i] = eval(simplex[i]);

    std::vector<std::size_t> idx(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    while (res.evaluations < max_evals) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
        const std::size_t best = idx.front();
        const std::size_t worst = idx.back();
        const std::size_t second = idx[n - 1];
        if (std::abs(fx[worst] - fx[best]) <= tolerance * (1.0 + std::abs(fx[best]))) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
        }
        auto along = [&](double t, std::vector<double>& out) {
            for (std::size_t d = 0; d < n; ++d) out[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
            clamp(out);
        };

        along(-1.0, trial);
        const double f_reflect = eval(trial);
        if (f_reflect < fx[best]) {
            along(-2.0, trial2);
            const double f_expand = eval(trial2);
            if (f_expand < f_reflect) {
                simplex[worst] = trial2;
                fx[worst] = f_expand;
            } else {
                simplex[worst] = trial;
                fx[worst] = f_reflect;
            }
        } else if (f_reflect < fx[second]) {
            simplex[worst] = trial;
            fx[worst] = f_reflect;
        } else {
            const bool outside = f_reflect < fx[worst];
            along(outside ? -0.5 : 0.5, trial2);
            const double f_contract = eval(trial2);
            if (f_contract < std::min(f_reflect, fx[worst])) {
                simplex[worst] = trial2;
                fx[worst] = f_contract;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d) {
                        simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
                    }
                    fx[i] = eval(simplex[i]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(fx.begin(), fx.end()) - fx.begin());
    res.x = simplex[best];
    res.value = fx[best];
    return res;
}

/// Golden-section search for a maximum of a unimodal function on [lo, hi].
template <typename Fn>
double golden_section_max(Fn&& f, double lo, double hi, int steps) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int i = 0; i < steps; ++i) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? c : d;
}

} // namespace rfstab
