#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rfstab/error.hpp"
#include "rfstab/format.hpp"
#include "rfstab/optim.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

/// Matern-5/2 kernel with one length scale per dimension.
template <std::size_t Dim>
struct KernelParams {
    std::array<double, Dim> length_scales{};
    double signal_variance = 1.0;
    double noise_variance = 1e-6;

    KernelParams() { length_scales.fill(0.5); }

    double operator()(const std::array<double, Dim>& a, const std::array<double, Dim>& b) const {
        double r2 = 0.0;
        for (std::size_t d = 0; d < Dim; ++d) {
            const double u = (a[d] - b[d]) / length_scales[d];
            r2 += u * u;
        }
        const double s5r = std::sqrt(5.0 * r2);
        return signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
    }
};

struct KernelBounds {
    double length_lo = 0.05, length_hi = 2.0;
    double signal_lo = 0.1, signal_hi = 10.0;
    double noise_lo = 1e-6, noise_hi = 1.0;
};

struct SurrogateFitOptions {
    KernelBounds bounds;
    std::optional<double> fixed_noise; ///< pin the noise variance instead of fitting it
    int restarts = 4;                  ///< random starts in addition to the box centre
    std::size_t max_evals = 300;       ///< per Nelder-Mead start
    Seed seed = 0;
};

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

/// Gaussian-process posterior over the unit cube. Values are standardised internally
/// (zero mean, unit variance); posterior() reports on that scale.
template <std::size_t Dim>
class GaussianProcess {
public:
    using Point = std::array<double, Dim>;

    GaussianProcess() = default;

    /// Merges duplicate points (averaging their values), standardises, fits kernel
    /// hyperparameters by maximum marginal likelihood, and caches the Cholesky factor.
    static GaussianProcess fit(const std::vector<std::pair<Point, double>>& observations,
                               const SurrogateFitOptions& options = {}) {
        GaussianProcess gp;
        gp.merge(observations);
        gp.standardise();
        const std::size_t n = gp.points_.size();
        gp.kernel_ = KernelParams<Dim>{};
        if (options.fixed_noise) gp.kernel_.noise_variance = *options.fixed_noise;
        if (n >= 2) gp.fit_hyperparameters(options);
        gp.factorise();
        return gp;
    }

    Posterior posterior(const Point& x) const {
        const std::size_t n = points_.size();
        if (n == 0) return {0.0, kernel_.signal_variance};
        Eigen::VectorXd k(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) k(static_cast<Eigen::Index>(i)) = kernel_(points_[i], x);
        const double mean = k.dot(alpha_);
        const Eigen::VectorXd v = chol_.matrixL().solve(k);
        const double var = kernel_.signal_variance - v.squaredNorm();
        return {mean, var > 0.0 ? var : 0.0};
    }

    /// Posterior mean mapped back to the scale of the observed values.
    double raw_mean(const Point& x) const { return y_mean_ + y_scale_ * posterior(x).mean; }

    double standardise(double raw) const { return (raw - y_mean_) / y_scale_; }

    /// Lowest observed value on the standardised scale.
    double best_value() const {
        double best = std::numeric_limits<double>::infinity();
        for (double v : y_) best = std::min(best, v);
        return best;
    }

    const std::vector<Point>& points() const noexcept { return points_; }
    const std::vector<double>& raw_values() const noexcept { return raw_; }
    const KernelParams<Dim>& kernel() const noexcept { return kernel_; }
    double noise_variance() const noexcept { return noise_; }
    const std::vector<std::string>& log() const noexcept { return log_; }

    /// Kernel matrix over the merged points, without the noise term.
    Eigen::MatrixXd kernel_matrix() const { return kernel_matrix(kernel_); }

    Eigen::MatrixXd kernel_matrix(const KernelParams<Dim>& params) const {
        const auto n = static_cast<Eigen::Index>(points_.size());
        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                k(i, j) = params(points_[static_cast<std::size_t>(i)], points_[static_cast<std::size_t>(j)]);
                k(j, i) = k(i, j);
            }
        }
        return k;
    }

    /// Negative log marginal likelihood of the standardised values under `params`.
    double negative_log_likelihood(const KernelParams<Dim>& params) const {
        Eigen::MatrixXd k = kernel_matrix(params);
        k.diagonal().array() += params.noise_variance;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd alpha = llt.solve(y_vector());
        const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double n = static_cast<double>(points_.size());
        return 0.5 * y_vector().dot(alpha) + 0.5 * log_det + 0.5 * n * std::log(2.0 * std::numbers::pi);
    }

private:
    void merge(const std::vector<std::pair<Point, double>>& observations) {
        std::vector<int> counts;
        for (const auto& [x, v] : observations) {
            if (!std::isfinite(v)) throw EvaluationError("surrogate: non-finite observation value");
            std::size_t i = 0;
            while (i < points_.size() && points_[i] != x) ++i;
            if (i == points_.size()) {
                points_.push_back(x);
                raw_.push_back(0.0);
                counts.push_back(0);
            }
            raw_[i] += v;
            ++counts[i];
        }
        for (std::size_t i = 0; i < raw_.size(); ++i) raw_[i] /= counts[i];
    }

    void standardise() {
        const std::size_t n = raw_.size();
        y_mean_ = 0.0;
        y_scale_ = 1.0;
        if (n == 0) return;
        for (double v : raw_) y_mean_ += v;
        y_mean_ /= static_cast<double>(n);
        double ss = 0.0;
        for (double v : raw_) ss += (v - y_mean_) * (v - y_mean_);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (n > 1 && sd > 1e-12 * std::max(1.0, std::abs(y_mean_))) y_scale_ = sd;
        y_.resize(n);
        for (std::size_t i = 0; i < n; ++i) y_[i] = (raw_[i] - y_mean_) / y_scale_;
    }

    Eigen::VectorXd y_vector() const {
        return Eigen::Map<const Eigen::VectorXd>(y_.data(), static_cast<Eigen::Index>(y_.size()));
    }

    // Search in log space: Dim length scales, signal variance, and (unless pinned) noise variance.
    void fit_hyperparameters(const SurrogateFitOptions& options) {
        const auto& b = options.bounds;
        const bool fit_noise = !options.fixed_noise.has_value();
        const std::size_t n_params = Dim + 1 + (fit_noise ? 1 : 0);
        std::vector<double> lower(n_params), upper(n_params);
        for (std::size_t d = 0; d < Dim; ++d) {
            lower[d] = std::log(b.length_lo);
            upper[d] = std::log(b.length_hi);
        }
        lower[Dim] = std::log(b.signal_lo);
        upper[Dim] = std::log(b.signal_hi);
        if (fit_noise) {
            lower[Dim + 1] = std::log(b.noise_lo);
            upper[Dim + 1] = std::log(b.noise_hi);
        }
        auto unpack = [&](const std::vector<double>& theta) {
            KernelParams<Dim> p;
            for (std::size_t d = 0; d < Dim; ++d) p.length_scales[d] = std::exp(theta[d]);
            p.signal_variance = std::exp(theta[Dim]);
            p.noise_variance = fit_noise ? std::exp(theta[Dim + 1]) : *options.fixed_noise;
            return p;
        };
        auto objective = [&](const std::vector<double>& theta) { return negative_log_likelihood(unpack(theta)); };

        std::vector<std::vector<double>> starts;
        std::vector<double> centre(n_params);
        for (std::size_t i = 0; i < n_params; ++i) centre[i] = 0.5 * (lower[i] + upper[i]);
        starts.push_back(centre);
        Engine rng = make_engine(options.seed);
        for (int s = 0; s < options.restarts; ++s) {
            std::vector<double> x(n_params);
            for (std::size_t i = 0; i < n_params; ++i) {
                x[i] = std::uniform_real_distribution<double>(lower[i], upper[i])(rng);
            }
            starts.push_back(std::move(x));
        }

        MinimizeResult best;
        for (const auto& start : starts) {
            auto res = nelder_mead(objective, start, lower, upper, options.max_evals);
            if (res.value < best.value) best = std::move(res);
        }
        if (!best.x.empty()) kernel_ = unpack(best.x);
    }

    // Raises the noise floor tenfold until the factorisation succeeds.
    void factorise() {
        noise_ = kernel_.noise_variance;
        const std::size_t n = points_.size();
        if (n == 0) return;
        const Eigen::MatrixXd k = kernel_matrix();
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::MatrixXd kn = k;
            kn.diagonal().array() += noise_;
            chol_.compute(kn);
            if (chol_.info() == Eigen::Success) {
                kernel_.noise_variance = noise_;
                alpha_ = chol_.solve(y_vector());
                return;
            }
            const double raised = std::max(noise_ * 10.0, 1e-10);
            log_.push_back("kernel matrix not positive definite; noise raised from " + format_double(noise_) +
                           " to " + format_double(raised));
            noise_ = raised;
        }
        throw EvaluationError("surrogate: kernel matrix could not be factorised");
    }

    std::vector<Point> points_;
    std::vector<double> raw_;
    std::vector<double> y_;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    KernelParams<Dim> kernel_;
    double noise_ = 1e-6;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
    std::vector<std::string> log_;
};

inline double standard_normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Closed-form expected improvement below `best` (minimisation).
inline double expected_improvement(double mean, double variance, double best) {
    const double sigma = std::sqrt(std::max(variance, 0.0));
    const double gap = best - mean;
    if (sigma < 1e-12) return std::max(gap, 0.0);
    const double z = gap / sigma;
    return std::max(gap * standard_normal_cdf(z) + sigma * standard_normal_pdf(z), 0.0);
}

template <std::size_t Dim>
double expected_improvement(const GaussianProcess<Dim>& gp, const std::array<double, Dim>& x, double best) {
    const auto post = gp.posterior(x);
    return expected_improvement(post.mean, post.variance, best);
}

} // namespace rfstab
