#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rfstab/gaussian_process.hpp"

using namespace rfstab;

using GP3 = GaussianProcess<3>;
using P3 = GP3::Point;

TEST(Surrogate, EmptyIsPrior) {
    const GP3 gp = GP3::fit({});
    const auto post = gp.posterior({0.2, 0.4, 0.6});
    EXPECT_EQ(post.mean, 0.0);
    EXPECT_EQ(post.variance, gp.kernel().signal_variance);
}

TEST(Surrogate, SingleObservation) {
    const GP3 gp = GP3::fit({{P3{0.5, 0.5, 0.5}, 3.25}});
    EXPECT_DOUBLE_EQ(gp.raw_mean({0.5, 0.5, 0.5}), 3.25);
    EXPECT_NEAR(gp.raw_mean({0.0, 1.0, 0.0}), 3.25, 1e-12);
}

TEST(Surrogate, DuplicatePointsAreMerged) {
    const GP3 gp = GP3::fit({{P3{0.1, 0.2, 0.3}, 0.0}, {P3{0.1, 0.2, 0.3}, 1.0}});
    ASSERT_EQ(gp.points().size(), 1u);
    EXPECT_DOUBLE_EQ(gp.raw_values()[0], 0.5);
    EXPECT_DOUBLE_EQ(gp.raw_mean({0.1, 0.2, 0.3}), 0.5);
}

TEST(Surrogate, InterpolatesNoiselessLinearFunction) {
    std::vector<std::pair<P3, double>> obs;
    for (int i = 0; i < 5; ++i) {
        const double x = i / 4.0;
        obs.push_back({P3{x, 0.5, 0.5}, x});
    }
    SurrogateFitOptions opts;
    opts.fixed_noise = 1e-6;
    const GP3 gp = GP3::fit(obs, opts);
    for (const auto& [x, y] : obs) {
        EXPECT_NEAR(gp.raw_mean(x), y, 1e-4);
        EXPECT_NEAR(gp.posterior(x).mean, gp.standardise(y), 1e-4);
        EXPECT_LE(gp.posterior(x).variance, 1e-6);
    }
}

TEST(Surrogate, KernelMatrixSymmetricAndVarianceBounded) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::pair<P3, double>> obs;
        const int n = 2 + trial % 10;
        for (int i = 0; i < n; ++i) obs.push_back({P3{u(rng), u(rng), u(rng)}, std::sin(7 * u(rng))});
        SurrogateFitOptions opts;
        opts.seed = static_cast<Seed>(trial);
        const GP3 gp = GP3::fit(obs, opts);
        const auto k = gp.kernel_matrix();
        EXPECT_EQ((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
        const double cap = gp.kernel().signal_variance + gp.noise_variance();
        for (int q = 0; q < 50; ++q) {
            const auto post = gp.posterior({u(rng), u(rng), u(rng)});
            EXPECT_GE(post.variance, 0.0);
            EXPECT_LE(post.variance, cap);
        }
    }
}

TEST(Surrogate, HyperparametersWithinBounds) {
    std::vector<std::pair<P3, double>> obs;
    for (int i = 0; i < 8; ++i) obs.push_back({P3{i / 7.0, (i * 3 % 8) / 7.0, 0.5}, (i % 3) * 0.7});
    const GP3 gp = GP3::fit(obs);
    const KernelBounds b;
    for (double l : gp.kernel().length_scales) {
        EXPECT_GE(l, b.length_lo * (1 - 1e-12));
        EXPECT_LE(l, b.length_hi * (1 + 1e-12));
    }
    EXPECT_GE(gp.kernel().signal_variance, b.signal_lo * (1 - 1e-12));
    EXPECT_LE(gp.kernel().signal_variance, b.signal_hi * (1 + 1e-12));
    EXPECT_GE(gp.noise_variance(), b.noise_lo * (1 - 1e-12));
}

TEST(ExpectedImprovement, ClosedFormCases) {
    EXPECT_EQ(expected_improvement(0.3, 0.0, 0.3), 0.0);
    EXPECT_EQ(expected_improvement(-0.7, 0.0, 0.3), 1.0);
    EXPECT_NEAR(expected_improvement(0.0, 1.0, 0.0), 0.3989422804014327, 1e-15);
}

TEST(ExpectedImprovement, MatchesMonteCarlo) {
    std::mt19937_64 rng(3);
    for (auto [mu, sigma, best] : {std::tuple{0.0, 1.0, 0.0}, {0.5, 0.3, 0.2}, {-1.0, 2.0, 0.5}}) {
        std::normal_distribution<double> y(mu, sigma);
        const int n = 400000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = std::max(best - y(rng), 0.0);
            sum += g;
            sum2 += g * g;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);
        EXPECT_NEAR(expected_improvement(mu, sigma * sigma, best), mean, 4 * se);
    }
}

TEST(ExpectedImprovement, NonNegativeAndVanishing) {
    for (double mu = -2.0; mu <= 2.0; mu += 0.25) {
        for (double var : {0.0, 1e-12, 1e-4, 0.1, 1.0, 4.0}) EXPECT_GE(expected_improvement(mu, var, 0.0), 0.0);
    }
    double prev = expected_improvement(0.1, 1.0, 0.0);
    for (double var = 0.5; var > 1e-14; var /= 4) {
        const double e = expected_improvement(0.1, var, 0.0);
        EXPECT_LE(e, prev);
        prev = e;
    }
    EXPECT_LT(prev, 1e-12);
}
