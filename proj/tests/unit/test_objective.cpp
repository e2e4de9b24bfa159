#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rfstab/objective.hpp"
#include "rfstab/synthetic.hpp"

using namespace rfstab;

namespace {

SplitDataset two_feature_split(Seed seed, std::size_t rows = 800) {
    return prepare_split(generate_synthetic(
        SyntheticSpec{.n_rows = rows, .n_numeric = 2, .n_categorical = 0, .signal_strength = 2.0}, seed));
}

} // namespace

TEST(Loss, PricingExampleWeights) {
    // 1000 * 0.05 + 0.01 * 10 - 5000 * 0.8
    EXPECT_NEAR(loss({5000, 1000, 0.01}, 0.8, 0.05, 10.0), -3949.9, 1e-9);
}

TEST(Loss, ZeroWeights) {
    EXPECT_EQ(loss({0, 0, 0}, 0.7, 0.3, 123.0), 0.0);
}

TEST(Loss, NoOptimisationRow) {
    // 0.112 + 0.01 * 1.572 - 0.760
    EXPECT_NEAR(loss({1, 1, 0.01}, 0.760, 0.112, 1.572), -0.63228, 1e-12);
}

TEST(Loss, RejectsNonFinite) {
    EXPECT_THROW(loss({1, 1, 1}, std::numeric_limits<double>::quiet_NaN(), 0.1, 1.0), EvaluationError);
    EXPECT_THROW(loss({1, 1, 1}, 0.5, std::numeric_limits<double>::infinity(), 1.0), EvaluationError);
}

TEST(Loss, LinearAndMonotone) {
    const LossWeights w{1.5, 2.0, 0.25};
    const double base = loss(w, 0.7, 0.1, 3.0);
    EXPECT_DOUBLE_EQ(loss({3.0, 2.0, 0.25}, 0.7, 0.1, 3.0), base - 1.5 * 0.7);
    EXPECT_GT(loss(w, 0.7, 0.2, 3.0), base);
    EXPECT_GT(loss(w, 0.7, 0.1, 4.0), base);
    EXPECT_LT(loss(w, 0.8, 0.1, 3.0), base);
    EXPECT_NEAR(loss(w, 0.7, 0.1, 3.0) + loss(w, 0.1, 0.3, 1.0), loss(w, 0.8, 0.4, 4.0), 1e-12);
}

TEST(EvaluateParams, LossConsistencyAndRanges) {
    const auto data = two_feature_split(1);
    const LossWeights w{1, 1, 0.01};
    const auto r = evaluate_params(data, ForestParams{.n_trees = 1, .train_proportion = 1.0}, 2, w, 3);
    EXPECT_GE(r.rmspd, 0.0);
    EXPECT_GE(r.auc, 0.0);
    EXPECT_LE(r.auc, 1.0);
    EXPECT_GE(r.runtime, 0.0);
    EXPECT_EQ(r.runs, 2);
    EXPECT_EQ(r.loss, w.beta * r.rmspd + w.gamma * r.runtime - w.alpha * r.auc);
}

TEST(EvaluateParams, DeterministicInModelCostMode) {
    const auto data = two_feature_split(2);
    const ForestParams p{.n_trees = 16, .max_depth = 5, .train_proportion = 0.6};
    const EvaluationOptions opts{.cost_mode = CostMode::model};
    const auto a = evaluate_params(data, p, 3, {1, 1, 0.01}, 77, opts);
    const auto b = evaluate_params(data, p, 3, {1, 1, 0.01}, 77, opts);
    EXPECT_EQ(a.auc, b.auc);
    EXPECT_EQ(a.rmspd, b.rmspd);
    EXPECT_EQ(a.runtime, b.runtime);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_DOUBLE_EQ(a.runtime, training_cost(subsample_size(data.train.size(), 0.6), p) * opts.model_cost_scale);

    EvaluationOptions parallel = opts;
    parallel.threads = 3;
    const auto c = evaluate_params(data, p, 3, {1, 1, 0.01}, 77, parallel);
    EXPECT_EQ(a.loss, c.loss);
}

TEST(EvaluateParams, RmspdMatchesAssembledMatrix) {
    const auto data = two_feature_split(3);
    const ForestParams p{.n_trees = 8, .max_depth = 4, .train_proportion = 0.5};
    const EvaluationOptions opts{.cost_mode = CostMode::model};
    const auto runs = collect_runs(data, p, 4, 5, opts);
    const auto r = evaluate_params(data, p, 4, {1, 1, 0.01}, 5, opts);
    EXPECT_EQ(r.rmspd, rmspd(runs.predictions));
    double mean_auc = 0.0;
    for (double a : runs.aucs) mean_auc += a;
    EXPECT_EQ(r.auc, mean_auc / 4.0);
}

TEST(EvaluateParams, MoreTreesAreMoreStable) {
    const auto data = two_feature_split(4, 2000);
    const EvaluationOptions opts{.cost_mode = CostMode::model};
    const auto few = evaluate_params(data, {.n_trees = 8, .max_depth = 4, .train_proportion = 0.5}, 10, {}, 9, opts);
    const auto many = evaluate_params(data, {.n_trees = 128, .max_depth = 4, .train_proportion = 0.5}, 10, {}, 9, opts);
    EXPECT_LT(many.rmspd, few.rmspd);
}

TEST(EvaluateParams, SharedSeedRunsAreIdentical) {
    const auto data = two_feature_split(5);
    const EvaluationOptions opts{.cost_mode = CostMode::model, .shared_seed = true};
    const auto r = evaluate_params(data, {.n_trees = 4, .train_proportion = 0.5}, 3, {}, 1, opts);
    EXPECT_EQ(r.rmspd, 0.0);
}

TEST(EvaluateParams, Errors) {
    auto data = two_feature_split(6);
    EXPECT_THROW(evaluate_params(data, {}, 1, {}, 0), EvaluationError);
    std::fill(data.validation.labels.begin(), data.validation.labels.end(), 0);
    EXPECT_THROW(evaluate_params(data, {}, 2, {}, 0), EvaluationError);
}
