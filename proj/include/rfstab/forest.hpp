#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfstab/dataset.hpp"
#include "rfstab/error.hpp"
#include "rfstab/matrix.hpp"
#include "rfstab/parallel.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

/// The tuned triple (number of trees, maximum depth, training proportion) plus fixed settings.
struct ForestParams {
    int n_trees = 10;
    std::optional<int> max_depth; ///< nullopt = unlimited
    double train_proportion = 1.0;
    std::optional<std::size_t> features_per_split; ///< nullopt = floor(sqrt(F))
    std::size_t min_samples_leaf = 1;

    void validate() const {
        if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
        if (max_depth && *max_depth < 1) throw ConfigError("max_depth must be >= 1 when bounded");
        if (!(train_proportion > 0.0 && train_proportion <= 1.0)) {
            throw ConfigError("train_proportion must lie in (0, 1]");
        }
        if (features_per_split && *features_per_split == 0) throw ConfigError("features_per_split must be >= 1");
        if (min_samples_leaf == 0) throw ConfigError("min_samples_leaf must be >= 1");
    }

    std::size_t split_features(std::size_t n_features) const {
        const std::size_t k = features_per_split
                                  ? *features_per_split
                                  : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features))));
        return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(1, n_features));
    }

    /// Unlimited depth is bounded by the number of training rows, which no tree can exceed.
    std::size_t depth_bound(std::size_t n_rows) const {
        return max_depth ? static_cast<std::size_t>(*max_depth) : n_rows;
    }

    bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
    std::int32_t feature = -1; ///< -1 marks a leaf
    double threshold = 0.0;    ///< rows with x[feature] <= threshold go left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0; ///< leaf: positive-class probability

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes_[i].value;
    }

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    /// Longest root-to-leaf path, in edges.
    std::size_t max_depth() const {
        if (nodes_.empty()) return 0;
        std::size_t deepest = 0;
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, depth] = stack.back();
            stack.pop_back();
            const auto& n = nodes_[i];
            if (n.is_leaf()) {
                deepest = std::max(deepest, depth);
            } else {
                stack.emplace_back(static_cast<std::size_t>(n.left), depth + 1);
                stack.emplace_back(static_cast<std::size_t>(n.right), depth + 1);
            }
        }
        return deepest;
    }

    bool operator==(const DecisionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
};

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::vector<DecisionTree> trees, ForestParams params, Seed seed, std::size_t n_features)
        : trees_(std::move(trees)), params_(std::move(params)), seed_(seed), n_features_(n_features) {}

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const ForestParams& params() const noexcept { return params_; }
    Seed seed() const noexcept { return seed_; }
    std::size_t n_features() const noexcept { return n_features_; }

    bool operator==(const RandomForest&) const = default;

private:
    std::vector<DecisionTree> trees_;
    ForestParams params_;
    Seed seed_ = 0;
    std::size_t n_features_ = 0;
};

/// Bootstrap multiplicities: n draws with replacement from n rows.
inline std::vector<double> draw_bootstrap(std::size_t n, Engine& rng) {
    std::vector<double> counts(n, 0.0);
    if (n == 0) return counts;
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) counts[draw(rng)] += 1.0;
    return counts;
}

/// The bootstrap used by tree `tree_index` of a forest trained with `forest_seed`.
inline std::vector<double> tree_bootstrap(std::size_t n, Seed forest_seed, std::size_t tree_index) {
    Engine rng = make_engine(derive_seed(forest_seed, Stream::tree, tree_index));
    return draw_bootstrap(n, rng);
}

namespace detail {

/// Row order of the full training set sorted by each feature; shared by all trees of a forest.
inline std::vector<std::vector<std::uint32_t>> presort_features(const Matrix& x) {
    std::vector<std::vector<std::uint32_t>> order(x.cols());
    for (std::size_t f = 0; f < x.cols(); ++f) {
        auto& o = order[f];
        o.resize(x.rows());
        std::iota(o.begin(), o.end(), 0u);
        std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
    return order;
}

/// Grows one CART tree on bootstrap weights. Each feature keeps its own sorted view of the
/// in-bag rows; a split partitions every view stably so node ranges stay sorted.
class TreeGrower {
public:
    TreeGrower(const EncodedDataset& data, const std::vector<std::vector<std::uint32_t>>& presorted,
               const ForestParams& params, Seed tree_seed)
        : x_(data.features), y_(data.labels), rng_(make_engine(tree_seed)) {
        const std::size_t n = data.size();
        n_features_ = x_.cols();
        mtry_ = params.split_features(n_features_);
        depth_bound_ = params.depth_bound(n);
        min_leaf_ = static_cast<double>(params.min_samples_leaf);

        weight_ = draw_bootstrap(n, rng_);

        for (std::size_t r = 0; r < n; ++r) in_bag_ += weight_[r] > 0.0 ? 1 : 0;
        order_.resize(n_features_ * in_bag_);
        for (std::size_t f = 0; f < n_features_; ++f) {
            auto* dst = order_.data() + f * in_bag_;
            for (std::uint32_t r : presorted[f]) {
                if (weight_[r] > 0.0) *dst++ = r;
            }
        }
        if (n_features_ == 0) {
            // No features: a single leaf over the in-bag rows.
            order_.resize(in_bag_);
            std::size_t k = 0;
            for (std::uint32_t r = 0; r < n; ++r) {
                if (weight_[r] > 0.0) order_[k++] = r;
            }
        }
        goes_left_.assign(n, 0);
        scratch_.resize(in_bag_);
        feature_pool_.resize(n_features_);
    }

    DecisionTree grow() {
        nodes_.clear();
        build(0, in_bag_, 0);
        return DecisionTree(std::move(nodes_));
    }

private:
    struct Split {
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = -1.0;
    };

    std::uint32_t* view(std::size_t f) { return order_.data() + f * in_bag_; }

    std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
        const auto index = static_cast<std::int32_t>(nodes_.size());
        nodes_.emplace_back();

        double total = 0.0;
        double positive = 0.0;
        const std::uint32_t* rows = view(0);
        for (std::size_t i = begin; i < end; ++i) {
            total += weight_[rows[i]];
            positive += weight_[rows[i]] * y_[rows[i]];
        }
        nodes_[index].value = positive / total;

        const bool pure = positive == 0.0 || positive == total;
        if (pure || depth >= depth_bound_ || total < 2.0 * min_leaf_ || n_features_ == 0) return index;

        const auto best = find_split(begin, end, total, positive);
        if (!best) return index;

        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint32_t r = rows[i];
            goes_left_[r] = x_(r, best->feature) <= best->threshold ? 1 : 0;
            n_left += goes_left_[r];
        }
        for (std::size_t f = 0; f < n_features_; ++f) {
            std::uint32_t* v = view(f);
            std::size_t l = begin;
            std::size_t rcount = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left_[v[i]]) {
                    v[l++] = v[i];
                } else {
                    scratch_[rcount++] = v[i];
                }
            }
            std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(rcount), v + l);
        }

        nodes_[index].feature = static_cast<std::int32_t>(best->feature);
        nodes_[index].threshold = best->threshold;
        const std::size_t mid = begin + n_left;
        const auto left = build(begin, mid, depth + 1);
        const auto right = build(mid, end, depth + 1);
        nodes_[index].left = left;
        nodes_[index].right = right;
        return index;
    }

    // Samples features without replacement until mtry non-constant ones are found, then
    // evaluates them in index order; strict improvement keeps the lowest feature and threshold on ties.
    std::optional<Split> find_split(std::size_t begin, std::size_t end, double total, double positive) {
        std::iota(feature_pool_.begin(), feature_pool_.end(), std::size_t{0});
        std::vector<std::size_t> candidates;
        candidates.reserve(mtry_);
        for (std::size_t k = 0; k < n_features_ && candidates.size() < mtry_; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, n_features_ - 1);
            std::swap(feature_pool_[k], feature_pool_[pick(rng_)]);
            const std::size_t f = feature_pool_[k];
            const std::uint32_t* v = view(f);
            if (x_(v[begin], f) < x_(v[end - 1], f)) candidates.push_back(f);
        }
        std::sort(candidates.begin(), candidates.end());

        std::optional<Split> best;
        const double negative = total - positive;
        for (std::size_t f : candidates) {
            const std::uint32_t* v = view(f);
            double wl = 0.0;
            double pl = 0.0;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                const std::uint32_t r = v[i];
                wl += weight_[r];
                pl += weight_[r] * y_[r];
                const double a = x_(r, f);
                const double b = x_(v[i + 1], f);
                if (!(a < b)) continue;
                const double wr = total - wl;
                if (wl < min_leaf_ || wr < min_leaf_) continue;
                const double nl = wl - pl;
                const double pr = positive - pl;
                const double nr = negative - nl;
                const double score = (pl * pl + nl * nl) / wl + (pr * pr + nr * nr) / wr;
                if (!best || score > best->score) {
                    double threshold = std::midpoint(a, b);
                    if (!(threshold < b)) threshold = a;
                    best = Split{f, threshold, score};
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const std::vector<int>& y_;
    Engine rng_;
    std::size_t n_features_ = 0;
    std::size_t mtry_ = 1;
    std::size_t depth_bound_ = 0;
    double min_leaf_ = 1.0;
    std::size_t in_bag_ = 0;
    std::vector<double> weight_;
    std::vector<std::uint32_t> order_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::size_t> feature_pool_;
    std::vector<TreeNode> nodes_;
};

} // namespace detail

/// Trains `params.n_trees` trees, each on its own bootstrap resample. Tree t draws from a stream
/// derived from (seed, t), so the forest is identical for any `threads`.
inline RandomForest train_forest(const EncodedDataset& train, const ForestParams& params, Seed seed,
                                 std::size_t threads = 1) {
    params.validate();
    if (train.size() == 0) throw DataError("train_forest: empty training data");
    if (train.features.rows() != train.size()) throw DataError("train_forest: feature/label row mismatch");

    const auto presorted = detail::presort_features(train.features);
    std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
    parallel_for(trees.size(), threads, [&](std::size_t t) {
        detail::TreeGrower grower(train, presorted, params, derive_seed(seed, Stream::tree, t));
        trees[t] = grower.grow();
    });
    return RandomForest(std::move(trees), params, seed, train.n_features());
}

/// Mean leaf probability over trees for every row of `features`.
inline std::vector<double> predict_proba(const RandomForest& forest, const Matrix& features) {
    if (features.cols() != forest.n_features()) {
        throw DataError("predict_proba: expected " + std::to_string(forest.n_features()) + " features, got " +
                        std::to_string(features.cols()));
    }
    std::vector<double> out(features.rows(), 0.0);
    const auto n_trees = static_cast<double>(forest.trees().size());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        double sum = 0.0;
        for (const auto& tree : forest.trees()) sum += tree.predict(row);
        out[r] = sum / n_trees;
    }
    return out;
}

/// Analytic training cost in model units:
/// n_trees * n * log2(n + 1) * min(max_depth, log2(n + 1)).
inline double training_cost(std::size_t train_size, const ForestParams& params) {
    if (train_size == 0) throw DataError("training_cost: train_size must be >= 1");
    const double n = static_cast<double>(train_size);
    const double log_n = std::log2(n + 1.0);
    const double depth = static_cast<double>(params.depth_bound(train_size));
    return static_cast<double>(params.n_trees) * n * log_n * std::min(depth, log_n);
}

} // namespace rfstab
