#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfstab/bayesopt.hpp"
#include "rfstab/error.hpp"
#include "rfstab/forest.hpp"
#include "rfstab/metrics.hpp"
#include "rfstab/objective.hpp"

namespace rfstab {

using Json = nlohmann::ordered_json;

inline constexpr int kForestFormatVersion = 1;

inline Json to_json(const ForestParams& p) {
    Json j;
    j["n_trees"] = p.n_trees;
    j["max_depth"] = p.max_depth ? Json(*p.max_depth) : Json(nullptr);
    j["train_proportion"] = p.train_proportion;
    j["features_per_split"] = p.features_per_split ? Json(*p.features_per_split) : Json(nullptr);
    j["min_samples_leaf"] = p.min_samples_leaf;
    return j;
}

inline ForestParams forest_params_from_json(const Json& j) {
    try {
        ForestParams p;
        p.n_trees = j.at("n_trees").get<int>();
        if (j.contains("max_depth") && !j["max_depth"].is_null()) p.max_depth = j["max_depth"].get<int>();
        p.train_proportion = j.at("train_proportion").get<double>();
        if (j.contains("features_per_split") && !j["features_per_split"].is_null()) {
            p.features_per_split = j["features_per_split"].get<std::size_t>();
        }
        if (j.contains("min_samples_leaf")) p.min_samples_leaf = j["min_samples_leaf"].get<std::size_t>();
        p.validate();
        return p;
    } catch (const Json::exception& e) {
        throw DataError(std::string("forest params: ") + e.what());
    }
}

/// Trees as arrays of node records [feature, threshold, left, right, value].
inline Json to_json(const RandomForest& forest) {
    Json j;
    j["format_version"] = kForestFormatVersion;
    j["seed"] = forest.seed();
    j["n_features"] = forest.n_features();
    j["params"] = to_json(forest.params());
    Json trees = Json::array();
    for (const auto& tree : forest.trees()) {
        Json nodes = Json::array();
        for (const auto& n : tree.nodes()) nodes.push_back(Json::array({n.feature, n.threshold, n.left, n.right, n.value}));
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j;
}

inline RandomForest forest_from_json(const Json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kForestFormatVersion) {
            throw DataError("unsupported forest format_version " + std::to_string(version));
        }
        std::vector<DecisionTree> trees;
        for (const auto& t : j.at("trees")) {
            std::vector<TreeNode> nodes;
            for (const auto& rec : t) {
                TreeNode n;
                n.feature = rec.at(0).get<std::int32_t>();
                n.threshold = rec.at(1).get<double>();
                n.left = rec.at(2).get<std::int32_t>();
                n.right = rec.at(3).get<std::int32_t>();
                n.value = rec.at(4).get<double>();
                nodes.push_back(n);
            }
            const auto size = static_cast<std::int32_t>(nodes.size());
            if (nodes.empty()) throw DataError("forest: empty tree");
            for (const auto& n : nodes) {
                if (!n.is_leaf() && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size)) {
                    throw DataError("forest: child index out of range");
                }
            }
            trees.emplace_back(std::move(nodes));
        }
        return RandomForest(std::move(trees), forest_params_from_json(j.at("params")), j.at("seed").get<Seed>(),
                            j.at("n_features").get<std::size_t>());
    } catch (const Json::exception& e) {
        throw DataError(std::string("forest: ") + e.what());
    }
}

inline Json to_json(const StabilityReport& r) {
    return Json{{"mspd", r.mspd}, {"rmspd", r.rmspd}, {"mean_variance", r.mean_variance}, {"upper_bound", r.upper_bound}};
}

inline Json to_json(const EvaluationResult& r) {
    Json j;
    j["auc"] = r.auc;
    j["rmspd"] = r.rmspd;
    j["runtime_seconds"] = r.runtime;
    j["loss"] = r.loss;
    j["n_trees"] = r.params.n_trees;
    j["max_depth"] = r.params.max_depth ? Json(*r.params.max_depth) : Json(nullptr);
    j["train_proportion"] = r.params.train_proportion;
    j["runs"] = r.runs;
    return j;
}

inline Json to_json(const Observation& o) {
    Json j;
    j["point"] = Json::array({o.point[0], o.point[1], o.point[2]});
    j["n_trees"] = o.params.n_trees;
    j["max_depth"] = o.params.max_depth ? Json(*o.params.max_depth) : Json(nullptr);
    j["train_proportion"] = o.params.train_proportion;
    j["value"] = o.value;
    j["failed"] = o.failed;
    if (o.failed) {
        j["error"] = o.error;
    } else {
        j["auc"] = o.result.auc;
        j["rmspd"] = o.result.rmspd;
        j["runtime_seconds"] = o.result.runtime;
    }
    return j;
}

inline Json to_json(const std::vector<Observation>& trace) {
    Json arr = Json::array();
    for (const auto& o : trace) arr.push_back(to_json(o));
    return arr;
}

} // namespace rfstab
