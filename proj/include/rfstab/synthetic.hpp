#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "rfstab/dataset.hpp"
#include "rfstab/error.hpp"
#include "rfstab/random.hpp"

namespace rfstab {

struct SyntheticSpec {
    std::size_t n_rows = 4000;
    std::size_t n_numeric = 8;
    std::size_t n_categorical = 2;
    /// Logistic slope on the standardised linear score; 0 makes labels independent of features.
    double signal_strength = 1.0;
    std::size_t levels = 4;

    void validate() const {
        if (n_rows < 20) throw ConfigError("synthetic: n_rows must be >= 20");
        if (n_numeric + n_categorical == 0) throw ConfigError("synthetic: need at least one feature");
        if (n_categorical > 0 && levels < 2) throw ConfigError("synthetic: categorical levels must be >= 2");
        if (!std::isfinite(signal_strength) || signal_strength < 0.0) {
            throw ConfigError("synthetic: signal_strength must be finite and >= 0");
        }
    }

    bool operator==(const SyntheticSpec&) const = default;
};

/// Tabular data with labels drawn from a logistic model over a random subset of the features.
/// Numeric columns are N(0,1); categorical columns are uniform over `levels` values.
inline TabularDataset generate_synthetic(const SyntheticSpec& spec, Seed seed) {
    spec.validate();
    Engine rng = make_engine(derive_seed(seed, Stream::synthetic));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> level(0, spec.levels > 0 ? spec.levels - 1 : 0);

    const std::size_t n_features = spec.n_numeric + spec.n_categorical;
    std::vector<bool> informative(n_features);
    bool any = false;
    for (std::size_t f = 0; f < n_features; ++f) {
        informative[f] = unit(rng) < 0.5;
        any = any || informative[f];
    }
    if (!any) informative[0] = true;

    std::vector<double> slope(spec.n_numeric);
    for (auto& w : slope) w = normal(rng);
    std::vector<std::vector<double>> effect(spec.n_categorical, std::vector<double>(spec.levels));
    for (auto& col : effect) {
        for (auto& e : col) e = normal(rng);
    }

    TabularDataset data;
    for (std::size_t f = 0; f < spec.n_numeric; ++f) data.columns.push_back({"x" + std::to_string(f), ColumnKind::numeric});
    for (std::size_t f = 0; f < spec.n_categorical; ++f) {
        data.columns.push_back({"c" + std::to_string(f), ColumnKind::categorical});
    }
    data.columns.push_back({"y", ColumnKind::label});
    data.label_index = n_features;

    std::vector<double> score(spec.n_rows, 0.0);
    data.rows.reserve(spec.n_rows);
    for (std::size_t r = 0; r < spec.n_rows; ++r) {
        std::vector<Cell> row(n_features + 1);
        for (std::size_t f = 0; f < spec.n_numeric; ++f) {
            const double v = normal(rng);
            row[f] = v;
            if (informative[f]) score[r] += slope[f] * v;
        }
        for (std::size_t f = 0; f < spec.n_categorical; ++f) {
            const std::size_t l = level(rng);
            row[spec.n_numeric + f] = "L" + std::to_string(l);
            if (informative[spec.n_numeric + f]) score[r] += effect[f][l];
        }
        data.rows.push_back(std::move(row));
    }

    double mean = 0.0;
    for (double s : score) mean += s;
    mean /= static_cast<double>(spec.n_rows);
    double ss = 0.0;
    for (double s : score) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / static_cast<double>(spec.n_rows));
    for (double& s : score) s = sd > 0.0 ? (s - mean) / sd : 0.0;

    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Engine label_rng = make_engine(derive_seed(seed, Stream::labels, attempt));
        data.labels.assign(spec.n_rows, 0);
        std::size_t positives = 0;
        for (std::size_t r = 0; r < spec.n_rows; ++r) {
            const double prob = 1.0 / (1.0 + std::exp(-spec.signal_strength * score[r]));
            data.labels[r] = unit(label_rng) < prob ? 1 : 0;
            positives += static_cast<std::size_t>(data.labels[r]);
        }
        if (positives > 0 && positives < spec.n_rows) {
            for (std::size_t r = 0; r < spec.n_rows; ++r) data.rows[r][n_features] = data.labels[r] ? "1" : "0";
            data.validate();
            return data;
        }
    }
    throw DataError("synthetic: could not draw labels containing both classes after 100 attempts");
}

} // namespace rfstab
