#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfstab/bayesopt.hpp"
#include "rfstab/dataset.hpp"
#include "rfstab/error.hpp"
#include "rfstab/format.hpp"
#include "rfstab/metrics.hpp"
#include "rfstab/objective.hpp"
#include "rfstab/parallel.hpp"
#include "rfstab/serialization.hpp"
#include "rfstab/synthetic.hpp"

namespace rfstab {

struct DatasetConfig {
    std::string path;
    std::string label = "y";
    std::vector<std::string> categorical;
    std::optional<std::string> positive_label;
};

struct StabilityConfig {
    std::vector<int> n_trees{8, 32, 128};
    int max_depth = 10;
    double train_proportion = 1.0;
    int runs = 10;
    int bins = 64;
    bool shared_seed = false;
};

struct SweepConfig {
    std::vector<int> n_trees{8, 16, 32, 64, 128};
    std::vector<int> max_depth{2, 4, 6, 8, 10};
    double train_proportion = 0.5;
    int repetitions = 5;
};

struct RunConfig {
    std::optional<DatasetConfig> dataset; ///< absent: synthetic data
    SyntheticSpec synthetic;
    std::optional<Seed> synthetic_seed; ///< absent: the master seed
    std::vector<LossWeights> weights{LossWeights{}};
    ParameterSpace space;
    int runs = 5;
    int n_init = 5;
    int iterations = 20;
    std::optional<Seed> seed;
    CostMode cost_mode = CostMode::wall_clock;
    double model_cost_scale = 1e-8;
    std::size_t threads = 1;
    std::string output_dir = "out";
    StabilityConfig stability;
    SweepConfig sweep;

    Seed master_seed() const {
        if (!seed) throw ConfigError("seed is mandatory (config \"seed\" or --seed)");
        return *seed;
    }

    void validate() const {
        master_seed();
        if (!dataset) synthetic.validate();
        if (dataset && dataset->path.empty()) throw ConfigError("dataset.path must not be empty");
        if (weights.empty()) throw ConfigError("at least one weight setting is required");
        for (const auto& w : weights) w.validate();
        space.validate();
        space.base.validate();
        if (runs < 2) throw ConfigError("runs must be >= 2");
        if (n_init < 1) throw ConfigError("n_init must be >= 1");
        if (iterations < 0) throw ConfigError("iterations must be >= 0");
        if (!std::isfinite(model_cost_scale) || model_cost_scale <= 0.0) {
            throw ConfigError("model_cost_scale must be finite and > 0");
        }
        if (threads < 1) throw ConfigError("threads must be >= 1");
        if (stability.n_trees.empty()) throw ConfigError("stability.n_trees must not be empty");
        for (int t : stability.n_trees) {
            if (t < 1) throw ConfigError("stability.n_trees entries must be >= 1");
        }
        if (stability.max_depth < 1) throw ConfigError("stability.max_depth must be >= 1");
        if (!(stability.train_proportion > 0.0 && stability.train_proportion <= 1.0)) {
            throw ConfigError("stability.train_proportion must lie in (0, 1]");
        }
        if (stability.runs < 2) throw ConfigError("stability.runs must be >= 2");
        if (stability.bins < 1) throw ConfigError("stability.bins must be >= 1");
        if (sweep.n_trees.empty() || sweep.max_depth.empty()) throw ConfigError("sweep grid must not be empty");
        for (int t : sweep.n_trees) {
            if (t < 1) throw ConfigError("sweep.n_trees entries must be >= 1");
        }
        for (int d : sweep.max_depth) {
            if (d < 1) throw ConfigError("sweep.max_depth entries must be >= 1");
        }
        if (!(sweep.train_proportion > 0.0 && sweep.train_proportion <= 1.0)) {
            throw ConfigError("sweep.train_proportion must lie in (0, 1]");
        }
        if (sweep.repetitions < 2) throw ConfigError("sweep.repetitions must be >= 2");
    }

    EvaluationOptions evaluation_options() const {
        return {.cost_mode = cost_mode, .model_cost_scale = model_cost_scale, .threads = threads};
    }

    /// Common evaluation seed: every setting sees the same subsamples and forest streams.
    Seed evaluation_seed() const { return derive_seed(master_seed(), Stream::evaluation); }
};

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw ConfigError("unknown key \"" + key + "\" in " + where);
        }
    }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

inline IntRange read_int_range(const Json& j, const char* key, IntRange fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
        throw ConfigError(std::string("space.") + key + " must be [lo, hi] integers");
    }
    return {v[0].get<int>(), v[1].get<int>()};
}

inline RealRange read_real_range(const Json& j, const char* key, RealRange fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(std::string("space.") + key + " must be [lo, hi] numbers");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

inline CostMode parse_cost_mode(const std::string& s) {
    if (s == "wall") return CostMode::wall_clock;
    if (s == "model") return CostMode::model;
    throw ConfigError("cost_mode must be \"wall\" or \"model\", got \"" + s + "\"");
}

} // namespace detail

inline CostMode parse_cost_mode(const std::string& s) { return detail::parse_cost_mode(s); }

/// Relative dataset paths resolve against `base_dir` (the config file's directory).
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = {}) {
    using detail::read;
    detail::reject_unknown(j,
                           {"dataset", "synthetic", "weights", "space", "runs", "n_init", "iterations", "seed",
                            "cost_mode", "model_cost_scale", "threads", "output_dir", "stability", "sweep"},
                           "config");
    RunConfig c;
    if (j.contains("dataset") && j.contains("synthetic")) {
        throw ConfigError("config: give either \"dataset\" or \"synthetic\", not both");
    }
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        detail::reject_unknown(d, {"path", "label", "categorical", "positive_label"}, "dataset");
        DatasetConfig ds;
        read(d, "path", ds.path, "dataset");
        read(d, "label", ds.label, "dataset");
        read(d, "categorical", ds.categorical, "dataset");
        if (d.contains("positive_label")) {
            std::string pl;
            read(d, "positive_label", pl, "dataset");
            ds.positive_label = pl;
        }
        if (!ds.path.empty() && std::filesystem::path(ds.path).is_relative() && !base_dir.empty()) {
            ds.path = (base_dir / ds.path).string();
        }
        c.dataset = ds;
    }
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        detail::reject_unknown(s, {"n_rows", "n_numeric", "n_categorical", "signal_strength", "levels", "seed"},
                               "synthetic");
        read(s, "n_rows", c.synthetic.n_rows, "synthetic");
        read(s, "n_numeric", c.synthetic.n_numeric, "synthetic");
        read(s, "n_categorical", c.synthetic.n_categorical, "synthetic");
        read(s, "signal_strength", c.synthetic.signal_strength, "synthetic");
        read(s, "levels", c.synthetic.levels, "synthetic");
        if (s.contains("seed")) {
            Seed v = 0;
            read(s, "seed", v, "synthetic");
            c.synthetic_seed = v;
        }
    }
    if (j.contains("weights")) {
        const auto& ws = j["weights"];
        if (!ws.is_array()) throw ConfigError("weights must be an array");
        c.weights.clear();
        for (const auto& w : ws) {
            detail::reject_unknown(w, {"alpha", "beta", "gamma"}, "weights[]");
            LossWeights lw;
            read(w, "alpha", lw.alpha, "weights[]");
            read(w, "beta", lw.beta, "weights[]");
            read(w, "gamma", lw.gamma, "weights[]");
            c.weights.push_back(lw);
        }
    }
    if (j.contains("space")) {
        const auto& s = j["space"];
        detail::reject_unknown(s, {"n_trees", "max_depth", "train_proportion", "features_per_split", "min_samples_leaf"},
                               "space");
        c.space.n_trees = detail::read_int_range(s, "n_trees", c.space.n_trees);
        c.space.max_depth = detail::read_int_range(s, "max_depth", c.space.max_depth);
        c.space.train_proportion = detail::read_real_range(s, "train_proportion", c.space.train_proportion);
        if (s.contains("features_per_split") && !s["features_per_split"].is_null()) {
            std::size_t k = 0;
            read(s, "features_per_split", k, "space");
            c.space.base.features_per_split = k;
        }
        read(s, "min_samples_leaf", c.space.base.min_samples_leaf, "space");
    }
    read(j, "runs", c.runs, "config");
    read(j, "n_init", c.n_init, "config");
    read(j, "iterations", c.iterations, "config");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
        c.seed = j["seed"].get<Seed>();
    }
    if (j.contains("cost_mode")) {
        std::string m;
        read(j, "cost_mode", m, "config");
        c.cost_mode = detail::parse_cost_mode(m);
    }
    read(j, "model_cost_scale", c.model_cost_scale, "config");
    read(j, "threads", c.threads, "config");
    read(j, "output_dir", c.output_dir, "config");
    if (j.contains("stability")) {
        const auto& s = j["stability"];
        detail::reject_unknown(s, {"n_trees", "max_depth", "train_proportion", "runs", "bins", "shared_seed"},
                               "stability");
        read(s, "n_trees", c.stability.n_trees, "stability");
        read(s, "max_depth", c.stability.max_depth, "stability");
        read(s, "train_proportion", c.stability.train_proportion, "stability");
        read(s, "runs", c.stability.runs, "stability");
        read(s, "bins", c.stability.bins, "stability");
        read(s, "shared_seed", c.stability.shared_seed, "stability");
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        detail::reject_unknown(s, {"n_trees", "max_depth", "train_proportion", "repetitions"}, "sweep");
        read(s, "n_trees", c.sweep.n_trees, "sweep");
        read(s, "max_depth", c.sweep.max_depth, "sweep");
        read(s, "train_proportion", c.sweep.train_proportion, "sweep");
        read(s, "repetitions", c.sweep.repetitions, "sweep");
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j, path.parent_path());
}

inline TabularDataset load_dataset(const RunConfig& config) {
    if (config.dataset) {
        const auto& d = config.dataset.value();
        return load_csv(d.path, d.label, {d.categorical.begin(), d.categorical.end()}, CsvOptions{.positive_label = d.positive_label});
    }
    return generate_synthetic(config.synthetic, config.synthetic_seed.value_or(config.master_seed()));
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

inline std::filesystem::path prepare_output(const RunConfig& config) {
    const std::filesystem::path dir(config.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

inline std::string depth_text(const std::optional<int>& d) { return d ? std::to_string(*d) : "unlimited"; }

} // namespace detail

// ---- generate ----

inline std::filesystem::path cmd_generate(const RunConfig& config) {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const TabularDataset data = load_dataset(config);
    std::ostringstream os;
    write_csv(data, os);
    const auto path = dir / "synthetic.csv";
    detail::write_text(path, os.str());
    return path;
}

// ---- stability ----

/// Counts of pairwise prediction deltas p_j - p_k (j < k) in equal-width bins over [-1, 1].
struct DeltaHistogram {
    std::vector<std::uint64_t> counts;
    double mean_delta = 0.0;
    std::uint64_t total = 0;

    double bin_lo(std::size_t b) const { return -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(counts.size()); }
    double bin_hi(std::size_t b) const { return bin_lo(b + 1); }
};

inline DeltaHistogram delta_histogram(const PredictionMatrix& preds, int bins) {
    if (bins < 1) throw ConfigError("histogram needs at least one bin");
    DeltaHistogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    long double sum = 0.0L;
    for (std::size_t j = 0; j < preds.runs(); ++j) {
        for (std::size_t k = j + 1; k < preds.runs(); ++k) {
            for (std::size_t i = 0; i < preds.points(); ++i) {
                const double d = preds(j, i) - preds(k, i);
                auto b = static_cast<std::int64_t>(std::floor((d + 1.0) * 0.5 * bins));
                b = std::clamp<std::int64_t>(b, 0, bins - 1);
                ++h.counts[static_cast<std::size_t>(b)];
                sum += d;
                ++h.total;
            }
        }
    }
    h.mean_delta = h.total ? static_cast<double>(sum / static_cast<long double>(h.total)) : 0.0;
    return h;
}

struct StabilityRow {
    int n_trees = 0;
    StabilityReport report;
    double auc = 0.0;
    DeltaHistogram histogram;
};

inline std::vector<StabilityRow> run_stability(const RunConfig& config, const SplitDataset& split) {
    const auto& s = config.stability;
    EvaluationOptions opts = config.evaluation_options();
    opts.shared_seed = s.shared_seed;
    std::vector<StabilityRow> rows;
    for (int nt : s.n_trees) {
        ForestParams p = config.space.base;
        p.n_trees = nt;
        p.max_depth = s.max_depth;
        p.train_proportion = s.train_proportion;
        const RunSet set = collect_runs(split, p, s.runs, config.evaluation_seed(), opts);
        StabilityRow row;
        row.n_trees = nt;
        row.report = stability_report(set.predictions);
        row.auc = std::accumulate(set.aucs.begin(), set.aucs.end(), 0.0) / static_cast<double>(set.aucs.size());
        row.histogram = delta_histogram(set.predictions, s.bins);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<StabilityRow> cmd_stability(const RunConfig& config) {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const auto rows = run_stability(config, prepare_split(load_dataset(config)));

    Json report;
    report["command"] = "stability";
    report["seed"] = config.master_seed();
    report["max_depth"] = config.stability.max_depth;
    report["train_proportion"] = config.stability.train_proportion;
    report["runs"] = config.stability.runs;
    Json settings = Json::array();
    std::ostringstream csv;
    csv << "n_trees,auc,mspd,rmspd,mean_variance,upper_bound,mean_delta,deltas\n";
    for (const auto& r : rows) {
        Json e;
        e["n_trees"] = r.n_trees;
        e["auc"] = r.auc;
        e["stability"] = to_json(r.report);
        e["mean_delta"] = r.histogram.mean_delta;
        e["deltas"] = r.histogram.total;
        settings.push_back(std::move(e));
        csv << r.n_trees << ',' << format_double(r.auc) << ',' << format_double(r.report.mspd) << ','
            << format_double(r.report.rmspd) << ',' << format_double(r.report.mean_variance) << ','
            << format_double(r.report.upper_bound) << ',' << format_double(r.histogram.mean_delta) << ','
            << r.histogram.total << '\n';

        std::ostringstream h;
        h << "bin_lo,bin_hi,count\n";
        for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
            h << format_double(r.histogram.bin_lo(b)) << ',' << format_double(r.histogram.bin_hi(b)) << ','
              << r.histogram.counts[b] << '\n';
        }
        detail::write_text(dir / ("histogram_" + std::to_string(r.n_trees) + ".csv"), h.str());
    }
    report["settings"] = std::move(settings);
    detail::write_text(dir / "report.json", report.dump(2) + "\n");
    detail::write_text(dir / "report.csv", csv.str());
    return rows;
}

// ---- sweep ----

struct SweepCell {
    int n_trees = 0;
    int max_depth = 0;
    bool failed = false;
    std::string error;
    EvaluationResult result; ///< loss computed under the first weight setting
    std::vector<double> losses; ///< one per weight setting
};

struct GridIndex {
    std::size_t depth = 0; ///< row
    std::size_t trees = 0; ///< column
    bool operator==(const GridIndex&) const = default;
};

struct SweepResult {
    std::vector<int> n_trees;
    std::vector<int> max_depth;
    std::vector<SweepCell> cells; ///< row-major: depth index, then n_trees index
    std::vector<std::optional<GridIndex>> loss_argmin; ///< per weight setting
    std::optional<GridIndex> auc_argmax;

    const SweepCell& at(std::size_t depth_i, std::size_t trees_i) const { return cells[depth_i * n_trees.size() + trees_i]; }
};

namespace detail {

/// Extremum over successful cells; ties keep the first cell in row-major order.
template <typename Value>
std::optional<GridIndex> grid_extremum(const SweepResult& s, Value value, bool maximise) {
    std::optional<GridIndex> best;
    double best_v = 0.0;
    for (std::size_t d = 0; d < s.max_depth.size(); ++d) {
        for (std::size_t t = 0; t < s.n_trees.size(); ++t) {
            const auto& c = s.at(d, t);
            if (c.failed) continue;
            const double v = value(c);
            if (!best || (maximise ? v > best_v : v < best_v)) {
                best = GridIndex{d, t};
                best_v = v;
            }
        }
    }
    return best;
}

} // namespace detail

inline SweepResult run_sweep(const RunConfig& config, const SplitDataset& split) {
    const auto& g = config.sweep;
    SweepResult out;
    out.n_trees = g.n_trees;
    out.max_depth = g.max_depth;
    out.cells.resize(g.n_trees.size() * g.max_depth.size());

    EvaluationOptions opts = config.evaluation_options();
    const bool cells_parallel = config.cost_mode == CostMode::model;
    const std::size_t cell_threads = cells_parallel ? config.threads : 1;
    if (cells_parallel) opts.threads = 1;
    const Seed seed = config.evaluation_seed();

    parallel_for(out.cells.size(), cell_threads, [&](std::size_t idx) {
        SweepCell& cell = out.cells[idx];
        cell.max_depth = g.max_depth[idx / g.n_trees.size()];
        cell.n_trees = g.n_trees[idx % g.n_trees.size()];
        ForestParams p = config.space.base;
        p.n_trees = cell.n_trees;
        p.max_depth = cell.max_depth;
        p.train_proportion = g.train_proportion;
        try {
            cell.result = evaluate_params(split, p, g.repetitions, config.weights.front(), seed, opts);
            for (const auto& w : config.weights) {
                cell.losses.push_back(loss(w, cell.result.auc, cell.result.rmspd, cell.result.runtime));
            }
        } catch (const EvaluationError& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    });

    for (std::size_t k = 0; k < config.weights.size(); ++k) {
        out.loss_argmin.push_back(detail::grid_extremum(out, [k](const SweepCell& c) { return c.losses[k]; }, false));
    }
    out.auc_argmax = detail::grid_extremum(out, [](const SweepCell& c) { return c.result.auc; }, true);
    return out;
}

/// Wide table: one row per max_depth, one column per n_trees; failed cells read "failed".
template <typename Value>
std::string heatmap_csv(const SweepResult& s, Value value) {
    std::ostringstream os;
    os << "max_depth";
    for (int t : s.n_trees) os << ",n_trees=" << t;
    os << '\n';
    for (std::size_t d = 0; d < s.max_depth.size(); ++d) {
        os << s.max_depth[d];
        for (std::size_t t = 0; t < s.n_trees.size(); ++t) {
            const auto& c = s.at(d, t);
            os << ',' << (c.failed ? std::string("failed") : format_double(value(c)));
        }
        os << '\n';
    }
    return os.str();
}

inline SweepResult cmd_sweep(const RunConfig& config) {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const SweepResult s = run_sweep(config, prepare_split(load_dataset(config)));

    detail::write_text(dir / "heatmap_auc.csv", heatmap_csv(s, [](const SweepCell& c) { return c.result.auc; }));
    detail::write_text(dir / "heatmap_rmspd.csv", heatmap_csv(s, [](const SweepCell& c) { return c.result.rmspd; }));
    detail::write_text(dir / "heatmap_runtime.csv",
                       heatmap_csv(s, [](const SweepCell& c) { return c.result.runtime; }));
    for (std::size_t k = 0; k < config.weights.size(); ++k) {
        detail::write_text(dir / ("heatmap_loss_" + std::to_string(k) + ".csv"),
                           heatmap_csv(s, [k](const SweepCell& c) { return c.losses[k]; }));
    }

    auto cell_json = [&](const std::optional<GridIndex>& g) -> Json {
        if (!g) return nullptr;
        return Json{{"n_trees", s.n_trees[g->trees]}, {"max_depth", s.max_depth[g->depth]}};
    };
    Json report;
    report["command"] = "sweep";
    report["seed"] = config.master_seed();
    report["train_proportion"] = config.sweep.train_proportion;
    report["repetitions"] = config.sweep.repetitions;
    report["auc_argmax"] = cell_json(s.auc_argmax);
    Json stars = Json::array();
    for (std::size_t k = 0; k < config.weights.size(); ++k) {
        const auto& w = config.weights[k];
        stars.push_back(Json{{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma},
                             {"table", "heatmap_loss_" + std::to_string(k) + ".csv"},
                             {"argmin", cell_json(s.loss_argmin[k])}});
    }
    report["loss_argmin"] = std::move(stars);
    Json failures = Json::array();
    for (const auto& c : s.cells) {
        if (c.failed) failures.push_back(Json{{"n_trees", c.n_trees}, {"max_depth", c.max_depth}, {"error", c.error}});
    }
    report["failed_cells"] = std::move(failures);
    detail::write_text(dir / "report.json", report.dump(2) + "\n");
    return s;
}

// ---- tune ----

struct TuneRow {
    std::string label; ///< "baseline" or "tuned"
    LossWeights weights;
    EvaluationResult result;
    double baseline_loss = 0.0; ///< baseline metrics priced with this row's weights
};

struct TuneReport {
    std::vector<TuneRow> rows;
    std::vector<std::vector<Observation>> traces;
    std::vector<std::string> log;
    std::optional<std::string> error;
};

/// "10 trees, no depth limit, all training data" plus the fixed forest settings of the space.
inline ForestParams baseline_params(const ParameterSpace& space) {
    ForestParams p = space.base;
    p.n_trees = 10;
    p.max_depth = std::nullopt;
    p.train_proportion = 1.0;
    return p;
}

inline std::string tune_csv(const TuneReport& r) {
    std::ostringstream os;
    os << "row,alpha,beta,gamma,n_trees,max_depth,train_proportion,auc,rmspd,runtime,loss,baseline_loss\n";
    for (const auto& row : r.rows) {
        const auto& p = row.result.params;
        os << row.label << ',' << format_double(row.weights.alpha) << ',' << format_double(row.weights.beta) << ','
           << format_double(row.weights.gamma) << ',' << p.n_trees << ',' << detail::depth_text(p.max_depth) << ','
           << format_double(p.train_proportion) << ',' << format_double(row.result.auc) << ','
           << format_double(row.result.rmspd) << ',' << format_double(row.result.runtime) << ','
           << format_double(row.result.loss) << ',' << format_double(row.baseline_loss) << '\n';
    }
    return os.str();
}

inline Json tune_json(const RunConfig& config, const TuneReport& r) {
    Json j;
    j["command"] = "tune";
    j["seed"] = config.master_seed();
    j["runs"] = config.runs;
    j["n_init"] = config.n_init;
    j["iterations"] = config.iterations;
    j["cost_mode"] = config.cost_mode == CostMode::model ? "model" : "wall";
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        Json e;
        e["row"] = row.label;
        e["alpha"] = row.weights.alpha;
        e["beta"] = row.weights.beta;
        e["gamma"] = row.weights.gamma;
        e["result"] = to_json(row.result);
        e["baseline_loss"] = row.baseline_loss;
        rows.push_back(std::move(e));
    }
    j["rows"] = std::move(rows);
    Json traces = Json::array();
    for (const auto& t : r.traces) traces.push_back(to_json(t));
    j["traces"] = std::move(traces);
    j["log"] = r.log;
    j["error"] = r.error ? Json(*r.error) : Json(nullptr);
    return j;
}

/// Baseline row, then one optimised row per weight setting. All evaluations share one seed
/// so the baseline and every candidate see the same subsamples.
inline TuneReport run_tune(const RunConfig& config, const SplitDataset& split,
                           const std::function<void(const TuneReport&)>& on_progress = {}) {
    const Seed eval_seed = config.evaluation_seed();
    const EvaluationOptions opts = config.evaluation_options();
    TuneReport report;

    const EvaluationResult base = evaluate_params(split, baseline_params(config.space), config.runs,
                                                  config.weights.front(), eval_seed, opts);
    report.rows.push_back({"baseline", config.weights.front(), base, base.loss});
    if (on_progress) on_progress(report);

    OptimizerOptions oo;
    oo.n_init = config.n_init;
    oo.n_iter = config.iterations;
    oo.seed = config.master_seed();
    for (const auto& w : config.weights) {
        auto evaluator = [&](const ForestParams& p) { return evaluate_params(split, p, config.runs, w, eval_seed, opts); };
        const OptimizationResult res = optimize(evaluator, config.space, oo);
        report.rows.push_back({"tuned", w, res.best_result, loss(w, base.auc, base.rmspd, base.runtime)});
        report.traces.push_back(res.trace);
        report.log.insert(report.log.end(), res.log.begin(), res.log.end());
        if (on_progress) on_progress(report);
    }
    return report;
}

inline TuneReport cmd_tune(const RunConfig& config) {
    config.validate();
    const auto dir = detail::prepare_output(config);
    const SplitDataset split = prepare_split(load_dataset(config));
    auto save = [&](const TuneReport& r) {
        detail::write_text(dir / "report.csv", tune_csv(r));
        detail::write_text(dir / "report.json", tune_json(config, r).dump(2) + "\n");
    };
    TuneReport latest;
    try {
        TuneReport r = run_tune(config, split, [&](const TuneReport& partial) { latest = partial; });
        save(r);
        return r;
    } catch (const std::exception& e) {
        latest.error = e.what();
        save(latest);
        throw;
    }
}

} // namespace rfstab
