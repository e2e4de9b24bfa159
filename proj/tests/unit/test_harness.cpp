#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfstab/harness.hpp"

using namespace rfstab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("rfstab_test_" + name);
    fs::remove_all(dir);
    return dir;
}

RunConfig small_config(Seed seed, const std::string& out) {
    RunConfig c;
    c.seed = seed;
    c.synthetic = {.n_rows = 600, .n_numeric = 4, .n_categorical = 1, .signal_strength = 2.0};
    c.cost_mode = CostMode::model;
    c.model_cost_scale = 1e-7;
    c.runs = 3;
    c.n_init = 3;
    c.iterations = 2;
    c.space.n_trees = {1, 30};
    c.space.max_depth = {1, 8};
    c.output_dir = out;
    c.stability = {.n_trees = {4, 16}, .max_depth = 6, .runs = 4};
    c.sweep = {.n_trees = {2, 8}, .max_depth = {2, 4}, .repetitions = 2};
    return c;
}

double forest_auc(const SplitDataset& split, Seed seed) {
    const auto forest = train_forest(split.train, ForestParams{.n_trees = 50, .max_depth = 8}, seed);
    return auc(predict_proba(forest, split.validation.features), split.validation.labels);
}

} // namespace

TEST(Synthetic, DeterministicPerSeed) {
    const SyntheticSpec spec{.n_rows = 200};
    const auto a = generate_synthetic(spec, 5);
    const auto b = generate_synthetic(spec, 5);
    const auto c = generate_synthetic(spec, 6);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.rows, b.rows);
    EXPECT_NE(a.rows, c.rows);
}

TEST(Synthetic, BothClassesAndValidSpec) {
    const auto d = generate_synthetic({.n_rows = 20, .n_numeric = 1, .n_categorical = 0}, 1);
    const auto pos = std::count(d.labels.begin(), d.labels.end(), 1);
    EXPECT_GT(pos, 0);
    EXPECT_LT(pos, 20);
    EXPECT_THROW(generate_synthetic({.n_rows = 19}, 1), ConfigError);
}

TEST(Synthetic, NoSignalGivesChanceAuc) {
    const auto split = prepare_split(generate_synthetic({.n_rows = 2000, .signal_strength = 0.0}, 3));
    const double a = forest_auc(split, 1);
    EXPECT_GE(a, 0.4);
    EXPECT_LE(a, 0.6);
}

TEST(Synthetic, StrongSignalIsSeparable) {
    const auto split = prepare_split(generate_synthetic({.n_rows = 2000, .signal_strength = 50.0}, 3));
    EXPECT_GE(forest_auc(split, 1), 0.95);
}

TEST(Config, ParsesAndRejects) {
    const auto c = parse_config(Json::parse(R"({
        "synthetic": {"n_rows": 100, "seed": 4},
        "weights": [{"alpha": 1, "beta": 5, "gamma": 0.01}],
        "space": {"n_trees": [2, 50], "max_depth": [1, 6], "train_proportion": [0.2, 0.9]},
        "seed": 12, "cost_mode": "model", "runs": 4,
        "sweep": {"n_trees": [8], "max_depth": [2]}
    })"));
    EXPECT_EQ(c.seed, 12u);
    EXPECT_EQ(c.synthetic_seed, 4u);
    EXPECT_EQ(c.weights.at(0).beta, 5.0);
    EXPECT_EQ(c.space.n_trees.hi, 50);
    EXPECT_EQ(c.cost_mode, CostMode::model);
    EXPECT_NO_THROW(c.validate());

    EXPECT_THROW(parse_config(Json::parse(R"({"bogus": 1})")), ConfigError);
    EXPECT_THROW(parse_config(Json::parse(R"({"cost_mode": "fast"})")), ConfigError);
    EXPECT_THROW(parse_config(Json::parse(R"({"runs": "five"})")), ConfigError);
    EXPECT_THROW(parse_config(Json::parse(R"({"space": {"n_trees": [1]}})")), ConfigError);
    EXPECT_THROW(parse_config(Json::parse(R"({"dataset": {"path": "a.csv"}, "synthetic": {}})")), ConfigError);
    EXPECT_THROW(parse_config(Json::parse("{}")).validate(), ConfigError); // no seed
    auto bad = parse_config(Json::parse(R"({"seed": 1, "space": {"n_trees": [9, 3]}})"));
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Config, MissingDatasetFileIsDataError) {
    RunConfig c;
    c.seed = 1;
    c.dataset = DatasetConfig{.path = "/nonexistent/data.csv"};
    EXPECT_THROW(load_dataset(c), DataError);
}

TEST(Stability, HistogramCountsAndSymmetry) {
    const auto c = small_config(1, scratch("hist").string());
    auto cfg = c;
    cfg.synthetic.n_rows = 4000;
    const auto split = prepare_split(load_dataset(cfg));
    const auto rows = run_stability(cfg, split);
    ASSERT_EQ(rows.size(), 2u);
    const std::uint64_t n = split.validation.size();
    const std::uint64_t r = 4;
    for (const auto& row : rows) {
        std::uint64_t sum = 0;
        for (auto k : row.histogram.counts) sum += k;
        EXPECT_EQ(sum, n * r * (r - 1) / 2);
        EXPECT_EQ(row.histogram.counts.size(), 64u);
        EXPECT_LE(std::abs(row.histogram.mean_delta), 0.01);
    }
}

TEST(Stability, HistogramBinsHandChecked) {
    // deltas: -1 -> bin 0, 0 -> bin 1, +1 -> last bin (clamped)
    const auto p = PredictionMatrix::from_runs({{0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}});
    const auto h = delta_histogram(p, 2);
    EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_EQ(h.mean_delta, 0.0);
}

TEST(Stability, SharedSeedGivesZeroDeltas) {
    auto c = small_config(2, scratch("shared").string());
    c.stability.shared_seed = true;
    const auto rows = run_stability(c, prepare_split(load_dataset(c)));
    for (const auto& row : rows) {
        EXPECT_EQ(row.report.rmspd, 0.0);
        const auto mid = row.histogram.counts.size() / 2;
        EXPECT_EQ(row.histogram.counts[mid], row.histogram.total);
    }
}

TEST(Stability, WritesFiles) {
    const auto dir = scratch("stab_files");
    cmd_stability(small_config(3, dir.string()));
    EXPECT_TRUE(fs::exists(dir / "histogram_4.csv"));
    EXPECT_TRUE(fs::exists(dir / "histogram_16.csv"));
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    const auto text = slurp(dir / "histogram_4.csv");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 65);
}

TEST(Sweep, SingleCellIsItsOwnArgmin) {
    auto c = small_config(4, scratch("one").string());
    c.sweep = {.n_trees = {8}, .max_depth = {3}, .repetitions = 2};
    const auto s = run_sweep(c, prepare_split(load_dataset(c)));
    ASSERT_EQ(s.cells.size(), 1u);
    ASSERT_TRUE(s.loss_argmin.at(0).has_value());
    EXPECT_EQ(*s.loss_argmin[0], (GridIndex{0, 0}));
    EXPECT_EQ(*s.auc_argmax, (GridIndex{0, 0}));
}

TEST(Sweep, RuntimeGrowsWithTrees) {
    auto c = small_config(5, scratch("runtime").string());
    c.sweep = {.n_trees = {4, 8, 16, 32}, .max_depth = {2, 5}, .repetitions = 2};
    const auto s = run_sweep(c, prepare_split(load_dataset(c)));
    for (std::size_t t = 1; t < s.n_trees.size(); ++t) {
        double prev = 0, cur = 0;
        for (std::size_t d = 0; d < s.max_depth.size(); ++d) {
            prev += s.at(d, t - 1).result.runtime;
            cur += s.at(d, t).result.runtime;
        }
        EXPECT_GT(cur, prev);
    }
}

TEST(Sweep, LossArgminDiffersFromAucArgmax) {
    int differ = 0;
    for (Seed seed = 1; seed <= 10; ++seed) {
        RunConfig c;
        c.seed = seed;
        c.synthetic_seed = 2024;
        c.cost_mode = CostMode::model;
        const auto s = run_sweep(c, prepare_split(load_dataset(c)));
        differ += s.loss_argmin.at(0) != s.auc_argmax ? 1 : 0;
    }
    EXPECT_GE(differ, 7);
}

TEST(Sweep, FailedCellsAreMarked) {
    auto c = small_config(6, scratch("failed").string());
    // validation half with one class: every cell fails but the grid stays complete
    c.synthetic = {.n_rows = 40, .n_numeric = 1, .n_categorical = 0, .signal_strength = 0.0};
    const auto split = [&] {
        auto s = prepare_split(load_dataset(c));
        std::fill(s.validation.labels.begin(), s.validation.labels.end(), 0);
        return s;
    }();
    const auto s = run_sweep(c, split);
    EXPECT_EQ(s.cells.size(), 4u);
    for (const auto& cell : s.cells) EXPECT_TRUE(cell.failed);
    EXPECT_FALSE(s.loss_argmin[0].has_value());
    EXPECT_NE(heatmap_csv(s, [](const SweepCell& x) { return x.result.auc; }).find("failed"), std::string::npos);
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreads) {
    const auto a = scratch("sweep_a");
    const auto b = scratch("sweep_b");
    auto ca = small_config(7, a.string());
    auto cb = small_config(7, b.string());
    cb.threads = 3;
    cmd_sweep(ca);
    cmd_sweep(cb);
    for (const char* f : {"heatmap_auc.csv", "heatmap_rmspd.csv", "heatmap_runtime.csv", "heatmap_loss_0.csv",
                          "report.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(Tune, RowsSatisfyLossIdentity) {
    auto c = small_config(8, scratch("tune").string());
    c.weights = {{1, 1, 0.01}, {1, 5, 0.01}};
    const auto r = cmd_tune(c);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_EQ(r.rows[0].label, "baseline");
    EXPECT_EQ(r.rows[0].result.params.n_trees, 10);
    EXPECT_FALSE(r.rows[0].result.params.max_depth.has_value());
    EXPECT_EQ(r.rows[0].result.params.train_proportion, 1.0);
    for (const auto& row : r.rows) {
        const auto& w = row.weights;
        const auto& m = row.result;
        EXPECT_NEAR(m.loss, w.beta * m.rmspd + w.gamma * m.runtime - w.alpha * m.auc, 1e-9);
    }
    EXPECT_EQ(r.traces.size(), 2u);
    EXPECT_TRUE(fs::exists(c.output_dir + "/report.csv"));
    EXPECT_TRUE(fs::exists(c.output_dir + "/report.json"));
}

TEST(Tune, ZeroIterationsUsesBestOfInitialDesign) {
    auto c = small_config(9, scratch("zero").string());
    c.iterations = 0;
    c.n_init = 4;
    const auto r = run_tune(c, prepare_split(load_dataset(c)));
    ASSERT_EQ(r.traces.at(0).size(), 4u);
    double best = 1e300;
    for (const auto& o : r.traces[0]) best = std::min(best, o.value);
    EXPECT_EQ(r.rows.at(1).result.loss, best);
}

TEST(Tune, ReportsAreByteIdentical) {
    const auto a = scratch("tune_a");
    const auto b = scratch("tune_b");
    cmd_tune(small_config(10, a.string()));
    cmd_tune(small_config(10, b.string()));
    EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
}

TEST(Tune, FailureSavesPartialReport) {
    const auto dir = scratch("partial");
    fs::create_directories(dir);
    {
        // validation half (rows 11..20) holds a single class, so the baseline evaluation fails
        std::ofstream csv(dir / "data.csv");
        csv << "x,y\n";
        for (int i = 0; i < 20; ++i) csv << i << ',' << (i < 10 ? i % 2 : 0) << '\n';
    }
    auto c = small_config(11, (dir / "out").string());
    c.dataset = DatasetConfig{.path = (dir / "data.csv").string()};
    EXPECT_THROW(cmd_tune(c), EvaluationError);
    const auto report = Json::parse(slurp(dir / "out" / "report.json"));
    EXPECT_FALSE(report["error"].is_null());
    EXPECT_TRUE(report["rows"].empty());
}

TEST(Generate, WritesReadableCsv) {
    const auto dir = scratch("gen");
    auto c = small_config(12, dir.string());
    const auto path = cmd_generate(c);
    const auto back = load_csv(path.string(), "y", {"c0"});
    EXPECT_EQ(back.n_rows(), 600u);
    EXPECT_EQ(back.labels, load_dataset(c).labels);
}
