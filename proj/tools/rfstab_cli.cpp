#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rfstab/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kEvaluation = 4 };

void print_tune(const rfstab::TuneReport& r) {
    std::cout << rfstab::tune_csv(r);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-forest tuning for accuracy, prediction stability and training cost"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> cost_mode;
    std::optional<std::size_t> threads;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Master seed; overrides the config");
    app.add_option("--out", out_dir, "Output directory; overrides the config");
    app.add_option("--cost-mode", cost_mode, "Runtime source: wall or model")->check(CLI::IsMember({"wall", "model"}));
    app.add_option("--threads", threads, "Worker threads; overrides the config")->check(CLI::PositiveNumber);

    auto* stability = app.add_subcommand("stability", "Prediction-delta histograms and RMSPD per forest size");
    auto* sweep = app.add_subcommand("sweep", "Grid sweep over n_trees x max_depth, writes heatmap CSVs");
    auto* tune = app.add_subcommand("tune", "Bayesian tuning per weight setting against the baseline forest");
    auto* generate = app.add_subcommand("generate", "Write the synthetic dataset as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        rfstab::RunConfig config = rfstab::load_config(config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.output_dir = *out_dir;
        if (cost_mode) config.cost_mode = rfstab::parse_cost_mode(*cost_mode);
        if (threads) config.threads = *threads;

        if (stability->parsed()) {
            for (const auto& row : rfstab::cmd_stability(config)) {
                std::cout << "n_trees=" << row.n_trees << " rmspd=" << rfstab::format_double(row.report.rmspd)
                          << " auc=" << rfstab::format_double(row.auc) << '\n';
            }
        } else if (sweep->parsed()) {
            const auto s = rfstab::cmd_sweep(config);
            std::size_t failed = 0;
            for (const auto& c : s.cells) failed += c.failed ? 1 : 0;
            std::cout << "sweep: " << s.cells.size() << " cells, " << failed << " failed, written to "
                      << config.output_dir << '\n';
        } else if (tune->parsed()) {
            print_tune(rfstab::cmd_tune(config));
        } else if (generate->parsed()) {
            std::cout << rfstab::cmd_generate(config).string() << '\n';
        }
    } catch (const rfstab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const rfstab::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const rfstab::EvaluationError& e) {
        std::cerr << "evaluation error: " << e.what() << '\n';
        return kEvaluation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
