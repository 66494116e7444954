// Command-line front end: reduce, baseline, optimize, report, all.

#include "heatrisk/error.hpp"
#include "heatrisk/experiment.hpp"
#include "heatrisk/io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "experiment configuration (YAML)");
    if (needs_config) opt->required();
    cmd->add_option("--out", c.out, "output directory (overrides output.directory)");
    cmd->add_option("--seed", c.seed, "base seed (overrides simulation.seed)");
    cmd->add_option("--workers", c.workers, "worker threads (overrides simulation.workers)")->check(CLI::NonNegativeNumber);
}

heatrisk::ExperimentConfig resolve(const Common& c, std::filesystem::path& out) {
    heatrisk::ExperimentConfig cfg = heatrisk::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.workers) cfg.workers = *c.workers;
    out = c.out.empty() ? cfg.output_dir : std::filesystem::path(c.out);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-averse boundary control of a heat equation coupled to a linear SDE"};
    app.require_subcommand(1);

    Common common;
    auto* reduce = app.add_subcommand("reduce", "assemble the reduced model");
    auto* baseline = app.add_subcommand("baseline", "solve the Riccati equation and simulate the mean-optimal law");
    auto* optimize = app.add_subcommand("optimize", "run risk-averse descent-ascent from the baseline");
    auto* all = app.add_subcommand("all", "reduce, baseline, optimize and report");
    for (auto* cmd : {reduce, baseline, optimize, all}) add_common(cmd, common, true);

    auto* report = app.add_subcommand("report", "quantile table and histograms of two cost samples");
    add_common(report, common, false);
    std::string base_csv, opt_csv;
    std::vector<double> levels;
    std::optional<std::size_t> bins;
    report->add_option("--baseline", base_csv, "baseline cost CSV");
    report->add_option("--optimized", opt_csv, "risk-averse cost CSV");
    report->add_option("--levels", levels, "quantile levels")->delimiter(',');
    report->add_option("--bins", bins, "histogram bin count")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::path out;
        if (*report) {
            heatrisk::ExperimentConfig cfg;
            if (!common.config.empty()) {
                cfg = resolve(common, out);
            } else {
                out = common.out.empty() ? std::filesystem::path("out") : std::filesystem::path(common.out);
            }
            if (levels.empty()) levels = cfg.levels;
            const auto b = base_csv.empty() ? out / heatrisk::artifact::baseline_costs : std::filesystem::path(base_csv);
            const auto o = opt_csv.empty() ? out / heatrisk::artifact::optimized_costs : std::filesystem::path(opt_csv);
            const auto r = heatrisk::cmd_report(b, o, levels, bins.value_or(cfg.histogram_bins), out);
            std::cout << heatrisk::quantiles_to_csv(r);
            return 0;
        }
        const heatrisk::ExperimentConfig cfg = resolve(common, out);
        if (*reduce) {
            heatrisk::cmd_reduce(cfg, out);
            std::cout << heatrisk::read_text_file(out / heatrisk::artifact::summary);
        } else if (*baseline) {
            heatrisk::cmd_baseline(cfg, out);
        } else if (*optimize) {
            heatrisk::cmd_optimize(cfg, out);
        } else if (*all) {
            heatrisk::cmd_all(cfg, out);
            std::cout << heatrisk::read_text_file(out / heatrisk::artifact::quantiles);
        }
        return 0;
    } catch (const heatrisk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const heatrisk::InvalidArgument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kConfigError;
    } catch (const heatrisk::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
