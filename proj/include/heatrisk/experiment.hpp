#pragma once

#include "heatrisk/optimizer.hpp"
#include "heatrisk/reduction.hpp"
#include "heatrisk/riccati.hpp"
#include "heatrisk/risk.hpp"
#include "heatrisk/simulation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace heatrisk {

/// Terminal weight on the reduced state.
enum class TerminalWeight {
    physical,  ///< G_N = blockdiag(G, 0, 0)
    riccati,   ///< G_N = P, the stabilizing Riccati solution
};

struct ExperimentConfig {
    // system
    CoupledSystemSpec system;
    /// When absent u0 is the compatible profile theta V0 + psi M X0.
    std::optional<H1Function> u0;
    // reduction
    std::size_t order = 3;
    SignConvention signs = SignConvention::substitution;
    // simulation
    std::size_t steps = 4000;
    std::size_t samples_train = 2000;
    std::size_t samples_eval = 10000;
    std::uint64_t seed = 1;
    int workers = 0;
    // cost
    Eigen::MatrixXd Q;
    Eigen::MatrixXd G;
    double r_ctrl = 3.0;
    TerminalWeight terminal = TerminalWeight::physical;
    // risk
    RiskSpec risk;
    // optimizer
    std::size_t iterations = 1000;
    double eta = 1e-3;
    double beta_step = 1e-2;
    Interval box_v;
    Interval box_K;
    bool adaptive = false;
    bool frozen_bank = false;
    DualCarry carry = DualCarry::rank;
    std::size_t eval_every = 50;
    // output
    std::filesystem::path output_dir = "out";
    std::vector<double> levels{0.20, 0.40, 0.60, 0.70, 0.80, 0.90, 0.95, 0.99};
    std::size_t histogram_bins = 60;

    [[nodiscard]] TimeGrid grid() const { return {system.T, steps}; }
    [[nodiscard]] Schedule schedule() const;
    [[nodiscard]] std::uint64_t eval_seed() const;
};

/// Parses the YAML configuration. Unknown keys and malformed entries raise
/// ConfigError with `source:line: block.key: reason`.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// System with u0 filled in (the compatible profile when the config leaves it open).
CoupledSystemSpec resolved_system(const ExperimentConfig& cfg);

/// Reduced model with the cost attached (and the Riccati terminal weight if requested).
ReducedModel build_model(const ExperimentConfig& cfg);

/// Eigenvalues, lifter traces and matrix norms.
std::string model_summary(const ExperimentConfig& cfg, const ReducedModel& model);

struct QuantileReport {
    std::vector<double> levels;
    std::vector<double> cost1;
    std::vector<double> cost2;
    std::vector<double> difference;
};

QuantileReport quantile_report(std::span<const double> baseline, std::span<const double> optimized,
                               std::span<const double> levels);

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> baseline;
    std::vector<std::size_t> optimized;
};

/// Equal-width bins spanning the union range of both samples.
Histogram histogram(std::span<const double> baseline, std::span<const double> optimized, std::size_t bins);

nlohmann::json to_json(const QuantileReport& report);
nlohmann::json to_json(const Histogram& h);
std::string quantiles_to_csv(const QuantileReport& report);

// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* model = "model.json";
inline constexpr const char* summary = "model_summary.txt";
inline constexpr const char* riccati = "riccati.json";
inline constexpr const char* baseline_policy = "baseline_policy.json";
inline constexpr const char* baseline_costs = "baseline_costs.csv";
inline constexpr const char* policy = "policy.json";
inline constexpr const char* last_good_policy = "last_good_policy.json";
inline constexpr const char* history = "history.csv";
inline constexpr const char* evaluations = "evaluations.csv";
inline constexpr const char* optimized_costs = "optimized_costs.csv";
inline constexpr const char* report = "report.json";
inline constexpr const char* quantiles = "quantiles.csv";
}  // namespace artifact

void cmd_reduce(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_baseline(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_optimize(const ExperimentConfig& cfg, const std::filesystem::path& out);
QuantileReport cmd_report(const std::filesystem::path& baseline_csv, const std::filesystem::path& optimized_csv,
                          std::span<const double> levels, std::size_t bins, const std::filesystem::path& out);
void cmd_all(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace heatrisk
