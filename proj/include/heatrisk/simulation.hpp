#pragma once

#include "heatrisk/noise.hpp"
#include "heatrisk/reduction.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <vector>

namespace heatrisk {

/// Uniform grid t_m = m T / M, m = 0..M.
struct TimeGrid {
    double T = 4.0;
    std::size_t steps = 4000;

    [[nodiscard]] double dt() const { return T / static_cast<double>(steps); }
    [[nodiscard]] double time(std::size_t m) const { return T * static_cast<double>(m) / static_cast<double>(steps); }
    void validate() const;
};

struct Interval {
    double lo = -50.0;
    double hi = 50.0;

    [[nodiscard]] double clip(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
    [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
};

/// U(t_m) = v[m] + K Z(t_m), with v piecewise constant on the grid.
struct FeedbackPolicy {
    std::vector<double> v;
    Eigen::RowVectorXd K;
    Interval box_v;
    Interval box_K;

    static FeedbackPolicy zero(std::size_t steps, Eigen::Index n_aug, Interval box_v = {}, Interval box_K = {});

    [[nodiscard]] bool feasible() const;
    /// Entrywise clipping onto the boxes; returns true if anything moved.
    bool project();
};

nlohmann::json to_json(const FeedbackPolicy& policy, const TimeGrid& grid);
FeedbackPolicy policy_from_json(const nlohmann::json& j);

struct SimulationOptions {
    bool store_paths = false;
    bool with_fundamental = false;
    /// 0 lets OpenMP decide.
    int workers = 0;
};

/// Per-sample paths in sample-major layout. Z and U are filled only when
/// paths are stored; Phi only for fundamental-matrix runs.
struct TrajectoryBatch {
    std::size_t samples = 0;
    std::size_t steps = 0;
    Eigen::Index n = 0;
    std::vector<double> Z;    // [s][m][i]
    std::vector<double> Phi;  // [s][m][i][k], row-major n x n
    std::vector<double> U;    // [s][m]
    std::vector<double> costs;

    [[nodiscard]] bool has_paths() const { return !Z.empty(); }
    [[nodiscard]] bool has_fundamental() const { return !Phi.empty(); }

    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> state(std::size_t s, std::size_t m) const {
        return {Z.data() + (s * (steps + 1) + m) * static_cast<std::size_t>(n), n};
    }
    [[nodiscard]] Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    fundamental(std::size_t s, std::size_t m) const {
        const auto nn = static_cast<std::size_t>(n * n);
        return {Phi.data() + (s * (steps + 1) + m) * nn, n, n};
    }
    [[nodiscard]] double control(std::size_t s, std::size_t m) const { return U[s * steps + m]; }
};

/// Euler-Maruyama simulation of the reduced SDE under a feedback policy.
/// Costs use left-endpoint quadrature of Z'QZ + r U^2 plus the terminal Z'GZ.
/// Throws NumericalError naming the sample and step if a state overflows.
TrajectoryBatch simulate_batch(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                               const TimeGrid& grid, const SimulationOptions& options = {});

/// Per-sample costs recomputed from stored paths.
std::vector<double> evaluate_cost(const TrajectoryBatch& batch, const ReducedModel& model);

/// Throws InvalidArgument if model, policy, bank and grid disagree.
void check_compatible(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                      const TimeGrid& grid);

}  // namespace heatrisk
