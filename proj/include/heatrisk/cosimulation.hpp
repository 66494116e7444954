#pragma once

#include "heatrisk/noise.hpp"
#include "heatrisk/reduction.hpp"
#include "heatrisk/simulation.hpp"
#include "heatrisk/spectral.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace heatrisk {

/// Cost weights of the physical system: int (X'QX + r V^2 + r U^2) dt + X_T'G X_T,
/// with U = dV/dt - mu V.
struct PhysicalCost {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd G;
    double r_ctrl = 1.0;
};

struct CosimOptions {
    std::size_t space_points = 512;
    /// Steps at which u(t, .) is recorded; the terminal step is always recorded.
    std::vector<std::size_t> snapshot_steps;
    int workers = 0;
};

struct CosimResult {
    std::size_t samples = 0;
    std::size_t steps = 0;
    Eigen::Index d = 0;
    std::size_t space_points = 0;
    std::vector<std::size_t> snapshot_steps;
    std::vector<double> X;  ///< [s][m][i]
    std::vector<double> V;  ///< [s][m], m = 0..steps
    std::vector<std::vector<double>> u;  ///< [s * snapshots + k] -> values on the space grid
    std::vector<double> costs;

    [[nodiscard]] Eigen::Map<const Eigen::VectorXd> state(std::size_t s, std::size_t m) const {
        return {X.data() + (s * (steps + 1) + m) * static_cast<std::size_t>(d), d};
    }
    [[nodiscard]] const std::vector<double>& snapshot(std::size_t s, std::size_t k) const {
        return u[s * snapshot_steps.size() + k];
    }
};

/// Direct simulation of the original heat-equation / SDE system: second-order
/// finite differences with ghost-point Robin conditions, implicit diffusion,
/// explicit reaction, and Euler-Maruyama for X driven by u(t, 0) with the
/// bank's Brownian increments. V_path holds V(t_m) for m = 0..steps.
CosimResult cosimulate_original(const CoupledSystemSpec& spec, std::span<const double> V_path,
                                const NoiseBank& noise, const TimeGrid& grid, const PhysicalCost& cost,
                                const CosimOptions& options = {});

/// Same scheme with V produced by the feedback policy acting on the reduced
/// coordinates of the finite-difference state: dV = (mu V + U) dt.
CosimResult cosimulate_closed_loop(const CoupledSystemSpec& spec, const EigenBasis& basis,
                                   const BoundaryLifter& actuation, const BoundaryLifter& sde,
                                   const FeedbackPolicy& policy, const NoiseBank& noise, const TimeGrid& grid,
                                   const PhysicalCost& cost, const CosimOptions& options = {});

}  // namespace heatrisk
