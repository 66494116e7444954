#pragma once

#include "heatrisk/noise.hpp"
#include "heatrisk/reduction.hpp"
#include "heatrisk/simulation.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace heatrisk {

/// grad_v is the L^2([0, T]) Riesz representative on the grid, so the
/// derivative of the discrete cost with respect to v[m] is grad_v[m] * dt.
struct GradientPair {
    std::vector<double> grad_v;
    Eigen::RowVectorXd grad_K;

    [[nodiscard]] double norm_v(double dt) const;
    [[nodiscard]] double norm_K() const { return grad_K.norm(); }
};

/// Gradients from stored fundamental matrices: the adjoint row
/// p(t_m) = I_U(t_m) Phi(t_m)^{-1} is obtained by a linear solve against
/// Phi(t_m) at every step while I_U is accumulated backward in time.
/// weights[s] multiplies sample s; the result is (1/S) sum_s weights[s] grad J_s.
GradientPair compute_gradients(const ReducedModel& model, const FeedbackPolicy& policy, const TrajectoryBatch& batch,
                               std::span<const double> weights);

/// Unweighted per-sample cost gradients from a forward/backward sweep that
/// keeps only one block of paths in memory at a time.
struct SampleGradients {
    std::size_t samples = 0;
    std::size_t steps = 0;
    Eigen::Index n = 0;
    std::vector<double> costs;
    std::vector<double> grad_v;  ///< [s][m]
    std::vector<double> grad_K;  ///< [s][i]
};

/// Backward recursion p_m = p_{m+1} (I + F dt + C dW_m) + (2 Z_m'Q + 2 r U_m K) dt
/// with p_M = 2 Z_M'G; F is the closed-loop drift matrix. This is the exact
/// derivative of the Euler-Maruyama cost and needs no fundamental matrix.
SampleGradients sample_gradients(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                                 const TimeGrid& grid, int workers = 0);

/// (1/S) sum_s weights[s] * per-sample gradient, summed in sample order.
GradientPair combine(const SampleGradients& g, std::span<const double> weights);

}  // namespace heatrisk
