#pragma once

#include "heatrisk/reduction.hpp"
#include "heatrisk/simulation.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace heatrisk {

/// Stabilizing solution of the generalized algebraic Riccati equation
///   A'P + PA + C'PC - P B r^{-1} B'P + Q = 0
/// for dX = (AX + BU) dt + CX dW, with gain K = -r^{-1} B'P.
struct RiccatiSolution {
    Eigen::MatrixXd P;
    Eigen::RowVectorXd K;
    double residual = 0.0;
    int iterations = 0;
    /// Value matrices of the Newton iterates (after the bootstrap).
    std::vector<Eigen::MatrixXd> iterates;
};

/// Largest real part of the spectrum of P -> A'P + PA + C'PC; negative
/// exactly when dX = AX dt + CX dW is mean-square stable.
double mean_square_abscissa(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C);

/// Solves A'P + PA + C'PC + W = 0 by dense vectorization.
Eigen::MatrixXd solve_generalized_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                           const Eigen::MatrixXd& W);

double riccati_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& C,
                        const Eigen::MatrixXd& Q, double r, const Eigen::MatrixXd& P);

/// Kleinman-Newton iteration. The initial mean-square stabilizing gain comes
/// from a shift homotopy: solve for A - sI with s large enough that K = 0 is
/// stabilizing, then walk s down to zero warm-starting each solve.
RiccatiSolution solve_stochastic_are(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& C,
                                     const Eigen::MatrixXd& Q, double r);

RiccatiSolution solve_stochastic_are(const ReducedModel& model);

struct BaselinePolicy {
    FeedbackPolicy policy;
    std::vector<std::string> warnings;
};

/// v = 0 and K = K_lq clipped into the boxes.
BaselinePolicy baseline_policy(const RiccatiSolution& sol, const TimeGrid& grid, Interval box_v, Interval box_K);

nlohmann::json to_json(const RiccatiSolution& sol);

}  // namespace heatrisk
