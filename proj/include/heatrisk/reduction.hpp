#pragma once

#include "heatrisk/function.hpp"
#include "heatrisk/spectral.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <vector>

namespace heatrisk {

/// Piecewise-constant vector-valued signal of time: value(t) is the column
/// of the last knot with knots[k] <= t.
struct DriftProfile {
    std::vector<double> knots{0.0};
    Eigen::MatrixXd values;  // dim x knots.size()

    static DriftProfile constant(const Eigen::VectorXd& v);
    [[nodiscard]] Eigen::Index dim() const { return values.rows(); }
    [[nodiscard]] Eigen::VectorXd at(double t) const;
    void validate(Eigen::Index expected_dim, double horizon, const char* name) const;
};

/// Heat equation on [0, 1] coupled at x = 0 to a d-dimensional linear SDE,
/// actuated by the Robin flux V at x = 1.
struct CoupledSystemSpec {
    Eigen::MatrixXd A, B, C, D, M;
    DriftProfile r_drift, sigma_drift;
    RobinParams robin;
    double T = 4.0;
    Eigen::VectorXd X0;
    H1Function u0;
    double V0 = 0.0;

    [[nodiscard]] Eigen::Index d() const { return A.rows(); }
    /// Dimension checks plus the compatibility of u0 with the boundary data at t = 0.
    void validate(double compat_tol = 1e-6) const;
};

/// Sign set used in the lifted drift/diffusion blocks.
enum class SignConvention {
    substitution,  ///< derived from u(t,0) = z(t,0) + theta(0) V + psi(0) M X
    printed,       ///< alternative set kept for investigation only
};

/// Finite-dimensional augmented SDE in coordinates (X, Y = V, kappa_0..kappa_N):
///   dZ = [(Delta + A) Z + B U + r(t)] dt + [C Z + sigma(t)] dW
/// with cost int (Z'QZ + r_ctrl U^2) dt + Z_T' G Z_T.
struct ReducedModel {
    Eigen::Index d = 0;
    Eigen::Index N = 0;
    Eigen::MatrixXd Delta;  ///< diagonal generator; mode n carries -lambda_n
    Eigen::MatrixXd A;
    Eigen::MatrixXd C;
    Eigen::VectorXd B;
    DriftProfile r;
    DriftProfile sigma;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd G;
    double r_ctrl = 1.0;
    Eigen::VectorXd Z0;
    double T = 4.0;
    double mu = 1.0;

    [[nodiscard]] Eigen::Index n_aug() const { return d + 1 + N + 1; }
    [[nodiscard]] Eigen::Index y_index() const { return d; }
    [[nodiscard]] Eigen::Index mode_index(Eigen::Index n) const { return d + 1 + n; }
    /// Delta + A
    [[nodiscard]] Eigen::MatrixXd drift_matrix() const { return Delta + A; }
    void validate() const;
};

ReducedModel assemble_reduced(const CoupledSystemSpec& spec, const EigenBasis& basis,
                              const BoundaryLifter& actuation, const BoundaryLifter& sde,
                              const TraceRepresenter& representer,
                              SignConvention signs = SignConvention::substitution);

/// Convenience: basis, lifters and representer from the spec's Robin parameters.
ReducedModel reduce(const CoupledSystemSpec& spec, std::size_t order,
                    SignConvention signs = SignConvention::substitution);

struct CostMatrices {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd G;
    double r_ctrl;
};

/// Q_N = blockdiag(Q, r_ctrl, 0), G_N = blockdiag(G, 0, 0).
CostMatrices assemble_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& G, double r_ctrl,
                           std::size_t order);

void attach_cost(ReducedModel& model, const CostMatrices& cost);

struct ReconstructedState {
    H1Function u;
    Eigen::VectorXd X;
    double V = 0.0;
};

/// u = sum kappa_n phi_n + theta V + psi M X.
ReconstructedState reconstruct_state(const Eigen::VectorXd& z, const Eigen::MatrixXd& M,
                                     const EigenBasis& basis, const BoundaryLifter& actuation,
                                     const BoundaryLifter& sde);

nlohmann::json to_json(const ReducedModel& model);
ReducedModel reduced_model_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DriftProfile& p);
DriftProfile drift_from_json(const nlohmann::json& j);

}  // namespace heatrisk
