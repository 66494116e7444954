#pragma once

#include "heatrisk/function.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace heatrisk {

/// Coefficients of the Robin-boundary heat operator on [0, 1]:
///   u_xx + c u,  u'(0) - beta0 u(0) = .,  u'(1) + beta1 u(1) = .
/// mu is the shift used by the boundary lifters and must exceed c.
struct RobinParams {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double c = 0.0;
    double mu = 1.0;

    /// Throws InvalidArgument on negative Robin coefficients or mu <= c.
    void validate() const;
    [[nodiscard]] bool neumann() const { return beta0 == 0.0 && beta1 == 0.0; }

    bool operator==(const RobinParams&) const = default;
};

/// RobinParams with the default lifting shift mu = c + 1.
RobinParams make_robin(double beta0, double beta1, double c);

/// First N+1 eigenpairs of -phi'' = lambda phi with the homogeneous Robin
/// conditions, each eigenfunction normalized in H^1.
struct EigenBasis {
    RobinParams params;
    std::vector<double> lambdas;
    std::vector<H1Function> funcs;
    std::vector<double> trace0;
    std::vector<double> trace1;
    /// gram(m, n) = <phi_m, phi_n>_{H^1}
    Eigen::MatrixXd gram;

    [[nodiscard]] std::size_t size() const { return lambdas.size(); }
    [[nodiscard]] std::size_t order() const { return lambdas.size() - 1; }

    /// Solves gram * kappa = inner; inner holds <f, phi_n>_{H^1}.
    [[nodiscard]] Eigen::VectorXd solve_gram(const Eigen::VectorXd& inner) const;
    /// sum_n kappa_n phi_n
    [[nodiscard]] H1Function combine(const Eigen::VectorXd& kappa) const;
    /// Row vector (phi_0(0), ..., phi_N(0)).
    [[nodiscard]] Eigen::RowVectorXd trace0_row() const;
};

EigenBasis solve_eigenpairs(const RobinParams& params, std::size_t order);

/// Characteristic function whose positive roots s give lambda = s^2:
/// (s^2 - beta0 beta1) sin s - s (beta0 + beta1) cos s.
double characteristic(const RobinParams& params, double s);

/// Which boundary a lifter carries the unit Robin residual on.
enum class LifterSide {
    actuation,  ///< f'(1) + beta1 f(1) = 1, f'(0) - beta0 f(0) = 0 (multiplies V)
    sde,        ///< f'(0) - beta0 f(0) = 1, f'(1) + beta1 f(1) = 0 (multiplies M X)
};

/// Solution of -f'' - c f + mu f = 0 with one unit Robin residual,
/// stored as a cosh(kx) + b sinh(kx), k = sqrt(mu - c).
struct BoundaryLifter {
    LifterSide side = LifterSide::actuation;
    double k = 1.0;
    double coef_a = 0.0;
    double coef_b = 0.0;
    double value_at0 = 0.0;
    double value_at1 = 0.0;
    /// <f, phi_n>_{H^1}; empty until projected onto a basis.
    Eigen::VectorXd inner_h1;
    /// Gram-solved expansion coefficients in the basis.
    Eigen::VectorXd coefficients;

    [[nodiscard]] H1Function function() const { return H1Function::hyperbolic(coef_a, coef_b, k); }
};

BoundaryLifter solve_lifter(const RobinParams& params, LifterSide side);
BoundaryLifter solve_lifter(const RobinParams& params, LifterSide side, const EigenBasis& basis);

/// Riesz representer of the point evaluation v -> v(0) in H^1(0, 1):
/// gamma0(x) = cosh(1 - x) / sinh(1).
struct TraceRepresenter {
    H1Function function;
    Eigen::VectorXd inner_h1;
    Eigen::VectorXd coefficients;
};

TraceRepresenter trace_representer(const EigenBasis& basis);

/// Expansion coefficients of the H^1-orthogonal projection of f onto span(basis).
Eigen::VectorXd project_h1(const H1Function& f, const EigenBasis& basis);

}  // namespace heatrisk
