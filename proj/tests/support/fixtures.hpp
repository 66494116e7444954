#pragma once

// Shared model builders for the tests.

#include "heatrisk/reduction.hpp"
#include "heatrisk/spectral.hpp"

#include <Eigen/Dense>

namespace fixture {

/// Two-dimensional SDE coupled to the reactive Neumann heat equation.
inline heatrisk::CoupledSystemSpec reference_spec(double x0 = 0.3) {
    heatrisk::CoupledSystemSpec s;
    s.A.resize(2, 2);
    s.A << 0.6, 0.4, 0.0, 0.4;
    s.B.resize(2, 1);
    s.B << 0.0, 1.0;
    s.C = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    s.D = Eigen::MatrixXd::Zero(2, 1);
    s.M = Eigen::MatrixXd::Zero(1, 2);
    s.r_drift = heatrisk::DriftProfile::constant(Eigen::VectorXd::Zero(2));
    s.sigma_drift = heatrisk::DriftProfile::constant(Eigen::VectorXd::Constant(2, 0.05));
    s.robin = heatrisk::make_robin(0.0, 0.0, 0.2);
    s.T = 4.0;
    s.X0 = Eigen::VectorXd::Constant(2, x0);
    s.u0 = heatrisk::H1Function::zero();
    s.V0 = 0.0;
    return s;
}

/// Reduced model with Q = I, r = 3 and G = 0.
inline heatrisk::ReducedModel reference_model(std::size_t order = 3, double x0 = 0.3) {
    auto model = heatrisk::reduce(reference_spec(x0), order);
    heatrisk::attach_cost(model, heatrisk::assemble_cost(Eigen::MatrixXd::Identity(2, 2),
                                                         Eigen::MatrixXd::Zero(2, 2), 3.0, order));
    return model;
}

/// Scalar model dX = (a X + b U) dt + (c X + s) dW with cost q X^2 + r U^2 and
/// terminal weight g; no PDE modes are involved.
inline heatrisk::ReducedModel scalar_model(double a, double b, double c, double s, double q, double r, double g,
                                           double x0, double T) {
    heatrisk::ReducedModel m;
    m.d = 1;
    m.N = -2;  // n_aug = d + 1 + N + 1 = 1: the state is X alone
    m.Delta = Eigen::MatrixXd::Zero(1, 1);
    m.A = Eigen::MatrixXd::Constant(1, 1, a);
    m.C = Eigen::MatrixXd::Constant(1, 1, c);
    m.B = Eigen::VectorXd::Constant(1, b);
    m.r = heatrisk::DriftProfile::constant(Eigen::VectorXd::Zero(1));
    m.sigma = heatrisk::DriftProfile::constant(Eigen::VectorXd::Constant(1, s));
    m.Q = Eigen::MatrixXd::Constant(1, 1, q);
    m.G = Eigen::MatrixXd::Constant(1, 1, g);
    m.r_ctrl = r;
    m.Z0 = Eigen::VectorXd::Constant(1, x0);
    m.T = T;
    m.mu = 0.0;
    return m;
}

}  // namespace fixture
