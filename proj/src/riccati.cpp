#include "heatrisk/riccati.hpp"

#include "heatrisk/error.hpp"

#include <cmath>
#include <sstream>

namespace heatrisk {

namespace {

Eigen::MatrixXd lyapunov_operator(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd At = A.transpose();
    const Eigen::MatrixXd Ct = C.transpose();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n * n, n * n);
    // Column-major vec: vec(A'P) = (I kron A') vec P, vec(PA) = (A' kron I) vec P,
    // vec(C'PC) = (C' kron C') vec P.
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            L.block(i * n, j * n, n, n) = I(i, j) * At + At(i, j) * I + Ct(i, j) * Ct;
        }
    }
    return L;
}

struct NewtonResult {
    Eigen::MatrixXd P;
    Eigen::RowVectorXd K;
    int iterations = 0;
    std::vector<Eigen::MatrixXd> iterates;
};

NewtonResult kleinman_newton(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& C,
                             const Eigen::MatrixXd& Q, double r, Eigen::RowVectorXd K, bool keep_iterates) {
    NewtonResult out;
    for (int it = 1; it <= 200; ++it) {
        const Eigen::MatrixXd closed = A + B * K;
        const Eigen::MatrixXd P = solve_generalized_lyapunov(closed, C, Q + r * K.transpose() * K);
        const Eigen::RowVectorXd K_next = -(B.transpose() * P) / r;
        const double change = (K_next - K).cwiseAbs().maxCoeff();
        K = K_next;
        out.P = P;
        out.iterations = it;
        if (keep_iterates) out.iterates.push_back(P);
        if (change < 1e-10 * std::max(1.0, K.cwiseAbs().maxCoeff())) {
            out.K = K;
            return out;
        }
    }
    throw NumericalError("Kleinman-Newton iteration did not converge in 200 iterations");
}

}  // namespace

double mean_square_abscissa(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C) {
    const Eigen::EigenSolver<Eigen::MatrixXd> eig(lyapunov_operator(A, C), false);
    return eig.eigenvalues().real().maxCoeff();
}

Eigen::MatrixXd solve_generalized_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                           const Eigen::MatrixXd& W) {
    const Eigen::Index n = A.rows();
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(lyapunov_operator(A, C));
    if (!lu.isInvertible()) throw NumericalError("generalized Lyapunov operator is singular");
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(W.data(), n * n);
    const Eigen::VectorXd x = lu.solve(rhs);
    const Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return 0.5 * (P + P.transpose());
}

double riccati_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& C,
                        const Eigen::MatrixXd& Q, double r, const Eigen::MatrixXd& P) {
    const Eigen::MatrixXd R =
        A.transpose() * P + P * A + C.transpose() * P * C - P * B * B.transpose() * P / r + Q;
    return R.norm();
}

RiccatiSolution solve_stochastic_are(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::MatrixXd& C,
                                     const Eigen::MatrixXd& Q, double r) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.size() != n || C.rows() != n || C.cols() != n || Q.rows() != n || Q.cols() != n) {
        throw InvalidArgument("Riccati data have inconsistent dimensions");
    }
    if (!(r > 0.0)) throw InvalidArgument("control weight must be positive");
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

    Eigen::RowVectorXd K = Eigen::RowVectorXd::Zero(n);
    const double abscissa = mean_square_abscissa(A, C);
    if (abscissa >= 0.0) {
        double shift = 0.5 * abscissa + 1.0;
        K = kleinman_newton(A - shift * I, B, C, Q, r, K, false).K;
        double step = shift;
        int attempts = 0;
        while (shift > 0.0) {
            if (++attempts > 400) {
                throw NumericalError("no mean-square stabilizing initial gain found (shift stalled at " +
                                     std::to_string(shift) + ")");
            }
            const double trial = std::max(0.0, shift - step);
            if (mean_square_abscissa(A - trial * I + B * K, C) < 0.0) {
                shift = trial;
                K = kleinman_newton(A - shift * I, B, C, Q, r, K, false).K;
            } else {
                step *= 0.5;
                if (step < 1e-12) {
                    throw NumericalError("no mean-square stabilizing initial gain found (shift stalled at " +
                                         std::to_string(shift) + ")");
                }
            }
        }
    }
    if (mean_square_abscissa(A + B * K, C) >= 0.0) {
        throw NumericalError("initial gain is not mean-square stabilizing");
    }

    NewtonResult nr = kleinman_newton(A, B, C, Q, r, K, true);
    RiccatiSolution sol;
    sol.P = nr.P;
    sol.K = -(B.transpose() * sol.P) / r;
    sol.iterations = nr.iterations;
    sol.iterates = std::move(nr.iterates);
    sol.residual = riccati_residual(A, B, C, Q, r, sol.P);
    return sol;
}

RiccatiSolution solve_stochastic_are(const ReducedModel& model) {
    model.validate();
    return solve_stochastic_are(model.drift_matrix(), model.B, model.C, model.Q, model.r_ctrl);
}

BaselinePolicy baseline_policy(const RiccatiSolution& sol, const TimeGrid& grid, Interval box_v, Interval box_K) {
    grid.validate();
    BaselinePolicy out;
    out.policy = FeedbackPolicy::zero(grid.steps, sol.K.size(), box_v, box_K);
    out.policy.K = sol.K;
    if (out.policy.project()) {
        std::ostringstream msg;
        msg << "LQ gain clipped into [" << box_K.lo << ", " << box_K.hi
            << "]; baseline differs from the unconstrained LQ law";
        out.warnings.push_back(msg.str());
    }
    return out;
}

nlohmann::json to_json(const RiccatiSolution& sol) {
    return {
        {"format", "heatrisk.riccati/1"},
        {"P", matrix_to_json(sol.P)},
        {"K", std::vector<double>(sol.K.data(), sol.K.data() + sol.K.size())},
        {"residual", sol.residual},
        {"iterations", sol.iterations},
    };
}

}  // namespace heatrisk
