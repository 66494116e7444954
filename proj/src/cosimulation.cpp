#include "heatrisk/cosimulation.hpp"

#include "heatrisk/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace heatrisk {

namespace {

// Factorized (I - dt L) for the ghost-point Robin Laplacian on J nodes.
class ImplicitDiffusion {
public:
    ImplicitDiffusion(std::size_t J, double dt, double beta0, double beta1) : J_(J), c_(J), d_(J) {
        const double h = 1.0 / static_cast<double>(J - 1);
        const double k = dt / (h * h);
        std::vector<double> lower(J, -k), diag(J, 1.0 + 2.0 * k), upper(J, -k);
        diag[0] = 1.0 + 2.0 * k * (1.0 + h * beta0);
        upper[0] = -2.0 * k;
        diag[J - 1] = 1.0 + 2.0 * k * (1.0 + h * beta1);
        lower[J - 1] = -2.0 * k;
        lower_ = lower;
        // Thomas forward sweep on the constant matrix.
        c_[0] = upper[0] / diag[0];
        d_[0] = diag[0];
        for (std::size_t j = 1; j < J; ++j) {
            d_[j] = diag[j] - lower[j] * c_[j - 1];
            if (!(std::abs(d_[j]) > 1e-300)) throw NumericalError("implicit diffusion matrix is singular");
            c_[j] = j + 1 < J ? upper[j] / d_[j] : 0.0;
        }
    }

    void solve(std::vector<double>& rhs) const {
        rhs[0] /= d_[0];
        for (std::size_t j = 1; j < J_; ++j) rhs[j] = (rhs[j] - lower_[j] * rhs[j - 1]) / d_[j];
        for (std::size_t j = J_ - 1; j-- > 0;) rhs[j] -= c_[j] * rhs[j + 1];
    }

private:
    std::size_t J_;
    std::vector<double> c_, d_, lower_;
};

// <f, phi_n>_{H^1} from nodal values using integration by parts against the
// eigenfunction: (1 + lambda) int f phi - beta1 f(1) phi(1) - beta0 f(0) phi(0).
class NodalProjector {
public:
    NodalProjector(const EigenBasis& basis, std::size_t J) : basis_(&basis), weights_(basis.size(), std::vector<double>(J)) {
        const double h = 1.0 / static_cast<double>(J - 1);
        for (std::size_t n = 0; n < basis.size(); ++n) {
            for (std::size_t j = 0; j < J; ++j) {
                const double x = static_cast<double>(j) * h;
                const double w = (j == 0 || j + 1 == J) ? 0.5 * h : h;
                weights_[n][j] = (1.0 + basis.lambdas[n]) * w * basis.funcs[n].value(x);
            }
        }
    }

    Eigen::VectorXd coefficients(const std::vector<double>& f) const {
        const auto& b = *basis_;
        Eigen::VectorXd inner(static_cast<Eigen::Index>(b.size()));
        for (std::size_t n = 0; n < b.size(); ++n) {
            double acc = 0.0;
            for (std::size_t j = 0; j < f.size(); ++j) acc += weights_[n][j] * f[j];
            acc -= b.params.beta1 * f.back() * b.trace1[n] + b.params.beta0 * f.front() * b.trace0[n];
            inner(static_cast<Eigen::Index>(n)) = acc;
        }
        return b.solve_gram(inner);
    }

private:
    const EigenBasis* basis_;
    std::vector<std::vector<double>> weights_;
};

struct LoopClosure {
    const EigenBasis* basis;
    std::vector<double> theta;  // nodal lifter values
    std::vector<double> psi;
    NodalProjector projector;
    const FeedbackPolicy* policy;
};

CosimResult run_cosim(const CoupledSystemSpec& spec, std::span<const double> V_path, const NoiseBank& noise,
                      const TimeGrid& grid, const PhysicalCost& cost, const CosimOptions& options,
                      const LoopClosure* loop) {
    spec.validate();
    grid.validate();
    const std::size_t J = options.space_points;
    if (J < 64) throw InvalidArgument("co-simulation needs at least 64 space points");
    if (noise.steps() != grid.steps) throw InvalidArgument("noise bank does not match the time grid");
    if (!loop && V_path.size() != grid.steps + 1) throw InvalidArgument("V path must have steps + 1 values");
    const Eigen::Index d = spec.d();
    if (cost.Q.rows() != d || cost.G.rows() != d) throw InvalidArgument("physical cost has wrong dimension");

    const std::size_t S = noise.samples();
    const std::size_t M = grid.steps;
    const double dt = grid.dt();
    const double h = 1.0 / static_cast<double>(J - 1);
    const double mu = spec.robin.mu;
    const ImplicitDiffusion solver(J, dt, spec.robin.beta0, spec.robin.beta1);

    std::vector<std::size_t> snaps = options.snapshot_steps;
    snaps.push_back(M);
    std::sort(snaps.begin(), snaps.end());
    snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

    CosimResult out;
    out.samples = S;
    out.steps = M;
    out.d = d;
    out.space_points = J;
    out.snapshot_steps = snaps;
    out.X.assign(S * (M + 1) * static_cast<std::size_t>(d), 0.0);
    out.V.assign(S * (M + 1), 0.0);
    out.u.assign(S * snaps.size(), {});
    out.costs.assign(S, 0.0);

    std::vector<double> u_init(J);
    for (std::size_t j = 0; j < J; ++j) u_init[j] = spec.u0.value(static_cast<double>(j) * h);

    std::vector<Eigen::VectorXd> r_at(M), s_at(M);
    for (std::size_t m = 0; m < M; ++m) {
        r_at[m] = spec.r_drift.at(grid.time(m));
        s_at[m] = spec.sigma_drift.at(grid.time(m));
    }

    const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
    std::vector<char> failed(S, 0);

#pragma omp parallel for schedule(static) num_threads(workers)
    for (std::ptrdiff_t sp = 0; sp < static_cast<std::ptrdiff_t>(S); ++sp) {
        const auto s = static_cast<std::size_t>(sp);
        std::vector<double> dW(M);
        noise.increments(s, dW);
        std::vector<double> u = u_init, rhs(J), zbuf(J);
        Eigen::VectorXd X = spec.X0;
        double V = loop ? spec.V0 : V_path[0];
        double running = 0.0;
        std::size_t snap_k = 0;
        const Eigen::Index n_aug = d + 1 + (loop ? static_cast<Eigen::Index>(loop->basis->size()) : 0);
        Eigen::VectorXd Z(n_aug);

        auto record = [&](std::size_t m) {
            for (Eigen::Index i = 0; i < d; ++i) out.X[(s * (M + 1) + m) * static_cast<std::size_t>(d) + static_cast<std::size_t>(i)] = X(i);
            out.V[s * (M + 1) + m] = V;
            if (snap_k < snaps.size() && snaps[snap_k] == m) out.u[s * snaps.size() + snap_k++] = u;
        };
        record(0);

        for (std::size_t m = 0; m < M; ++m) {
            const double u0 = u[0];
            double V_next = 0.0;
            double U = 0.0;
            if (loop) {
                const double mx = (spec.M * X)(0);
                for (std::size_t j = 0; j < J; ++j) zbuf[j] = u[j] - loop->theta[j] * V - loop->psi[j] * mx;
                Z.head(d) = X;
                Z(d) = V;
                Z.tail(n_aug - d - 1) = loop->projector.coefficients(zbuf);
                U = loop->policy->v[m] + loop->policy->K.dot(Z);
                V_next = V + (mu * V + U) * dt;
            } else {
                V_next = V_path[m + 1];
                U = (V_next - V) / dt - mu * V;
            }
            running += (X.dot(cost.Q * X) + cost.r_ctrl * V * V + cost.r_ctrl * U * U) * dt;

            const Eigen::VectorXd drift = spec.A * X + spec.B * u0 + r_at[m];
            const Eigen::VectorXd diff = spec.C * X + spec.D * u0 + s_at[m];
            X = X + drift * dt + diff * dW[m];

            const double g0 = (spec.M * X)(0);
            for (std::size_t j = 0; j < J; ++j) rhs[j] = u[j] * (1.0 + dt * spec.robin.c);
            rhs[0] -= 2.0 * dt * g0 / h;
            rhs[J - 1] += 2.0 * dt * V_next / h;
            solver.solve(rhs);
            u.swap(rhs);
            V = V_next;
            record(m + 1);
        }
        running += X.dot(cost.G * X);
        out.costs[s] = running;
        if (!std::isfinite(running) || !std::all_of(u.begin(), u.end(), [](double x) { return std::isfinite(x); })) {
            failed[s] = 1;
        }
    }
    for (std::size_t s = 0; s < S; ++s) {
        if (failed[s]) throw NumericalError("co-simulation produced a non-finite state in sample " + std::to_string(s));
    }
    return out;
}

}  // namespace

CosimResult cosimulate_original(const CoupledSystemSpec& spec, std::span<const double> V_path, const NoiseBank& noise,
                                const TimeGrid& grid, const PhysicalCost& cost, const CosimOptions& options) {
    return run_cosim(spec, V_path, noise, grid, cost, options, nullptr);
}

CosimResult cosimulate_closed_loop(const CoupledSystemSpec& spec, const EigenBasis& basis,
                                   const BoundaryLifter& actuation, const BoundaryLifter& sde,
                                   const FeedbackPolicy& policy, const NoiseBank& noise, const TimeGrid& grid,
                                   const PhysicalCost& cost, const CosimOptions& options) {
    if (!(spec.robin == basis.params)) throw InvalidArgument("basis and spec use different Robin parameters");
    if (policy.v.size() != grid.steps) throw InvalidArgument("policy does not match the time grid");
    if (policy.K.size() != spec.d() + 1 + static_cast<Eigen::Index>(basis.size())) {
        throw InvalidArgument("policy gain does not match the reduced dimension");
    }
    const std::size_t J = std::max<std::size_t>(options.space_points, 2);
    LoopClosure loop{&basis, std::vector<double>(J), std::vector<double>(J), NodalProjector(basis, J), &policy};
    const auto theta = actuation.function();
    const auto psi = sde.function();
    for (std::size_t j = 0; j < J; ++j) {
        const double x = static_cast<double>(j) / static_cast<double>(J - 1);
        loop.theta[j] = theta.value(x);
        loop.psi[j] = psi.value(x);
    }
    return run_cosim(spec, {}, noise, grid, cost, options, &loop);
}

}  // namespace heatrisk
