#include "heatrisk/gradient.hpp"

#include "heatrisk/detail/closed_loop.hpp"
#include "heatrisk/error.hpp"

#include <omp.h>

#include <cmath>
#include <sstream>

namespace heatrisk {

double GradientPair::norm_v(double dt) const {
    double acc = 0.0;
    for (const double g : grad_v) acc += g * g;
    return std::sqrt(acc * dt);
}

GradientPair compute_gradients(const ReducedModel& model, const FeedbackPolicy& policy, const TrajectoryBatch& batch,
                               std::span<const double> weights) {
    if (!batch.has_fundamental()) throw InvalidArgument("compute_gradients needs fundamental matrices in the batch");
    if (weights.size() != batch.samples) throw InvalidArgument("one weight per sample is required");
    if (batch.n != model.n_aug() || policy.K.size() != model.n_aug()) throw InvalidArgument("dimension mismatch");

    const Eigen::Index n = batch.n;
    const std::size_t M = batch.steps;
    const double dt = model.T / static_cast<double>(M);
    const double r = model.r_ctrl;
    const double scale = 1.0 / static_cast<double>(batch.samples);

    GradientPair out;
    out.grad_v.assign(M, 0.0);
    out.grad_K = Eigen::RowVectorXd::Zero(n);
    std::vector<double> gU(M);

    for (std::size_t s = 0; s < batch.samples; ++s) {
        const double w = weights[s] * scale;
        Eigen::RowVectorXd I = 2.0 * batch.state(s, M).transpose() * model.G * batch.fundamental(s, M);
        Eigen::RowVectorXd gK = Eigen::RowVectorXd::Zero(n);
        for (std::size_t m = M; m-- > 0;) {
            const auto phi_next = batch.fundamental(s, m + 1);
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(phi_next.transpose());
            const double rcond = lu.rcond();
            if (!(rcond > 1e-14)) {
                std::ostringstream msg;
                msg << "fundamental matrix ill-conditioned at sample " << s << ", step " << m + 1
                    << " (reciprocal condition estimate " << rcond << ")";
                throw NumericalError(msg.str());
            }
            const Eigen::RowVectorXd p = lu.solve(I.transpose()).transpose();
            const auto z = batch.state(s, m);
            const double u = batch.control(s, m);
            const double g = 2.0 * r * u + p.dot(model.B);
            gU[m] = g;
            gK += g * z.transpose() * dt;
            I += (2.0 * z.transpose() * model.Q + 2.0 * r * u * policy.K) * batch.fundamental(s, m) * dt;
        }
        for (std::size_t m = 0; m < M; ++m) out.grad_v[m] += w * gU[m];
        out.grad_K += w * gK;
    }
    return out;
}

namespace {

void backward_block(const detail::ClosedLoop& sys, const detail::BlockPaths& paths, std::size_t steps,
                    std::vector<double>& grad_v, std::vector<double>& grad_K) {
    constexpr std::size_t W = detail::kBlock;
    const auto n = static_cast<std::size_t>(sys.n);
    const double dt = sys.dt;
    const double r = sys.r_ctrl;
    std::vector<double> p(n * W, 0.0), next(n * W, 0.0), gk(n * W, 0.0);
    std::array<double, W> g{};

    const double* zT = paths.Z.data() + steps * n * W;
    for (const auto& e : sys.G) {
        for (std::size_t j = 0; j < W; ++j) p[static_cast<std::size_t>(e.col) * W + j] += 2.0 * e.value * zT[static_cast<std::size_t>(e.row) * W + j];
    }
    for (std::size_t m = steps; m-- > 0;) {
        const double* z = paths.Z.data() + m * n * W;
        const double* u = paths.U.data() + m * W;
        const double* dW = paths.dW.data() + m * W;
        // p currently holds p_{m+1}.
        for (std::size_t j = 0; j < W; ++j) g[j] = 2.0 * r * u[j];
        for (std::size_t i = 0; i < n; ++i) {
            const double b = sys.B[i];
            if (b == 0.0) continue;
            for (std::size_t j = 0; j < W; ++j) g[j] += b * p[i * W + j];
        }
        for (std::size_t j = 0; j < paths.count; ++j) grad_v[j * steps + m] = g[j];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < W; ++j) gk[i * W + j] += g[j] * z[i * W + j] * dt;
        }

        next = p;
        for (const auto& e : sys.F) {
            const double a = e.value * dt;
            double* out = next.data() + static_cast<std::size_t>(e.col) * W;
            const double* in = p.data() + static_cast<std::size_t>(e.row) * W;
            for (std::size_t j = 0; j < W; ++j) out[j] += a * in[j];
        }
        for (const auto& e : sys.C) {
            double* out = next.data() + static_cast<std::size_t>(e.col) * W;
            const double* in = p.data() + static_cast<std::size_t>(e.row) * W;
            for (std::size_t j = 0; j < W; ++j) out[j] += e.value * in[j] * dW[j];
        }
        for (const auto& e : sys.Q) {
            double* out = next.data() + static_cast<std::size_t>(e.col) * W;
            const double* zc = z + static_cast<std::size_t>(e.row) * W;
            const double a = 2.0 * e.value * dt;
            for (std::size_t j = 0; j < W; ++j) out[j] += a * zc[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double a = 2.0 * r * sys.K[i] * dt;
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < W; ++j) next[i * W + j] += a * u[j];
        }
        p.swap(next);
    }
    for (std::size_t j = 0; j < paths.count; ++j) {
        for (std::size_t i = 0; i < n; ++i) grad_K[j * n + i] = gk[i * W + j];
    }
}

}  // namespace

SampleGradients sample_gradients(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                                 const TimeGrid& grid, int workers) {
    check_compatible(model, policy, noise, grid);
    const detail::ClosedLoop sys(model, policy, grid);
    const std::size_t S = noise.samples();
    const std::size_t M = grid.steps;
    const auto n = static_cast<std::size_t>(sys.n);

    SampleGradients out;
    out.samples = S;
    out.steps = M;
    out.n = model.n_aug();
    out.costs.assign(S, 0.0);
    out.grad_v.assign(S * M, 0.0);
    out.grad_K.assign(S * n, 0.0);

    const auto blocks = static_cast<std::ptrdiff_t>(detail::block_count(S));
    std::vector<char> failed(static_cast<std::size_t>(blocks), 0);
    const int threads = workers > 0 ? workers : omp_get_max_threads();

#pragma omp parallel num_threads(threads)
    {
        detail::BlockPaths paths;
        std::vector<double> gv(detail::kBlock * M), gk(detail::kBlock * n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t b = 0; b < blocks; ++b) {
            const std::size_t first = static_cast<std::size_t>(b) * detail::kBlock;
            const std::size_t count = std::min(detail::kBlock, S - first);
            detail::run_block(sys, noise, first, count, true, paths);
            bool ok = true;
            for (std::size_t j = 0; j < count; ++j) {
                out.costs[first + j] = paths.cost[j];
                ok &= std::isfinite(paths.cost[j]);
            }
            if (!ok) {
                failed[static_cast<std::size_t>(b)] = 1;
                continue;
            }
            backward_block(sys, paths, M, gv, gk);
            std::copy(gv.begin(), gv.begin() + static_cast<std::ptrdiff_t>(count * M),
                      out.grad_v.begin() + static_cast<std::ptrdiff_t>(first * M));
            std::copy(gk.begin(), gk.begin() + static_cast<std::ptrdiff_t>(count * n),
                      out.grad_K.begin() + static_cast<std::ptrdiff_t>(first * n));
        }
    }
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        if (!failed[static_cast<std::size_t>(b)]) continue;
        const std::size_t first = static_cast<std::size_t>(b) * detail::kBlock;
        detail::BlockPaths paths;
        detail::run_block(sys, noise, first, std::min(detail::kBlock, S - first), true, paths);
        const auto [sample, step] = detail::first_non_finite(sys, paths);
        throw NumericalError("non-finite state in sample " + std::to_string(sample) + " at step " +
                             std::to_string(step) + " during the gradient sweep");
    }
    return out;
}

GradientPair combine(const SampleGradients& g, std::span<const double> weights) {
    if (weights.size() != g.samples) throw InvalidArgument("one weight per sample is required");
    const auto n = static_cast<std::size_t>(g.n);
    const double scale = 1.0 / static_cast<double>(g.samples);
    GradientPair out;
    out.grad_v.assign(g.steps, 0.0);
    out.grad_K = Eigen::RowVectorXd::Zero(g.n);
    for (std::size_t s = 0; s < g.samples; ++s) {
        const double w = weights[s] * scale;
        if (w == 0.0) continue;
        const double* gv = g.grad_v.data() + s * g.steps;
        for (std::size_t m = 0; m < g.steps; ++m) out.grad_v[m] += w * gv[m];
        for (std::size_t i = 0; i < n; ++i) out.grad_K(static_cast<Eigen::Index>(i)) += w * g.grad_K[s * n + i];
    }
    return out;
}

}  // namespace heatrisk
