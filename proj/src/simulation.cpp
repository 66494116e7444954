#include "heatrisk/simulation.hpp"

#include "heatrisk/detail/closed_loop.hpp"
#include "heatrisk/error.hpp"

#include <omp.h>

#include <cmath>
#include <sstream>

namespace heatrisk {

void TimeGrid::validate() const {
    if (!(T > 0.0) || steps == 0) throw InvalidArgument("time grid needs T > 0 and at least one step");
}

FeedbackPolicy FeedbackPolicy::zero(std::size_t steps, Eigen::Index n_aug, Interval box_v, Interval box_K) {
    FeedbackPolicy p;
    p.v.assign(steps, 0.0);
    p.K = Eigen::RowVectorXd::Zero(n_aug);
    p.box_v = box_v;
    p.box_K = box_K;
    return p;
}

bool FeedbackPolicy::feasible() const {
    for (const double x : v) {
        if (!box_v.contains(x)) return false;
    }
    for (Eigen::Index i = 0; i < K.size(); ++i) {
        if (!box_K.contains(K(i))) return false;
    }
    return true;
}

bool FeedbackPolicy::project() {
    bool moved = false;
    for (double& x : v) {
        const double c = box_v.clip(x);
        moved |= c != x;
        x = c;
    }
    for (Eigen::Index i = 0; i < K.size(); ++i) {
        const double c = box_K.clip(K(i));
        moved |= c != K(i);
        K(i) = c;
    }
    return moved;
}

nlohmann::json to_json(const FeedbackPolicy& policy, const TimeGrid& grid) {
    return {
        {"format", "heatrisk.policy/1"},
        {"T", grid.T},
        {"steps", grid.steps},
        {"v", policy.v},
        {"K", std::vector<double>(policy.K.data(), policy.K.data() + policy.K.size())},
        {"box_v", {policy.box_v.lo, policy.box_v.hi}},
        {"box_K", {policy.box_K.lo, policy.box_K.hi}},
    };
}

FeedbackPolicy policy_from_json(const nlohmann::json& j) {
    try {
        FeedbackPolicy p;
        p.v = j.at("v").get<std::vector<double>>();
        const auto k = j.at("K").get<std::vector<double>>();
        p.K = Eigen::Map<const Eigen::RowVectorXd>(k.data(), static_cast<Eigen::Index>(k.size()));
        const auto bv = j.at("box_v").get<std::vector<double>>();
        const auto bk = j.at("box_K").get<std::vector<double>>();
        if (bv.size() != 2 || bk.size() != 2) throw ConfigError("policy boxes must be [lo, hi]");
        p.box_v = {bv[0], bv[1]};
        p.box_K = {bk[0], bk[1]};
        if (p.v.size() != j.at("steps").get<std::size_t>()) throw ConfigError("policy: v length differs from steps");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("policy JSON: ") + e.what());
    }
}

void check_compatible(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                      const TimeGrid& grid) {
    grid.validate();
    model.validate();
    if (policy.v.size() != grid.steps) throw InvalidArgument("policy open-loop term does not match the time grid");
    if (policy.K.size() != model.n_aug()) throw InvalidArgument("policy gain does not match the model dimension");
    if (noise.steps() != grid.steps) throw InvalidArgument("noise bank step count does not match the time grid");
    if (std::abs(noise.horizon() - grid.T) > 1e-12 * grid.T) throw InvalidArgument("noise bank horizon differs from grid");
    if (std::abs(model.T - grid.T) > 1e-12 * grid.T) throw InvalidArgument("model horizon differs from grid");
}

namespace detail {

std::vector<Entry> nonzeros(const Eigen::MatrixXd& m) {
    std::vector<Entry> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            if (m(i, k) != 0.0) out.push_back({static_cast<int>(i), static_cast<int>(k), m(i, k)});
        }
    }
    return out;
}

ClosedLoop::ClosedLoop(const ReducedModel& model, const FeedbackPolicy& policy, const TimeGrid& grid)
    : n(static_cast<int>(model.n_aug())), steps(grid.steps), dt(grid.dt()), r_ctrl(model.r_ctrl) {
    const Eigen::MatrixXd closed = model.drift_matrix() + model.B * policy.K;
    F = nonzeros(closed);
    C = nonzeros(model.C);
    Q = nonzeros(model.Q);
    G = nonzeros(model.G);
    B.assign(model.B.data(), model.B.data() + n);
    K.assign(policy.K.data(), policy.K.data() + n);
    Z0.assign(model.Z0.data(), model.Z0.data() + n);
    v = policy.v;
    drift.resize(steps * static_cast<std::size_t>(n));
    diffusion.resize(steps * static_cast<std::size_t>(n));
    for (std::size_t m = 0; m < steps; ++m) {
        const double t = grid.time(m);
        const Eigen::VectorXd r = model.r.at(t);
        const Eigen::VectorXd s = model.sigma.at(t);
        for (int i = 0; i < n; ++i) {
            drift[m * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = r(i);
            diffusion[m * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = s(i);
        }
    }
}

void run_block(const ClosedLoop& sys, const NoiseBank& noise, std::size_t first, std::size_t count, bool keep_paths,
               BlockPaths& out) {
    const auto n = static_cast<std::size_t>(sys.n);
    const std::size_t M = sys.steps;
    const double dt = sys.dt;
    constexpr std::size_t W = kBlock;

    out.first = first;
    out.count = count;
    out.dW.assign(M * W, 0.0);
    std::vector<double> row(M);
    for (std::size_t j = 0; j < count; ++j) {
        noise.increments(first + j, row);
        for (std::size_t m = 0; m < M; ++m) out.dW[m * W + j] = row[m];
    }
    if (keep_paths) {
        out.Z.assign((M + 1) * n * W, 0.0);
        out.U.assign(M * W, 0.0);
    } else {
        out.Z.clear();
        out.U.clear();
    }
    std::vector<double> roll_a(keep_paths ? 0 : n * W), roll_b(keep_paths ? 0 : n * W);

    double* cur = keep_paths ? out.Z.data() : roll_a.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < W; ++j) cur[i * W + j] = j < count ? sys.Z0[i] : 0.0;
    }

    std::array<double, W> cost{};
    std::array<double, W> u{};
    std::array<double, W> quad{};
    for (std::size_t m = 0; m < M; ++m) {
        double* next = keep_paths ? out.Z.data() + (m + 1) * n * W : (cur == roll_a.data() ? roll_b.data() : roll_a.data());
        const double* dW = out.dW.data() + m * W;
        const double vm = sys.v[m];

        for (std::size_t j = 0; j < W; ++j) u[j] = vm;
        for (std::size_t i = 0; i < n; ++i) {
            const double k = sys.K[i];
            for (std::size_t j = 0; j < W; ++j) u[j] += k * cur[i * W + j];
        }
        quad.fill(0.0);
        for (const auto& e : sys.Q) {
            const double* zr = cur + static_cast<std::size_t>(e.row) * W;
            const double* zc = cur + static_cast<std::size_t>(e.col) * W;
            for (std::size_t j = 0; j < W; ++j) quad[j] += e.value * zr[j] * zc[j];
        }
        for (std::size_t j = 0; j < W; ++j) cost[j] += (quad[j] + sys.r_ctrl * u[j] * u[j]) * dt;
        if (keep_paths) {
            for (std::size_t j = 0; j < W; ++j) out.U[m * W + j] = u[j];
        }

        const double* drift = sys.drift.data() + m * n;
        const double* diff = sys.diffusion.data() + m * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double base = (drift[i] + sys.B[i] * vm) * dt;
            for (std::size_t j = 0; j < W; ++j) next[i * W + j] = cur[i * W + j] + base + diff[i] * dW[j];
        }
        for (const auto& e : sys.F) {
            double* zr = next + static_cast<std::size_t>(e.row) * W;
            const double* zc = cur + static_cast<std::size_t>(e.col) * W;
            const double a = e.value * dt;
            for (std::size_t j = 0; j < W; ++j) zr[j] += a * zc[j];
        }
        for (const auto& e : sys.C) {
            double* zr = next + static_cast<std::size_t>(e.row) * W;
            const double* zc = cur + static_cast<std::size_t>(e.col) * W;
            for (std::size_t j = 0; j < W; ++j) zr[j] += e.value * zc[j] * dW[j];
        }
        cur = next;
    }
    quad.fill(0.0);
    for (const auto& e : sys.G) {
        const double* zr = cur + static_cast<std::size_t>(e.row) * W;
        const double* zc = cur + static_cast<std::size_t>(e.col) * W;
        for (std::size_t j = 0; j < W; ++j) quad[j] += e.value * zr[j] * zc[j];
    }
    for (std::size_t j = 0; j < W; ++j) out.cost[j] = cost[j] + quad[j];
}

std::pair<std::size_t, std::size_t> first_non_finite(const ClosedLoop& sys, const BlockPaths& paths) {
    const auto n = static_cast<std::size_t>(sys.n);
    for (std::size_t m = 0; m <= sys.steps; ++m) {
        for (std::size_t j = 0; j < paths.count; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(paths.Z[(m * n + i) * kBlock + j])) return {paths.first + j, m};
            }
        }
    }
    return {paths.first, sys.steps};
}

}  // namespace detail

namespace {

[[noreturn]] void report_overflow(const detail::ClosedLoop& sys, const NoiseBank& noise, std::size_t first,
                                  std::size_t count) {
    detail::BlockPaths paths;
    detail::run_block(sys, noise, first, count, true, paths);
    const auto [sample, step] = detail::first_non_finite(sys, paths);
    std::ostringstream msg;
    msg << "non-finite state in sample " << sample << " at step " << step
        << " (unstable parameters or step size too large)";
    throw NumericalError(msg.str());
}

}  // namespace

TrajectoryBatch simulate_batch(const ReducedModel& model, const FeedbackPolicy& policy, const NoiseBank& noise,
                               const TimeGrid& grid, const SimulationOptions& options) {
    check_compatible(model, policy, noise, grid);
    const detail::ClosedLoop sys(model, policy, grid);
    const std::size_t S = noise.samples();
    const std::size_t M = grid.steps;
    const auto n = static_cast<std::size_t>(sys.n);
    const bool keep = options.store_paths || options.with_fundamental;

    TrajectoryBatch batch;
    batch.samples = S;
    batch.steps = M;
    batch.n = model.n_aug();
    batch.costs.assign(S, 0.0);
    if (keep) {
        batch.Z.assign(S * (M + 1) * n, 0.0);
        batch.U.assign(S * M, 0.0);
    }
    if (options.with_fundamental) batch.Phi.assign(S * (M + 1) * n * n, 0.0);

    const Eigen::MatrixXd closed = model.drift_matrix() + model.B * policy.K;
    const auto blocks = static_cast<std::ptrdiff_t>(detail::block_count(S));
    std::vector<char> failed(static_cast<std::size_t>(blocks), 0);
    const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();

#pragma omp parallel for schedule(static) num_threads(workers)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        const std::size_t first = static_cast<std::size_t>(b) * detail::kBlock;
        const std::size_t count = std::min(detail::kBlock, S - first);
        detail::BlockPaths paths;
        detail::run_block(sys, noise, first, count, keep, paths);
        for (std::size_t j = 0; j < count; ++j) {
            batch.costs[first + j] = paths.cost[j];
            if (!std::isfinite(paths.cost[j])) failed[static_cast<std::size_t>(b)] = 1;
        }
        if (!keep) continue;
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t s = first + j;
            for (std::size_t m = 0; m <= M; ++m) {
                for (std::size_t i = 0; i < n; ++i) {
                    batch.Z[(s * (M + 1) + m) * n + i] = paths.Z[(m * n + i) * detail::kBlock + j];
                }
            }
            for (std::size_t m = 0; m < M; ++m) batch.U[s * M + m] = paths.U[m * detail::kBlock + j];
        }
        if (!options.with_fundamental) continue;
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const double dt = grid.dt();
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t s = first + j;
            RowMat phi = RowMat::Identity(sys.n, sys.n);
            const std::size_t nn = n * n;
            std::copy(phi.data(), phi.data() + nn, batch.Phi.begin() + static_cast<std::ptrdiff_t>(s * (M + 1) * nn));
            for (std::size_t m = 0; m < M; ++m) {
                const double dw = paths.dW[m * detail::kBlock + j];
                phi = (phi + closed * phi * dt + model.C * phi * dw).eval();
                std::copy(phi.data(), phi.data() + nn,
                          batch.Phi.begin() + static_cast<std::ptrdiff_t>((s * (M + 1) + m + 1) * nn));
            }
        }
    }

    for (std::ptrdiff_t b = 0; b < blocks; ++b) {
        if (failed[static_cast<std::size_t>(b)] == 0) continue;
        const std::size_t first = static_cast<std::size_t>(b) * detail::kBlock;
        report_overflow(sys, noise, first, std::min(detail::kBlock, S - first));
    }
    return batch;
}

std::vector<double> evaluate_cost(const TrajectoryBatch& batch, const ReducedModel& model) {
    if (!batch.has_paths()) throw InvalidArgument("evaluate_cost needs stored paths");
    if (batch.n != model.n_aug()) throw InvalidArgument("batch and model dimensions differ");
    const auto Q = detail::nonzeros(model.Q);
    const auto G = detail::nonzeros(model.G);
    const double dt = model.T / static_cast<double>(batch.steps);
    std::vector<double> costs(batch.samples, 0.0);
    for (std::size_t s = 0; s < batch.samples; ++s) {
        double acc = 0.0;
        for (std::size_t m = 0; m < batch.steps; ++m) {
            const auto z = batch.state(s, m);
            double quad = 0.0;
            for (const auto& e : Q) quad += e.value * z(e.row) * z(e.col);
            const double u = batch.control(s, m);
            acc += (quad + model.r_ctrl * u * u) * dt;
        }
        const auto zT = batch.state(s, batch.steps);
        double quad = 0.0;
        for (const auto& e : G) quad += e.value * zT(e.row) * zT(e.col);
        costs[s] = acc + quad;
    }
    return costs;
}

}  // namespace heatrisk
