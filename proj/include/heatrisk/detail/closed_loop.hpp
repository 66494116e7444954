#pragma once

// Sample-block kernels shared by the simulator and the adjoint gradient pass.
// Samples are processed in fixed blocks of kBlock so that every per-sample
// result is independent of the worker count.

#include "heatrisk/noise.hpp"
#include "heatrisk/reduction.hpp"
#include "heatrisk/simulation.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace heatrisk::detail {

inline constexpr std::size_t kBlock = 32;

struct Entry {
    int row;
    int col;
    double value;
};

std::vector<Entry> nonzeros(const Eigen::MatrixXd& m);

/// Closed-loop data flattened for the block kernels.
struct ClosedLoop {
    int n = 0;
    std::size_t steps = 0;
    double dt = 0.0;
    double r_ctrl = 0.0;
    std::vector<Entry> F;  ///< Delta + A + B K
    std::vector<Entry> C;
    std::vector<Entry> Q;
    std::vector<Entry> G;
    std::vector<double> B;
    std::vector<double> K;
    std::vector<double> Z0;
    std::vector<double> v;
    std::vector<double> drift;      ///< [m][i] = r(t_m)_i
    std::vector<double> diffusion;  ///< [m][i] = sigma(t_m)_i

    ClosedLoop(const ReducedModel& model, const FeedbackPolicy& policy, const TimeGrid& grid);
};

/// Structure-of-arrays storage for one block of samples.
struct BlockPaths {
    std::size_t first = 0;
    std::size_t count = 0;
    std::vector<double> Z;   ///< [m][i][j], only when paths are kept
    std::vector<double> U;   ///< [m][j], only when paths are kept
    std::vector<double> dW;  ///< [m][j]
    std::array<double, kBlock> cost{};

};

/// Simulates samples [first, first + count), count <= kBlock.
void run_block(const ClosedLoop& sys, const NoiseBank& noise, std::size_t first, std::size_t count, bool keep_paths,
               BlockPaths& out);

/// Number of kBlock-sized blocks covering `samples`.
inline std::size_t block_count(std::size_t samples) { return (samples + kBlock - 1) / kBlock; }

/// Scans stored block paths for the first non-finite state; returns {sample, step}.
std::pair<std::size_t, std::size_t> first_non_finite(const ClosedLoop& sys, const BlockPaths& paths);

}  // namespace heatrisk::detail
