#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace heatrisk {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key);
};

/// SplitMix64 finalizer; used to derive per-iteration seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Brownian increments dW ~ Normal(0, dt) for S samples over M steps.
///
/// Sample s draws from the Philox stream keyed by the seed with the sample
/// index in the counter, so row s is the same regardless of how samples are
/// partitioned across workers or how many samples the bank holds.
class NoiseBank {
public:
    NoiseBank(std::uint64_t seed, std::size_t samples, std::size_t steps, double horizon);

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::size_t samples() const { return samples_; }
    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] double dt() const { return horizon_ / static_cast<double>(steps_); }

    /// Fills out[0..steps) with the increments of sample s.
    void increments(std::size_t sample, std::span<double> out) const;

    /// Standard normals for sample s (unit variance).
    void standard_normals(std::size_t sample, std::span<double> out) const;

private:
    std::uint64_t seed_;
    std::size_t samples_;
    std::size_t steps_;
    double horizon_;
};

}  // namespace heatrisk
