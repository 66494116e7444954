#include "heatrisk/noise.hpp"

#include "heatrisk/error.hpp"

#include <cmath>
#include <numbers>

namespace heatrisk {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform in (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

NoiseBank::NoiseBank(std::uint64_t seed, std::size_t samples, std::size_t steps, double horizon)
    : seed_(seed), samples_(samples), steps_(steps), horizon_(horizon) {
    if (samples == 0 || steps == 0) throw InvalidArgument("noise bank needs at least one sample and one step");
    if (!(horizon > 0.0)) throw InvalidArgument("noise bank horizon must be positive");
}

void NoiseBank::standard_normals(std::size_t sample, std::span<double> out) const {
    if (sample >= samples_) throw InvalidArgument("noise bank sample index out of range");
    if (out.size() < steps_) throw InvalidArgument("noise buffer shorter than the step count");
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
    const auto s64 = static_cast<std::uint64_t>(sample);
    for (std::size_t m = 0; m < steps_; m += 2) {
        const auto block = static_cast<std::uint64_t>(m / 2);
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                      static_cast<std::uint32_t>(s64), static_cast<std::uint32_t>(s64 >> 32)};
        const auto r = Philox4x32::apply(ctr, key);
        const double u1 = to_open_unit(r[0], r[1]);
        const double u2 = to_open_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[m] = radius * std::cos(angle);
        if (m + 1 < steps_) out[m + 1] = radius * std::sin(angle);
    }
}

void NoiseBank::increments(std::size_t sample, std::span<double> out) const {
    standard_normals(sample, out);
    const double scale = std::sqrt(dt());
    for (std::size_t m = 0; m < steps_; ++m) out[m] *= scale;
}

}  // namespace heatrisk
