#include "heatrisk/risk.hpp"

#include "heatrisk/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace heatrisk {

void RiskSpec::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("risk level alpha must lie in (0, 1]");
    if (!(gamma >= 0.0)) throw InvalidArgument("risk regularization gamma must be nonnegative");
}

double mean(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("mean of an empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double cvar_estimate(std::span<const double> costs, double alpha) {
    if (costs.empty()) throw InvalidArgument("CVaR of an empty sample");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("CVaR level alpha must lie in (0, 1]");
    if (alpha == 1.0) return mean(costs);
    std::vector<double> sorted(costs.begin(), costs.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double mass = alpha * static_cast<double>(sorted.size());
    double acc = 0.0;
    double remaining = mass;
    for (const double c : sorted) {
        if (remaining <= 0.0) break;
        const double w = std::min(1.0, remaining);
        acc += w * c;
        remaining -= w;
    }
    return acc / mass;
}

std::vector<double> project_risk_weights(std::span<const double> y, double alpha) {
    if (y.empty()) throw InvalidArgument("cannot project an empty weight vector");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("risk level alpha must lie in (0, 1]");
    const double cap = 1.0 / alpha;
    const double S = static_cast<double>(y.size());
    auto mean_at = [&](double tau) {
        double acc = 0.0;
        for (const double v : y) acc += std::clamp(v + tau, 0.0, cap);
        return acc / S;
    };
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    double lo = -*ymax;        // mean_at(lo) <= 1
    double hi = cap - *ymin;   // mean_at(hi) = cap >= 1
    for (int it = 0; it < 400 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_at(mid) < 1.0 ? lo : hi) = mid;
    }
    const double tau = 0.5 * (lo + hi);
    std::vector<double> zeta(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) zeta[i] = std::clamp(y[i] + tau, 0.0, cap);

    // Polish: every entry that can be free somewhere in the final bracket starts
    // free; with the pattern fixed the mean is affine in tau. Free entries are
    // offsets from a reference entry so large inputs keep their low-order digits.
    enum : char { at_zero, at_cap, open };
    std::vector<char> state(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        state[i] = y[i] + hi <= 0.0 ? at_zero : (y[i] + lo >= cap ? at_cap : open);
    }
    for (std::size_t pass = 0; pass <= y.size(); ++pass) {
        double fixed = 0.0;
        double offsets = 0.0;
        std::size_t free_count = 0;
        double ref = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (state[i] == at_cap) fixed += cap;
            if (state[i] != open) continue;
            if (free_count++ == 0) ref = y[i];
            offsets += y[i] - ref;
        }
        if (free_count == 0) break;
        const double at_ref = (S - fixed - offsets) / static_cast<double>(free_count);
        bool settled = true;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (state[i] != open) continue;
            const double t = at_ref + (y[i] - ref);
            if (t < 0.0) {
                state[i] = at_zero;
                settled = false;
            } else if (t > cap) {
                state[i] = at_cap;
                settled = false;
            }
        }
        if (settled) {
            for (std::size_t i = 0; i < y.size(); ++i) {
                zeta[i] = state[i] == open ? at_ref + (y[i] - ref) : (state[i] == at_cap ? cap : 0.0);
            }
            break;
        }
    }
    return zeta;
}

bool risk_weights_feasible(std::span<const double> zeta, double alpha, double tol) {
    if (zeta.empty()) return false;
    const double cap = 1.0 / alpha;
    for (const double z : zeta) {
        if (z < -tol || z > cap + tol) return false;
    }
    return std::abs(mean(zeta) - 1.0) <= tol;
}

double empirical_quantile(std::span<const double> values, double level) {
    if (values.empty()) throw InvalidArgument("quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = level * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= sorted.size()) return sorted.back();
    const double w = pos - static_cast<double>(i);
    return sorted[i] + w * (sorted[i + 1] - sorted[i]);
}

}  // namespace heatrisk
