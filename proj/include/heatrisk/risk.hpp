#pragma once

#include <span>
#include <vector>

namespace heatrisk {

enum class RiskKind { cvar, expectation };

/// CVaR at tail level alpha; expectation is CVaR with alpha = 1.
struct RiskSpec {
    RiskKind kind = RiskKind::cvar;
    double alpha = 0.1;
    /// Regularization of the dual weights in the saddle-point updates.
    double gamma = 1e-3;

    [[nodiscard]] double tail() const { return kind == RiskKind::expectation ? 1.0 : alpha; }
    void validate() const;
};

/// Empirical CVaR: mean of the worst alpha-fraction of the sample, with a
/// fractional weight on the boundary sample when alpha * S is not an integer.
double cvar_estimate(std::span<const double> costs, double alpha);

/// Euclidean projection onto {zeta : mean(zeta) = 1, 0 <= zeta_i <= 1/alpha}.
std::vector<double> project_risk_weights(std::span<const double> y, double alpha);

/// Checks mean(zeta) = 1 to tol and the box bounds.
bool risk_weights_feasible(std::span<const double> zeta, double alpha, double tol = 1e-9);

/// Empirical quantile with linear interpolation of order statistics
/// (position (S - 1) p in the sorted sample).
double empirical_quantile(std::span<const double> values, double level);

double mean(std::span<const double> values);

}  // namespace heatrisk
