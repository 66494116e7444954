#pragma once

#include "heatrisk/error.hpp"
#include "heatrisk/gradient.hpp"
#include "heatrisk/noise.hpp"
#include "heatrisk/reduction.hpp"
#include "heatrisk/risk.hpp"
#include "heatrisk/simulation.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace heatrisk {

/// How dual weights follow the samples when the noise bank changes.
enum class DualCarry {
    rank,   ///< the k-th largest cost of the new batch inherits the k-th largest weight
    index,  ///< weights stay attached to the sample index
};

struct Schedule {
    std::size_t iterations = 1000;
    double eta = 1e-3;
    double beta_step = 1e-2;
    std::size_t samples = 2000;
    std::uint64_t seed = 1;
    bool frozen_bank = false;
    DualCarry carry = DualCarry::rank;
    /// Per-coordinate step damping on gradient sign changes.
    bool adaptive = false;
    std::size_t eval_every = 50;
    std::size_t eval_samples = 10000;
    std::uint64_t eval_seed = 2;
    double divergence_factor = 10.0;
    int workers = 0;

    void validate() const;
};

struct IterationRecord {
    std::size_t iteration = 0;
    double risk = 0.0;       ///< risk of the training batch before the update
    double mean_cost = 0.0;
    double grad_v_norm = 0.0;
    double grad_K_norm = 0.0;
};

struct EvaluationRecord {
    std::size_t iteration = 0;
    double risk = 0.0;
    double mean_cost = 0.0;
};

struct OptimizerState {
    FeedbackPolicy policy;
    std::vector<double> zeta;
    std::vector<double> last_costs;
    double eta = 1e-3;
    double beta_step = 1e-2;
    std::size_t iteration = 0;
    std::vector<IterationRecord> history;
    std::vector<EvaluationRecord> evaluations;
    // adaptive step multipliers and last gradient signs
    std::vector<double> scale_v;
    std::vector<double> scale_K;
    GradientPair last_gradient;
};

struct StepOptions {
    bool same_bank_as_previous = false;
    DualCarry carry = DualCarry::rank;
    bool adaptive = false;
    int workers = 0;
};

OptimizerState initial_state(const FeedbackPolicy& policy, double eta, double beta_step);

/// One projected descent-ascent update: simulate on `bank`, weight each sample
/// by zeta (1 - gamma zeta), step the policy against the weighted gradient,
/// clip it into its boxes, then move zeta along (1 - 2 gamma zeta) * cost and
/// project it back onto the risk envelope.
OptimizerState gda_step(OptimizerState state, const ReducedModel& model, const RiskSpec& risk,
                        const NoiseBank& bank, const TimeGrid& grid, const StepOptions& options = {});

/// Raised when the held-out risk exceeds divergence_factor times its initial
/// value or a simulation overflows; carries the last state that evaluated finely.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, OptimizerState last_good)
        : NumericalError(what), last_good_(std::move(last_good)) {}
    [[nodiscard]] const OptimizerState& last_good() const { return last_good_; }

private:
    OptimizerState last_good_;
};

using ProgressCallback = std::function<void(const OptimizerState&)>;

OptimizerState run_optimization(const ReducedModel& model, const RiskSpec& risk, const FeedbackPolicy& init,
                                const Schedule& schedule, const TimeGrid& grid,
                                const ProgressCallback& progress = {});

/// Risk and mean of the policy's cost on a bank (forward simulation only).
EvaluationRecord evaluate_policy(const ReducedModel& model, const FeedbackPolicy& policy, const RiskSpec& risk,
                                 const NoiseBank& bank, const TimeGrid& grid, int workers = 0,
                                 std::vector<double>* costs = nullptr);

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);
void write_evaluations_csv(std::ostream& os, const std::vector<EvaluationRecord>& evaluations);

}  // namespace heatrisk
