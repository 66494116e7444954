#include "heatrisk/optimizer.hpp"

#include "heatrisk/error.hpp"
#include "heatrisk/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace heatrisk {

void Schedule::validate() const {
    if (!(eta >= 0.0) || !(beta_step >= 0.0)) throw InvalidArgument("step sizes must be nonnegative");
    if (samples == 0) throw InvalidArgument("training batch must hold at least one sample");
    if (eval_samples == 0) throw InvalidArgument("evaluation bank must hold at least one sample");
    if (eval_every == 0) throw InvalidArgument("evaluation period must be positive");
    if (!(divergence_factor > 1.0)) throw InvalidArgument("divergence factor must exceed 1");
}

OptimizerState initial_state(const FeedbackPolicy& policy, double eta, double beta_step) {
    OptimizerState s;
    s.policy = policy;
    s.policy.project();
    s.eta = eta;
    s.beta_step = beta_step;
    return s;
}

namespace {

// Reassign dual weights by cost rank: sorted old weights (by old cost) are
// handed to the new samples in the order of their new costs.
std::vector<double> carry_by_rank(const std::vector<double>& zeta, const std::vector<double>& old_costs,
                                  const std::vector<double>& new_costs) {
    const std::size_t S = zeta.size();
    std::vector<std::size_t> old_order(S), new_order(S);
    std::iota(old_order.begin(), old_order.end(), 0);
    std::iota(new_order.begin(), new_order.end(), 0);
    auto by = [](const std::vector<double>& c) {
        return [&c](std::size_t a, std::size_t b) { return c[a] < c[b] || (c[a] == c[b] && a < b); };
    };
    std::sort(old_order.begin(), old_order.end(), by(old_costs));
    std::sort(new_order.begin(), new_order.end(), by(new_costs));
    std::vector<double> out(S);
    for (std::size_t k = 0; k < S; ++k) out[new_order[k]] = zeta[old_order[k]];
    return out;
}

double adaptive_factor(double& scale, double g, double g_prev) {
    if (g * g_prev > 0.0) {
        scale = std::min(scale * 1.1, 10.0);
    } else if (g * g_prev < 0.0) {
        scale = std::max(scale * 0.5, 1e-3);
    }
    return scale;
}

}  // namespace

OptimizerState gda_step(OptimizerState state, const ReducedModel& model, const RiskSpec& risk, const NoiseBank& bank,
                        const TimeGrid& grid, const StepOptions& options) {
    risk.validate();
    const double alpha = risk.tail();
    const double gamma = risk.gamma;
    const std::size_t S = bank.samples();

    const SampleGradients sg = sample_gradients(model, state.policy, bank, grid, options.workers);
    const std::vector<double>& costs = sg.costs;

    if (state.zeta.size() != S) {
        state.zeta.assign(S, 1.0);
    } else if (!options.same_bank_as_previous && options.carry == DualCarry::rank &&
               state.last_costs.size() == S) {
        state.zeta = carry_by_rank(state.zeta, state.last_costs, costs);
    }
    state.zeta = project_risk_weights(state.zeta, alpha);

    std::vector<double> weights(S);
    for (std::size_t s = 0; s < S; ++s) weights[s] = state.zeta[s] * (1.0 - gamma * state.zeta[s]);
    const GradientPair grad = combine(sg, weights);

    IterationRecord rec;
    rec.iteration = state.iteration + 1;
    rec.risk = cvar_estimate(costs, alpha);
    rec.mean_cost = mean(costs);
    rec.grad_v_norm = grad.norm_v(grid.dt());
    rec.grad_K_norm = grad.norm_K();

    if (options.adaptive) {
        if (state.scale_v.size() != grad.grad_v.size()) state.scale_v.assign(grad.grad_v.size(), 1.0);
        if (state.scale_K.size() != static_cast<std::size_t>(grad.grad_K.size())) {
            state.scale_K.assign(static_cast<std::size_t>(grad.grad_K.size()), 1.0);
        }
        const bool have_prev = state.last_gradient.grad_v.size() == grad.grad_v.size();
        for (std::size_t m = 0; m < grad.grad_v.size(); ++m) {
            const double f = have_prev ? adaptive_factor(state.scale_v[m], grad.grad_v[m], state.last_gradient.grad_v[m])
                                       : state.scale_v[m];
            state.policy.v[m] -= state.eta * f * grad.grad_v[m];
        }
        for (Eigen::Index i = 0; i < grad.grad_K.size(); ++i) {
            auto& sc = state.scale_K[static_cast<std::size_t>(i)];
            const double f = have_prev ? adaptive_factor(sc, grad.grad_K(i), state.last_gradient.grad_K(i)) : sc;
            state.policy.K(i) -= state.eta * f * grad.grad_K(i);
        }
    } else {
        for (std::size_t m = 0; m < grad.grad_v.size(); ++m) state.policy.v[m] -= state.eta * grad.grad_v[m];
        state.policy.K -= state.eta * grad.grad_K;
    }
    state.policy.project();

    std::vector<double> ascent(S);
    for (std::size_t s = 0; s < S; ++s) {
        ascent[s] = state.zeta[s] + state.beta_step * (1.0 - 2.0 * gamma * state.zeta[s]) * costs[s];
    }
    state.zeta = project_risk_weights(ascent, alpha);
    state.last_costs = costs;
    state.last_gradient = grad;
    state.iteration += 1;
    state.history.push_back(rec);
    return state;
}

EvaluationRecord evaluate_policy(const ReducedModel& model, const FeedbackPolicy& policy, const RiskSpec& risk,
                                 const NoiseBank& bank, const TimeGrid& grid, int workers, std::vector<double>* costs) {
    SimulationOptions opts;
    opts.workers = workers;
    TrajectoryBatch batch = simulate_batch(model, policy, bank, grid, opts);
    EvaluationRecord rec;
    rec.risk = cvar_estimate(batch.costs, risk.tail());
    rec.mean_cost = mean(batch.costs);
    if (costs) *costs = std::move(batch.costs);
    return rec;
}

OptimizerState run_optimization(const ReducedModel& model, const RiskSpec& risk, const FeedbackPolicy& init,
                                const Schedule& schedule, const TimeGrid& grid, const ProgressCallback& progress) {
    schedule.validate();
    risk.validate();
    OptimizerState state = initial_state(init, schedule.eta, schedule.beta_step);
    if (schedule.iterations == 0) return state;

    const NoiseBank eval_bank(schedule.eval_seed, schedule.eval_samples, grid.steps, grid.T);
    EvaluationRecord initial = evaluate_policy(model, state.policy, risk, eval_bank, grid, schedule.workers);
    initial.iteration = 0;
    state.evaluations.push_back(initial);
    const double limit = schedule.divergence_factor * std::abs(initial.risk);

    StepOptions step;
    step.carry = schedule.carry;
    step.adaptive = schedule.adaptive;
    step.workers = schedule.workers;

    OptimizerState last_good = state;
    for (std::size_t it = 1; it <= schedule.iterations; ++it) {
        const std::uint64_t seed = schedule.frozen_bank ? schedule.seed : mix_seed(schedule.seed, it);
        const NoiseBank bank(seed, schedule.samples, grid.steps, grid.T);
        step.same_bank_as_previous = schedule.frozen_bank;
        try {
            state = gda_step(std::move(state), model, risk, bank, grid, step);
            if (!(state.history.back().risk <= limit)) {
                throw NumericalError("training risk " + std::to_string(state.history.back().risk) +
                                     " exceeds the divergence limit " + std::to_string(limit));
            }
            if (it % schedule.eval_every == 0 || it == schedule.iterations) {
                EvaluationRecord rec = evaluate_policy(model, state.policy, risk, eval_bank, grid, schedule.workers);
                rec.iteration = it;
                if (!(rec.risk <= limit)) {
                    throw NumericalError("held-out risk " + std::to_string(rec.risk) + " exceeds the divergence limit " +
                                         std::to_string(limit));
                }
                state.evaluations.push_back(rec);
                last_good = state;
            }
        } catch (const DivergenceError&) {
            throw;
        } catch (const NumericalError& e) {
            throw DivergenceError("optimization diverged at iteration " + std::to_string(it) + ": " + e.what(),
                                  last_good);
        }
        if (progress) progress(state);
    }
    return state;
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
    os << "iteration,risk,mean_cost,grad_v_norm,grad_K_norm\n";
    for (const auto& r : history) {
        os << r.iteration << ',' << format_double(r.risk) << ',' << format_double(r.mean_cost) << ','
           << format_double(r.grad_v_norm) << ',' << format_double(r.grad_K_norm) << '\n';
    }
}

void write_evaluations_csv(std::ostream& os, const std::vector<EvaluationRecord>& evaluations) {
    os << "iteration,risk,mean_cost\n";
    for (const auto& r : evaluations) {
        os << r.iteration << ',' << format_double(r.risk) << ',' << format_double(r.mean_cost) << '\n';
    }
}

}  // namespace heatrisk
