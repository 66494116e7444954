#include "heatrisk/error.hpp"
#include "heatrisk/simulation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

using namespace heatrisk;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Exact expectation of the Euler-Maruyama cost from the first and second
/// moment recursions of the discrete scheme.
double em_expected_cost(const ReducedModel& m, const FeedbackPolicy& p, const TimeGrid& g) {
    const Eigen::Index n = m.n_aug();
    const double dt = g.dt();
    const Eigen::MatrixXd F = m.Delta + m.A + m.B * p.K;
    const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n) + dt * F;
    Eigen::VectorXd mu = m.Z0;
    Eigen::MatrixXd S = m.Z0 * m.Z0.transpose();
    double cost = 0.0;
    for (std::size_t k = 0; k < g.steps; ++k) {
        const double t = g.time(k);
        const Eigen::VectorXd sig = m.sigma.at(t);
        const Eigen::VectorXd b = m.B * p.v[k] + m.r.at(t);
        const double eu2 = p.v[k] * p.v[k] + 2.0 * p.v[k] * (p.K * mu)(0) + (p.K * S * p.K.transpose())(0);
        cost += dt * ((m.Q * S).trace() + m.r_ctrl * eu2);
        const Eigen::MatrixXd CS = m.C * S * m.C.transpose() + m.C * mu * sig.transpose() +
                                   sig * mu.transpose() * m.C.transpose() + sig * sig.transpose();
        const Eigen::VectorXd mu_next = E * mu + b * dt;
        S = E * S * E.transpose() + dt * dt * b * b.transpose() + dt * (E * mu * b.transpose() + b * mu.transpose() * E.transpose()) +
            dt * CS;
        mu = mu_next;
    }
    return cost + (m.G * S).trace();
}

ReducedModel frozen_model() {
    auto m = fixture::reference_model(3);
    m.A.setZero();
    m.Delta.setZero();
    m.C.setZero();
    m.sigma.values.setZero();
    m.Z0 << 0.3, -0.1, 0.2, 0.5, 0.1, -0.2, 0.05;
    m.G = 0.5 * Eigen::MatrixXd::Identity(7, 7);
    return m;
}

}  // namespace

TEST_CASE("zero dynamics keep the initial state") {
    const auto m = frozen_model();
    const TimeGrid g{4.0, 400};
    const NoiseBank bank(1, 3, g.steps, g.T);
    SimulationOptions opts;
    opts.store_paths = true;
    const auto batch = simulate_batch(m, FeedbackPolicy::zero(g.steps, 7), bank, g, opts);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(batch.state(s, 0) == m.Z0);
        CHECK(batch.state(s, g.steps) == m.Z0);
        const double want = g.T * m.Z0.dot(m.Q * m.Z0) + m.Z0.dot(m.G * m.Z0);
        CHECK_THAT(batch.costs[s], WithinRel(want, 1e-12));
    }
}

TEST_CASE("scalar decay reaches exp(-4)") {
    const auto m = fixture::scalar_model(-1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 4.0);
    const TimeGrid g{4.0, 4000};
    const NoiseBank bank(1, 1, g.steps, g.T);
    SimulationOptions opts;
    opts.store_paths = true;
    const auto batch = simulate_batch(m, FeedbackPolicy::zero(g.steps, 1), bank, g, opts);
    CHECK_THAT(batch.state(0, g.steps)(0), WithinAbs(std::exp(-4.0), 2e-3));
}

TEST_CASE("pure noise has variance T") {
    const auto m = fixture::scalar_model(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 4.0);
    const TimeGrid g{4.0, 100};
    const std::size_t S = 100000;
    const NoiseBank bank(9, S, g.steps, g.T);
    // With Q = 0 and G = 1 the cost is X_T^2.
    auto mm = m;
    mm.Q.setZero();
    const auto batch = simulate_batch(mm, FeedbackPolicy::zero(g.steps, 1), bank, g);
    const double var = std::accumulate(batch.costs.begin(), batch.costs.end(), 0.0) / S;
    const double se = g.T * std::sqrt(2.0 / S);
    CHECK(std::abs(var - g.T) < 3.0 * se);
}

TEST_CASE("cached costs equal recomputed costs") {
    const auto m = fixture::reference_model(3);
    const TimeGrid g{4.0, 400};
    const NoiseBank bank(4, 40, g.steps, g.T);
    auto policy = FeedbackPolicy::zero(g.steps, 7);
    policy.K << -1.0, -1.0, -2.0, -1.0, 0.0, 0.0, 0.0;
    for (std::size_t k = 0; k < g.steps; ++k) policy.v[k] = 0.1 * std::sin(0.01 * k);
    SimulationOptions opts;
    opts.store_paths = true;
    const auto batch = simulate_batch(m, policy, bank, g, opts);
    const auto again = evaluate_cost(batch, m);
    CHECK(again == batch.costs);
    for (std::size_t s = 0; s < 40; ++s) {
        for (std::size_t k = 0; k < g.steps; ++k) {
            CHECK_THAT(batch.control(s, k), WithinAbs(policy.v[k] + policy.K.dot(batch.state(s, k)), 1e-12));
        }
    }
}

TEST_CASE("zero trajectories cost nothing") {
    auto m = fixture::reference_model(3, 0.0);
    m.sigma.values.setZero();
    const TimeGrid g{4.0, 200};
    const NoiseBank bank(4, 5, g.steps, g.T);
    const auto batch = simulate_batch(m, FeedbackPolicy::zero(g.steps, 7), bank, g);
    for (double c : batch.costs) CHECK(c == 0.0);
}

TEST_CASE("doubling the weights doubles every cost") {
    auto m = fixture::reference_model(3);
    m.G = Eigen::MatrixXd::Identity(7, 7);
    auto m2 = m;
    m2.Q *= 2.0;
    m2.G *= 2.0;
    m2.r_ctrl *= 2.0;
    const TimeGrid g{4.0, 400};
    const NoiseBank bank(4, 16, g.steps, g.T);
    auto policy = FeedbackPolicy::zero(g.steps, 7);
    policy.K(2) = -1.0;
    const auto a = simulate_batch(m, policy, bank, g);
    const auto b = simulate_batch(m2, policy, bank, g);
    for (std::size_t s = 0; s < 16; ++s) CHECK(b.costs[s] == 2.0 * a.costs[s]);
}

TEST_CASE("results do not depend on the worker count") {
    const auto m = fixture::reference_model(3);
    const TimeGrid g{4.0, 500};
    const NoiseBank bank(77, 101, g.steps, g.T);
    auto policy = FeedbackPolicy::zero(g.steps, 7);
    policy.K << -3.0, -2.0, -4.0, -2.0, -0.1, 0.0, 0.0;
    SimulationOptions one, many;
    one.workers = 1;
    one.store_paths = true;
    one.with_fundamental = true;
    many = one;
    many.workers = 3;
    const auto a = simulate_batch(m, policy, bank, g, one);
    const auto b = simulate_batch(m, policy, bank, g, many);
    CHECK(a.costs == b.costs);
    CHECK(a.Z == b.Z);
    CHECK(a.Phi == b.Phi);
    CHECK(a.U == b.U);
}

TEST_CASE("uncontrolled modes decay at their eigenvalue rates") {
    auto m = fixture::reference_model(3);
    m.A.setZero();
    m.C.setZero();
    m.sigma.values.setZero();
    m.T = 0.1;
    const TimeGrid g{0.1, 1000};
    const NoiseBank bank(1, 1, g.steps, g.T);
    SimulationOptions opts;
    opts.store_paths = true;
    for (Eigen::Index mode = 1; mode <= 3; ++mode) {
        m.Z0.setZero();
        m.Z0(m.mode_index(mode)) = 1.0;
        const auto batch = simulate_batch(m, FeedbackPolicy::zero(g.steps, 7), bank, g, opts);
        const double end = batch.state(0, g.steps)(m.mode_index(mode));
        const double rate = -std::log(end) / g.T;
        CHECK_THAT(rate, WithinRel(mode * mode * M_PI * M_PI, 0.01));
    }
}

TEST_CASE("fundamental matrix propagates the initial state") {
    auto m = fixture::reference_model(3);
    m.sigma.values.setZero();
    const TimeGrid g{4.0, 400};
    const NoiseBank bank(5, 6, g.steps, g.T);
    auto policy = FeedbackPolicy::zero(g.steps, 7);
    policy.K << -3.0, -2.0, -4.0, -2.0, -0.1, 0.0, 0.0;
    SimulationOptions opts;
    opts.store_paths = true;
    opts.with_fundamental = true;
    const auto batch = simulate_batch(m, policy, bank, g, opts);
    for (std::size_t s = 0; s < 6; ++s) {
        CHECK(batch.fundamental(s, 0) == Eigen::MatrixXd::Identity(7, 7));
        for (std::size_t k = 0; k <= g.steps; k += 50) {
            const Eigen::VectorXd z = batch.state(s, k);
            const Eigen::VectorXd phiz = batch.fundamental(s, k) * m.Z0;
            CHECK((z - phiz).norm() <= 1e-10 * std::max(1e-300, z.norm()));
        }
    }
}

TEST_CASE("Monte Carlo mean cost matches the exact moment recursion") {
    const auto m = fixture::reference_model(3);
    const TimeGrid g{4.0, 200};
    auto policy = FeedbackPolicy::zero(g.steps, 7);
    policy.K << -3.0, -2.0, -4.0, -2.0, -0.1, 0.0, 0.0;
    for (std::size_t k = 0; k < g.steps; ++k) policy.v[k] = 0.05;
    const std::size_t S = 20000;
    const NoiseBank bank(21, S, g.steps, g.T);
    const auto batch = simulate_batch(m, policy, bank, g);
    const double mean = std::accumulate(batch.costs.begin(), batch.costs.end(), 0.0) / S;
    double var = 0.0;
    for (double c : batch.costs) var += (c - mean) * (c - mean);
    const double se = std::sqrt(var / (S - 1) / S);
    CHECK(std::abs(mean - em_expected_cost(m, policy, g)) < 4.0 * se);
}

TEST_CASE("expected cost converges at first order in dt") {
    auto m = fixture::reference_model(3);
    auto policy_for = [&](std::size_t steps) {
        auto p = FeedbackPolicy::zero(steps, 7);
        p.K << -3.0, -2.0, -4.0, -2.0, -0.1, 0.0, 0.0;
        return p;
    };
    std::vector<double> costs, dts;
    for (std::size_t steps : {500u, 1000u, 2000u, 4000u}) {
        const TimeGrid g{4.0, steps};
        costs.push_back(em_expected_cost(m, policy_for(steps), g));
        dts.push_back(g.dt());
    }
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k + 1 < costs.size(); ++k) {
        lx.push_back(std::log(dts[k]));
        ly.push_back(std::log(std::abs(costs[k] - costs[k + 1])));
    }
    const double slope = oracle::linear_slope(lx, ly);
    CHECK(slope >= 0.7);
    CHECK(slope <= 1.3);

    // The deterministic part is reproduced by the simulator itself.
    auto det = m;
    det.C.setZero();
    det.sigma.values.setZero();
    std::vector<double> sim;
    for (std::size_t steps : {500u, 1000u, 2000u, 4000u}) {
        const TimeGrid g{4.0, steps};
        const NoiseBank bank(1, 1, steps, 4.0);
        sim.push_back(simulate_batch(det, policy_for(steps), bank, g).costs[0]);
        CHECK_THAT(sim.back(), WithinRel(em_expected_cost(det, policy_for(steps), g), 1e-10));
    }
    std::vector<double> sy;
    for (std::size_t k = 0; k + 1 < sim.size(); ++k) sy.push_back(std::log(std::abs(sim[k] - sim[k + 1])));
    const double s2 = oracle::linear_slope(lx, sy);
    CHECK(s2 >= 0.7);
    CHECK(s2 <= 1.3);
}

TEST_CASE("scalar feedback cost approaches the closed form at order dt") {
    const double a = 0.5, b = 1.0, k = -2.0, q = 1.0, r = 0.5, g = 2.0, T = 2.0;
    const double f = a + b * k;
    const double exact = (q + r * k * k) * (std::exp(2 * f * T) - 1.0) / (2 * f) + g * std::exp(2 * f * T);
    const auto m = fixture::scalar_model(a, b, 0.0, 0.0, q, r, g, 1.0, T);
    std::vector<double> err;
    for (std::size_t steps : {1000u, 2000u, 4000u}) {
        const TimeGrid grid{T, steps};
        auto p = FeedbackPolicy::zero(steps, 1);
        p.K(0) = k;
        const NoiseBank bank(1, 1, steps, T);
        err.push_back(std::abs(simulate_batch(m, p, bank, grid).costs[0] - exact) / exact);
    }
    CHECK(err[0] < 5e-3);
    CHECK(err[0] / err[1] > 1.7);
    CHECK(err[0] / err[1] < 2.3);
    CHECK(err[1] / err[2] > 1.7);
    CHECK(err[1] / err[2] < 2.3);
}

TEST_CASE("overflow is reported with sample and step") {
    const auto m = fixture::scalar_model(1e4, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 10.0);
    const TimeGrid g{10.0, 100};
    const NoiseBank bank(1, 40, g.steps, g.T);
    CHECK_THROWS_WITH(simulate_batch(m, FeedbackPolicy::zero(g.steps, 1), bank, g),
                      ContainsSubstring("sample") && ContainsSubstring("step"));
    CHECK_THROWS_AS(simulate_batch(m, FeedbackPolicy::zero(g.steps, 1), bank, g), NumericalError);
}

TEST_CASE("mismatched inputs are rejected") {
    const auto m = fixture::reference_model(3);
    const TimeGrid g{4.0, 100};
    const NoiseBank bank(1, 2, g.steps, g.T);
    CHECK_THROWS_AS(simulate_batch(m, FeedbackPolicy::zero(g.steps, 6), bank, g), InvalidArgument);
    CHECK_THROWS_AS(simulate_batch(m, FeedbackPolicy::zero(50, 7), bank, g), InvalidArgument);
    const NoiseBank other(1, 2, 200, g.T);
    CHECK_THROWS_AS(simulate_batch(m, FeedbackPolicy::zero(g.steps, 7), other, g), InvalidArgument);
    const TimeGrid shorter{2.0, 100};
    const NoiseBank bank2(1, 2, 100, 2.0);
    CHECK_THROWS_AS(simulate_batch(m, FeedbackPolicy::zero(100, 7), bank2, shorter), InvalidArgument);
}

TEST_CASE("policy boxes and JSON") {
    auto p = FeedbackPolicy::zero(4, 3, {-1.0, 1.0}, {-2.0, 2.0});
    p.v = {0.5, 3.0, -4.0, 0.0};
    p.K << 1.0, -5.0, 2.5;
    CHECK_FALSE(p.feasible());
    CHECK(p.project());
    CHECK(p.feasible());
    CHECK(p.v == std::vector<double>{0.5, 1.0, -1.0, 0.0});
    CHECK(p.K(1) == -2.0);
    CHECK(p.K(2) == 2.0);
    CHECK_FALSE(p.project());
    const auto back = policy_from_json(to_json(p, TimeGrid{1.0, 4}));
    CHECK(back.v == p.v);
    CHECK(back.K == p.K);
    CHECK(back.box_v.lo == -1.0);
    CHECK(back.box_K.hi == 2.0);
}
