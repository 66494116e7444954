#include "heatrisk/error.hpp"
#include "heatrisk/reduction.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace heatrisk;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

CoupledSystemSpec random_spec(std::mt19937_64& rng, const Eigen::MatrixXd& M, const RobinParams& robin) {
    CoupledSystemSpec s;
    s.A = random_matrix(rng, 2, 2);
    s.B = random_matrix(rng, 2, 1);
    s.C = random_matrix(rng, 2, 2);
    s.D = random_matrix(rng, 2, 1);
    s.M = M;
    s.r_drift = DriftProfile::constant(random_matrix(rng, 2, 1).col(0));
    s.sigma_drift = DriftProfile::constant(random_matrix(rng, 2, 1).col(0));
    s.robin = robin;
    s.T = 1.0;
    s.X0 = Eigen::VectorXd::Zero(2);
    s.u0 = H1Function::zero();
    return s;
}

CoupledSystemSpec add(const CoupledSystemSpec& a, const CoupledSystemSpec& b) {
    CoupledSystemSpec s = a;
    s.A += b.A;
    s.B += b.B;
    s.C += b.C;
    s.D += b.D;
    s.r_drift.values += b.r_drift.values;
    s.sigma_drift.values += b.sigma_drift.values;
    return s;
}

CoupledSystemSpec zero_like(const CoupledSystemSpec& a) {
    CoupledSystemSpec s = a;
    s.A.setZero();
    s.B.setZero();
    s.C.setZero();
    s.D.setZero();
    s.r_drift.values.setZero();
    s.sigma_drift.values.setZero();
    return s;
}

}  // namespace

TEST_CASE("decoupled subsystem keeps A and C") {
    auto spec = fixture::reference_spec();
    spec.B.setZero();
    const auto m = reduce(spec, 4);
    CHECK(max_abs(m.A.topLeftCorner(2, 2) - spec.A) == 0.0);
    CHECK(max_abs(m.C.topLeftCorner(2, 2) - spec.C) == 0.0);
    CHECK(max_abs(m.C.topRows(2).rightCols(m.n_aug() - 2)) == 0.0);
    CHECK(max_abs(m.C.leftCols(2).bottomRows(m.n_aug() - 2)) == 0.0);
    CHECK(max_abs(m.A.topRows(2).rightCols(m.n_aug() - 2)) == 0.0);
}

TEST_CASE("generator block of the Neumann example") {
    const auto m = fixture::reference_model(3);
    REQUIRE(m.n_aug() == 7);
    const double pi2 = M_PI * M_PI;
    const std::vector<double> want = {0, 0, 0, 0, -pi2, -4 * pi2, -9 * pi2};
    for (int i = 0; i < 7; ++i) {
        CHECK_THAT(m.Delta(i, i), WithinAbs(want[i], 1e-10));
        for (int j = 0; j < 7; ++j)
            if (i != j) CHECK(m.Delta(i, j) == 0.0);
    }
}

TEST_CASE("Y block carries the control integrator") {
    const auto m = fixture::reference_model(3);
    CHECK(m.A(2, 2) == m.mu);
    CHECK(m.mu == 1.2);
    CHECK(m.B(2) == 1.0);
    CHECK(m.B.head(2).isZero());
    for (Eigen::Index j = 0; j < m.n_aug(); ++j)
        if (j != 2) CHECK(m.A(2, j) == 0.0);
}

TEST_CASE("substitution-derived blocks") {
    auto spec = fixture::reference_spec();
    spec.M << 0.5, -0.25;
    spec.D << 0.3, 0.1;
    spec.u0 = (spec.M * spec.X0)(0) * solve_lifter(spec.robin, LifterSide::sde).function();
    const auto basis = solve_eigenpairs(spec.robin, 3);
    const auto theta = solve_lifter(spec.robin, LifterSide::actuation, basis);
    const auto psi = solve_lifter(spec.robin, LifterSide::sde, basis);
    const auto m = assemble_reduced(spec, basis, theta, psi, trace_representer(basis));
    const Eigen::MatrixXd Axx = spec.A + psi.value_at0 * spec.B * spec.M;
    CHECK(max_abs(m.A.topLeftCorner(2, 2) - Axx) < 1e-14);
    CHECK(max_abs(m.A.block(0, 2, 2, 1) - theta.value_at0 * spec.B) < 1e-14);
    for (int n = 0; n < 4; ++n) CHECK(max_abs(m.A.block(0, 3 + n, 2, 1) - basis.trace0[n] * spec.B) < 1e-12);
    const Eigen::MatrixXd zx = -psi.coefficients * (spec.M * (Axx - spec.robin.mu * Eigen::MatrixXd::Identity(2, 2)));
    CHECK(max_abs(m.A.block(3, 0, 4, 2) - zx) < 1e-12);
    CHECK(max_abs(m.B.tail(4) + theta.coefficients) < 1e-14);
    // Z0 projects u0 - theta V0 - psi M X0 = 0.
    CHECK(max_abs(m.Z0.tail(4)) < 1e-12);
    CHECK(max_abs(m.Z0.head(2) - spec.X0) == 0.0);
}

TEST_CASE("initial state is the projection of the lifted profile") {
    auto spec = fixture::reference_spec(0.5);
    spec.V0 = 0.7;
    const auto theta = solve_lifter(spec.robin, LifterSide::actuation);
    spec.u0 = 0.7 * theta.function() + 0.2 * H1Function::trig(1.0, 0.0, M_PI);
    const auto m = reduce(spec, 3);
    CHECK(m.Z0(2) == 0.7);
    CHECK_THAT(m.Z0(3), WithinAbs(0.0, 1e-12));
    // cos(pi x) = phi_1 * ||cos(pi x)||_H1 for the Neumann basis.
    const double norm = std::sqrt(0.5 * (1.0 + M_PI * M_PI));
    CHECK_THAT(m.Z0(4), WithinAbs(0.2 * norm, 1e-12));
    CHECK_THAT(m.Z0(5), WithinAbs(0.0, 1e-12));
}

TEST_CASE("cost assembly") {
    const auto zero = assemble_cost(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), 3.0, 3);
    CHECK(zero.Q(2, 2) == 3.0);
    CHECK((zero.Q.array() != 0.0).count() == 1);
    CHECK(zero.G.isZero());

    const auto sec = assemble_cost(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), 3.0, 3);
    Eigen::VectorXd diag(7);
    diag << 1, 1, 3, 0, 0, 0, 0;
    CHECK(max_abs(sec.Q - Eigen::MatrixXd(diag.asDiagonal())) == 0.0);

    const auto g = assemble_cost(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Identity(2, 2), 1.0, 2);
    CHECK(max_abs(g.G.topLeftCorner(2, 2) - Eigen::MatrixXd::Identity(2, 2)) == 0.0);
    CHECK(g.G.sum() == 2.0);

    Eigen::MatrixXd bad(2, 2);
    bad << 1, 2, 0, 1;
    CHECK_THROWS_AS(assemble_cost(bad, Eigen::MatrixXd::Zero(2, 2), 1.0, 2), InvalidArgument);
    Eigen::MatrixXd indef(2, 2);
    indef << 1, 0, 0, -1;
    CHECK_THROWS_AS(assemble_cost(indef, Eigen::MatrixXd::Zero(2, 2), 1.0, 2), InvalidArgument);
    CHECK_THROWS_AS(assemble_cost(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2), 0.0, 2),
                    InvalidArgument);
}

TEST_CASE("cost matrices are positive semidefinite") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd L = random_matrix(rng, 2, 2);
        const auto c = assemble_cost(L * L.transpose(), L.transpose() * L, 0.5, 4);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.Q).eigenvalues().minCoeff() >= -1e-12);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.G).eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("reconstruction") {
    const auto robin = make_robin(0.0, 0.0, 0.2);
    const auto basis = solve_eigenpairs(robin, 3);
    const auto theta = solve_lifter(robin, LifterSide::actuation, basis);
    const auto psi = solve_lifter(robin, LifterSide::sde, basis);
    const Eigen::MatrixXd M = Eigen::MatrixXd::Zero(1, 2);

    const auto zero = reconstruct_state(Eigen::VectorXd::Zero(7), M, basis, theta, psi);
    for (double x : {0.0, 0.5, 1.0}) CHECK(zero.u.value(x) == 0.0);

    Eigen::VectorXd e = Eigen::VectorXd::Zero(7);
    e(3) = 1.0;
    const auto one = reconstruct_state(e, M, basis, theta, psi);
    for (double x : {0.0, 0.5, 1.0}) CHECK_THAT(one.u.value(x), WithinAbs(1.0, 1e-14));

    Eigen::VectorXd z(7);
    z << 0.3, -0.2, 0.0, 0.5, -1.0, 0.25, 0.125;
    const auto rec = reconstruct_state(z, M, basis, theta, psi);
    const auto back = project_h1(rec.u, basis);
    CHECK(max_abs(back - z.tail(4)) < 1e-12);
    CHECK(rec.X == z.head(2));
}

TEST_CASE("assembly is linear in the system data for fixed M") {
    std::mt19937_64 rng(42);
    for (const auto& robin : {make_robin(0.0, 0.0, 0.2), make_robin(0.7, 1.3, -0.4)}) {
        for (int trial = 0; trial < 4; ++trial) {
            const Eigen::MatrixXd M = trial % 2 ? random_matrix(rng, 1, 2) : Eigen::MatrixXd::Zero(1, 2);
            const auto s1 = random_spec(rng, M, robin);
            const auto s2 = random_spec(rng, M, robin);
            const auto m12 = reduce(add(s1, s2), 3);
            const auto m1 = reduce(s1, 3);
            const auto m2 = reduce(s2, 3);
            const auto m0 = reduce(zero_like(s1), 3);
            CHECK(max_abs(m12.A + m0.A - m1.A - m2.A) < 1e-12);
            CHECK(max_abs(m12.C + m0.C - m1.C - m2.C) < 1e-12);
            CHECK(max_abs(m12.B + m0.B - m1.B - m2.B) < 1e-12);
            CHECK(max_abs(m12.r.values + m0.r.values - m1.r.values - m2.r.values) < 1e-12);
            CHECK(max_abs(m12.sigma.values + m0.sigma.values - m1.sigma.values - m2.sigma.values) < 1e-12);
        }
    }
}

TEST_CASE("Neumann assemblies nest under refinement") {
    auto spec = fixture::reference_spec();
    spec.M << 0.4, 0.1;
    spec.u0 = (spec.M * spec.X0)(0) * solve_lifter(spec.robin, LifterSide::sde).function();
    const auto coarse = reduce(spec, 3);
    const auto fine = reduce(spec, 7);
    const Eigen::Index n = coarse.n_aug();
    CHECK(max_abs(fine.Delta.topLeftCorner(n, n) - coarse.Delta) < 1e-10);
    CHECK(max_abs(fine.A.topLeftCorner(n, n) - coarse.A) < 1e-10);
    CHECK(max_abs(fine.C.topLeftCorner(n, n) - coarse.C) < 1e-10);
    CHECK(max_abs(fine.B.head(n) - coarse.B) < 1e-10);
    CHECK(max_abs(fine.Z0.head(n) - coarse.Z0) < 1e-10);
}

TEST_CASE("assembly rejects inconsistent inputs") {
    auto spec = fixture::reference_spec();
    const auto basis = solve_eigenpairs(make_robin(1.0, 0.0, 0.2), 3);
    const auto theta = solve_lifter(basis.params, LifterSide::actuation, basis);
    const auto psi = solve_lifter(basis.params, LifterSide::sde, basis);
    CHECK_THROWS_AS(assemble_reduced(spec, basis, theta, psi, trace_representer(basis)), InvalidArgument);

    auto bad = fixture::reference_spec();
    bad.B = Eigen::MatrixXd::Zero(3, 1);
    CHECK_THROWS_AS(reduce(bad, 3), InvalidArgument);

    auto incompatible = fixture::reference_spec();
    incompatible.V0 = 1.0;
    CHECK_THROWS_AS(reduce(incompatible, 3), InvalidArgument);
}

TEST_CASE("reduced model JSON round trip is exact") {
    auto m = fixture::reference_model(3);
    m.G = Eigen::MatrixXd::Identity(7, 7) * (1.0 / 3.0);
    const auto back = reduced_model_from_json(to_json(m));
    CHECK(back.A == m.A);
    CHECK(back.C == m.C);
    CHECK(back.B == m.B);
    CHECK(back.Delta == m.Delta);
    CHECK(back.Q == m.Q);
    CHECK(back.G == m.G);
    CHECK(back.Z0 == m.Z0);
    CHECK(back.r_ctrl == m.r_ctrl);
    CHECK(back.sigma.values == m.sigma.values);
    CHECK(to_json(back).dump() == to_json(m).dump());
}
