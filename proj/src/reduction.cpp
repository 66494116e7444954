#include "heatrisk/reduction.hpp"

#include "heatrisk/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace heatrisk {

DriftProfile DriftProfile::constant(const Eigen::VectorXd& v) {
    DriftProfile p;
    p.knots = {0.0};
    p.values = v;
    return p;
}

Eigen::VectorXd DriftProfile::at(double t) const {
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const auto k = it == knots.begin() ? 0 : static_cast<Eigen::Index>(it - knots.begin() - 1);
    return values.col(k);
}

void DriftProfile::validate(Eigen::Index expected_dim, double horizon, const char* name) const {
    (void)horizon;
    if (knots.empty() || knots.front() != 0.0) {
        throw InvalidArgument(std::string(name) + ": time grid must start at t = 0");
    }
    if (!std::is_sorted(knots.begin(), knots.end())) {
        throw InvalidArgument(std::string(name) + ": knots must be nondecreasing");
    }
    if (values.rows() != expected_dim || values.cols() != static_cast<Eigen::Index>(knots.size())) {
        throw InvalidArgument(std::string(name) + ": expected " + std::to_string(expected_dim) + " x " +
                              std::to_string(knots.size()) + " values");
    }
}

void CoupledSystemSpec::validate(double compat_tol) const {
    const Eigen::Index n = d();
    if (n < 1 || A.cols() != n) throw InvalidArgument("A must be square and nonempty");
    if (C.rows() != n || C.cols() != n) throw InvalidArgument("C must be d x d");
    if (B.rows() != n || B.cols() != 1) throw InvalidArgument("B must be d x 1");
    if (D.rows() != n || D.cols() != 1) throw InvalidArgument("D must be d x 1");
    if (M.rows() != 1 || M.cols() != n) throw InvalidArgument("M must be 1 x d");
    if (X0.size() != n) throw InvalidArgument("X0 must have d entries");
    if (!(T > 0.0)) throw InvalidArgument("horizon T must be positive");
    r_drift.validate(n, T, "r_drift");
    sigma_drift.validate(n, T, "sigma_drift");
    robin.validate();

    const double right = u0.derivative(1.0) + robin.beta1 * u0.value(1.0) - V0;
    const double left = u0.derivative(0.0) - robin.beta0 * u0.value(0.0) - (M * X0)(0);
    if (std::abs(right) > compat_tol || std::abs(left) > compat_tol) {
        throw InvalidArgument("u0 violates the boundary compatibility conditions (residuals " +
                              std::to_string(left) + " at x=0, " + std::to_string(right) + " at x=1)");
    }
}

void ReducedModel::validate() const {
    const Eigen::Index n = n_aug();
    auto square = [n](const Eigen::MatrixXd& m, const char* name) {
        if (m.rows() != n || m.cols() != n) {
            throw InvalidArgument(std::string("reduced model: ") + name + " must be " + std::to_string(n) +
                                  " x " + std::to_string(n));
        }
    };
    square(Delta, "Delta");
    square(A, "A");
    square(C, "C");
    square(Q, "Q");
    square(G, "G");
    if (B.size() != n) throw InvalidArgument("reduced model: B has wrong length");
    if (Z0.size() != n) throw InvalidArgument("reduced model: Z0 has wrong length");
    r.validate(n, T, "reduced r");
    sigma.validate(n, T, "reduced sigma");
    if (!(r_ctrl >= 0.0)) throw InvalidArgument("reduced model: control weight must be nonnegative");
    if (!(T > 0.0)) throw InvalidArgument("reduced model: horizon must be positive");
}

namespace {

DriftProfile lift_drift(const DriftProfile& p, const Eigen::VectorXd& psi_coef, const Eigen::MatrixXd& M,
                        Eigen::Index d, Eigen::Index modes) {
    DriftProfile out;
    out.knots = p.knots;
    out.values = Eigen::MatrixXd::Zero(d + 1 + modes, p.values.cols());
    for (Eigen::Index k = 0; k < p.values.cols(); ++k) {
        out.values.col(k).head(d) = p.values.col(k);
        out.values.col(k).tail(modes) = -psi_coef * (M * p.values.col(k))(0);
    }
    return out;
}

}  // namespace

ReducedModel assemble_reduced(const CoupledSystemSpec& spec, const EigenBasis& basis,
                              const BoundaryLifter& actuation, const BoundaryLifter& sde,
                              const TraceRepresenter& representer, SignConvention signs) {
    spec.validate();
    if (!(spec.robin == basis.params)) throw InvalidArgument("basis and spec use different Robin parameters");
    if (actuation.side != LifterSide::actuation || sde.side != LifterSide::sde) {
        throw InvalidArgument("lifters passed in the wrong order");
    }
    const auto modes = static_cast<Eigen::Index>(basis.size());
    if (actuation.coefficients.size() != modes || sde.coefficients.size() != modes ||
        representer.inner_h1.size() != modes) {
        throw InvalidArgument("lifters/representer were projected onto a different basis");
    }

    const Eigen::Index d = spec.d();
    const Eigen::Index n = d + 1 + modes;
    const double mu = spec.robin.mu;
    const double theta0 = actuation.value_at0;
    const double psi0 = sde.value_at0;
    const Eigen::VectorXd& p_theta = actuation.coefficients;
    const Eigen::VectorXd& p_psi = sde.coefficients;
    // gamma0* on sum kappa_n phi_n is the trace row; <gamma0, phi_n> = phi_n(0).
    const Eigen::RowVectorXd trace = representer.inner_h1.transpose();

    const double sgn = signs == SignConvention::substitution ? 1.0 : -1.0;
    const double mu_sgn = signs == SignConvention::substitution ? -1.0 : 1.0;
    const auto I_d = Eigen::MatrixXd::Identity(d, d);

    ReducedModel m;
    m.d = d;
    m.N = modes - 1;
    m.mu = mu;
    m.T = spec.T;

    m.Delta = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < modes; ++k) m.Delta(d + 1 + k, d + 1 + k) = -basis.lambdas[static_cast<std::size_t>(k)];

    const Eigen::MatrixXd Axx = spec.A + sgn * psi0 * spec.B * spec.M;
    const Eigen::MatrixXd Cxx = spec.C + sgn * psi0 * spec.D * spec.M;

    m.A = Eigen::MatrixXd::Zero(n, n);
    m.A.block(0, 0, d, d) = Axx;
    m.A.block(0, d, d, 1) = sgn * theta0 * spec.B;
    m.A.block(0, d + 1, d, modes) = spec.B * trace;
    m.A(d, d) = mu;
    m.A.block(d + 1, 0, modes, d) = -p_psi * (spec.M * (Axx + mu_sgn * mu * I_d));
    m.A.block(d + 1, d, modes, 1) = -sgn * p_psi * (spec.M * spec.B)(0) * theta0;
    m.A.block(d + 1, d + 1, modes, modes) =
        spec.robin.c * Eigen::MatrixXd::Identity(modes, modes) - p_psi * ((spec.M * spec.B)(0) * trace);

    m.C = Eigen::MatrixXd::Zero(n, n);
    m.C.block(0, 0, d, d) = Cxx;
    m.C.block(0, d, d, 1) = sgn * theta0 * spec.D;
    m.C.block(0, d + 1, d, modes) = spec.D * trace;
    m.C.block(d + 1, 0, modes, d) = -p_psi * (spec.M * Cxx);
    m.C.block(d + 1, d, modes, 1) = -sgn * p_psi * (spec.M * spec.D)(0) * theta0;
    m.C.block(d + 1, d + 1, modes, modes) = -p_psi * ((spec.M * spec.D)(0) * trace);

    m.B = Eigen::VectorXd::Zero(n);
    m.B(d) = 1.0;
    m.B.tail(modes) = -p_theta;

    m.r = lift_drift(spec.r_drift, p_psi, spec.M, d, modes);
    m.sigma = lift_drift(spec.sigma_drift, p_psi, spec.M, d, modes);

    const H1Function z0 = spec.u0 - spec.V0 * actuation.function() - (spec.M * spec.X0)(0) * sde.function();
    m.Z0 = Eigen::VectorXd::Zero(n);
    m.Z0.head(d) = spec.X0;
    m.Z0(d) = spec.V0;
    m.Z0.tail(modes) = project_h1(z0, basis);

    m.Q = Eigen::MatrixXd::Zero(n, n);
    m.G = Eigen::MatrixXd::Zero(n, n);
    return m;
}

ReducedModel reduce(const CoupledSystemSpec& spec, std::size_t order, SignConvention signs) {
    const EigenBasis basis = solve_eigenpairs(spec.robin, order);
    const BoundaryLifter theta = solve_lifter(spec.robin, LifterSide::actuation, basis);
    const BoundaryLifter psi = solve_lifter(spec.robin, LifterSide::sde, basis);
    return assemble_reduced(spec, basis, theta, psi, trace_representer(basis), signs);
}

namespace {

void require_psd(const Eigen::MatrixXd& m, const char* name) {
    if (m.rows() != m.cols()) throw InvalidArgument(std::string(name) + " must be square");
    if (!m.isApprox(m.transpose(), 1e-12) && (m - m.transpose()).norm() > 1e-12) {
        throw InvalidArgument(std::string(name) + " must be symmetric");
    }
    if (m.rows() == 0) return;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.eigenvalues().minCoeff() < -1e-12) throw InvalidArgument(std::string(name) + " must be positive semidefinite");
}

}  // namespace

CostMatrices assemble_cost(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& G, double r_ctrl, std::size_t order) {
    require_psd(Q, "Q");
    require_psd(G, "G");
    if (Q.rows() != G.rows()) throw InvalidArgument("Q and G must have the same size");
    if (!(r_ctrl > 0.0)) throw InvalidArgument("control weight r must be positive");
    const Eigen::Index d = Q.rows();
    const Eigen::Index n = d + 1 + static_cast<Eigen::Index>(order) + 1;
    CostMatrices out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), r_ctrl};
    out.Q.topLeftCorner(d, d) = Q;
    out.Q(d, d) = r_ctrl;
    out.G.topLeftCorner(d, d) = G;
    return out;
}

void attach_cost(ReducedModel& model, const CostMatrices& cost) {
    if (cost.Q.rows() != model.n_aug()) throw InvalidArgument("cost matrices do not match the reduced model");
    model.Q = cost.Q;
    model.G = cost.G;
    model.r_ctrl = cost.r_ctrl;
}

ReconstructedState reconstruct_state(const Eigen::VectorXd& z, const Eigen::MatrixXd& M, const EigenBasis& basis,
                                     const BoundaryLifter& actuation, const BoundaryLifter& sde) {
    const auto modes = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index d = z.size() - 1 - modes;
    if (d < 1 || M.cols() != d) throw InvalidArgument("reduced state and M have inconsistent dimensions");
    ReconstructedState out;
    out.X = z.head(d);
    out.V = z(d);
    out.u = basis.combine(z.tail(modes)) + out.V * actuation.function() + (M * out.X)(0) * sde.function();
    return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix in JSON");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

nlohmann::json to_json(const DriftProfile& p) {
    return {{"knots", p.knots}, {"values", matrix_to_json(p.values.transpose())}};
}

DriftProfile drift_from_json(const nlohmann::json& j) {
    DriftProfile p;
    p.knots = j.at("knots").get<std::vector<double>>();
    p.values = matrix_from_json(j.at("values")).transpose();
    return p;
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const ReducedModel& m) {
    return {
        {"format", "heatrisk.reduced_model/1"},
        {"d", m.d},
        {"N", m.N},
        {"n_aug", m.n_aug()},
        {"T", m.T},
        {"mu", m.mu},
        {"r_ctrl", m.r_ctrl},
        {"Delta", matrix_to_json(m.Delta)},
        {"A", matrix_to_json(m.A)},
        {"C", matrix_to_json(m.C)},
        {"B", vec_json(m.B)},
        {"Q", matrix_to_json(m.Q)},
        {"G", matrix_to_json(m.G)},
        {"Z0", vec_json(m.Z0)},
        {"r", to_json(m.r)},
        {"sigma", to_json(m.sigma)},
    };
}

ReducedModel reduced_model_from_json(const nlohmann::json& j) {
    try {
        ReducedModel m;
        m.d = j.at("d").get<Eigen::Index>();
        m.N = j.at("N").get<Eigen::Index>();
        m.T = j.at("T").get<double>();
        m.mu = j.at("mu").get<double>();
        m.r_ctrl = j.at("r_ctrl").get<double>();
        m.Delta = matrix_from_json(j.at("Delta"));
        m.A = matrix_from_json(j.at("A"));
        m.C = matrix_from_json(j.at("C"));
        m.B = vec_from(j.at("B"));
        m.Q = matrix_from_json(j.at("Q"));
        m.G = matrix_from_json(j.at("G"));
        m.Z0 = vec_from(j.at("Z0"));
        m.r = drift_from_json(j.at("r"));
        m.sigma = drift_from_json(j.at("sigma"));
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("reduced model JSON: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

}  // namespace heatrisk
