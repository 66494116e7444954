#include "heatrisk/spectral.hpp"

#include "heatrisk/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace heatrisk {

void RobinParams::validate() const {
    if (!(beta0 >= 0.0) || !(beta1 >= 0.0)) {
        throw InvalidArgument("Robin coefficients must be nonnegative");
    }
    if (!std::isfinite(c) || !std::isfinite(mu)) throw InvalidArgument("c and mu must be finite");
    if (!(mu - c > 0.0)) throw InvalidArgument("lifting shift mu must exceed c");
}

RobinParams make_robin(double beta0, double beta1, double c) {
    return RobinParams{beta0, beta1, c, c + 1.0};
}

double characteristic(const RobinParams& p, double s) {
    return (s * s - p.beta0 * p.beta1) * std::sin(s) - s * (p.beta0 + p.beta1) * std::cos(s);
}

namespace {

constexpr double kPi = std::numbers::pi;

double bisect_root(const RobinParams& p, double lo, double hi) {
    double flo = characteristic(p, lo);
    const double fhi = characteristic(p, hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        std::ostringstream msg;
        msg << "eigenvalue root bracketing failed on s in [" << lo << ", " << hi
            << "] (beta0=" << p.beta0 << ", beta1=" << p.beta1 << ")";
        throw NumericalError(msg.str());
    }
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fmid = characteristic(p, mid);
        if (fmid == 0.0) return mid;
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

EigenBasis solve_eigenpairs(const RobinParams& params, std::size_t order) {
    params.validate();
    EigenBasis basis;
    basis.params = params;
    const std::size_t count = order + 1;

    std::vector<double> roots;
    roots.reserve(count);
    if (params.neumann()) {
        for (std::size_t n = 0; n < count; ++n) roots.push_back(static_cast<double>(n) * kPi);
    } else {
        for (std::size_t n = 1; n <= count; ++n) {
            const double lo = std::max(1e-9, static_cast<double>(n - 1) * kPi);
            roots.push_back(bisect_root(params, lo, static_cast<double>(n) * kPi));
        }
    }

    for (const double s : roots) {
        H1Function phi = s == 0.0 ? H1Function::constant(1.0)
                                  : H1Function::trig(1.0, params.beta0 / s, s);
        const double norm = std::sqrt(h1_inner(phi, phi));
        phi *= 1.0 / norm;
        basis.lambdas.push_back(s * s);
        basis.trace0.push_back(phi.value(0.0));
        basis.trace1.push_back(phi.value(1.0));
        basis.funcs.push_back(std::move(phi));
    }

    basis.gram.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    for (std::size_t m = 0; m < count; ++m) {
        for (std::size_t n = m; n < count; ++n) {
            const double g = m == n ? 1.0 : h1_inner(basis.funcs[m], basis.funcs[n]);
            basis.gram(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) = g;
            basis.gram(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = g;
        }
    }
    return basis;
}

Eigen::VectorXd EigenBasis::solve_gram(const Eigen::VectorXd& inner) const {
    if (inner.size() != gram.rows()) throw InvalidArgument("inner-product vector has wrong length");
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("Gram matrix is singular or indefinite");
    return llt.solve(inner);
}

H1Function EigenBasis::combine(const Eigen::VectorXd& kappa) const {
    if (static_cast<std::size_t>(kappa.size()) != size()) throw InvalidArgument("coefficient vector has wrong length");
    H1Function f;
    for (std::size_t n = 0; n < size(); ++n) f += kappa(static_cast<Eigen::Index>(n)) * funcs[n];
    return f;
}

Eigen::RowVectorXd EigenBasis::trace0_row() const {
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(size()));
    for (std::size_t n = 0; n < size(); ++n) row(static_cast<Eigen::Index>(n)) = trace0[n];
    return row;
}

Eigen::VectorXd project_h1(const H1Function& f, const EigenBasis& basis) {
    Eigen::VectorXd inner(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t n = 0; n < basis.size(); ++n) inner(static_cast<Eigen::Index>(n)) = h1_inner(f, basis.funcs[n]);
    return basis.solve_gram(inner);
}

BoundaryLifter solve_lifter(const RobinParams& params, LifterSide side) {
    params.validate();
    const double k = std::sqrt(params.mu - params.c);
    const double ch = std::cosh(k), sh = std::sinh(k);
    // Rows: left residual k b - beta0 a, right residual k(a sh + b ch) + beta1(a ch + b sh).
    Eigen::Matrix2d sys;
    sys << -params.beta0, k,
        k * sh + params.beta1 * ch, k * ch + params.beta1 * sh;
    const Eigen::Vector2d rhs = side == LifterSide::actuation ? Eigen::Vector2d(0.0, 1.0)
                                                              : Eigen::Vector2d(1.0, 0.0);
    const Eigen::FullPivLU<Eigen::Matrix2d> lu(sys);
    if (!lu.isInvertible()) throw NumericalError("boundary lifter system is singular");
    const Eigen::Vector2d ab = lu.solve(rhs);

    BoundaryLifter lifter;
    lifter.side = side;
    lifter.k = k;
    lifter.coef_a = ab(0);
    lifter.coef_b = ab(1);
    const H1Function f = lifter.function();
    lifter.value_at0 = f.value(0.0);
    lifter.value_at1 = f.value(1.0);
    return lifter;
}

BoundaryLifter solve_lifter(const RobinParams& params, LifterSide side, const EigenBasis& basis) {
    if (!(params == basis.params)) throw InvalidArgument("lifter and basis use different Robin parameters");
    BoundaryLifter lifter = solve_lifter(params, side);
    const H1Function f = lifter.function();
    lifter.inner_h1.resize(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t n = 0; n < basis.size(); ++n) {
        lifter.inner_h1(static_cast<Eigen::Index>(n)) = h1_inner(f, basis.funcs[n]);
    }
    lifter.coefficients = basis.solve_gram(lifter.inner_h1);
    return lifter;
}

TraceRepresenter trace_representer(const EigenBasis& basis) {
    // cosh(1 - x) = cosh(1) cosh(x) - sinh(1) sinh(x)
    const double s1 = std::sinh(1.0);
    TraceRepresenter rep;
    rep.function = H1Function::hyperbolic(std::cosh(1.0) / s1, -1.0, 1.0);
    rep.inner_h1.resize(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t n = 0; n < basis.size(); ++n) {
        rep.inner_h1(static_cast<Eigen::Index>(n)) = h1_inner(rep.function, basis.funcs[n]);
    }
    rep.coefficients = basis.solve_gram(rep.inner_h1);
    return rep;
}

}  // namespace heatrisk
