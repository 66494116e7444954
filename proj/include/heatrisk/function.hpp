#pragma once

#include <nlohmann/json.hpp>

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace heatrisk {

/// Real function on [0, 1] stored as a sum of parametric components
/// (constant, polynomial, trigonometric, hyperbolic) or uniform samples.
///
/// Parametric functions admit exact H^1 inner products: every component is
/// expanded into terms c * x^p * exp(k x) with complex k, and products of
/// such terms integrate in closed form. Sampled components fall back to
/// composite Simpson quadrature.
class H1Function {
public:
    enum class Kind { constant, polynomial, trig, hyperbolic, sampled };

    struct Component {
        Kind kind;
        /// constant: {c}; polynomial: {c0, c1, ...}; trig: {a, b, s} for
        /// a cos(sx) + b sin(sx); hyperbolic: {a, b, k} for a cosh(kx) + b sinh(kx);
        /// sampled: values on a uniform grid including both endpoints.
        std::vector<double> coefficients;
    };

    H1Function() = default;

    static H1Function zero() { return {}; }
    static H1Function constant(double c);
    static H1Function polynomial(std::vector<double> coefficients);
    static H1Function trig(double a, double b, double s);
    static H1Function hyperbolic(double a, double b, double k);
    static H1Function sampled(std::vector<double> values);

    [[nodiscard]] double value(double x) const;
    [[nodiscard]] double derivative(double x) const;
    [[nodiscard]] double second_derivative(double x) const;

    [[nodiscard]] bool is_parametric() const;
    [[nodiscard]] const std::vector<Component>& components() const { return components_; }

    H1Function& operator+=(const H1Function& other);
    H1Function& operator*=(double factor);

    [[nodiscard]] nlohmann::json to_json() const;
    static H1Function from_json(const nlohmann::json& j);

private:
    std::vector<Component> components_;
};

H1Function operator+(H1Function lhs, const H1Function& rhs);
H1Function operator-(H1Function lhs, const H1Function& rhs);
H1Function operator*(double factor, H1Function f);

std::string to_string(H1Function::Kind kind);

/// <f, g>_{H^1} = int f g + int f' g' over (0, 1).
double h1_inner(const H1Function& f, const H1Function& g);

/// Plain L^2 inner product over (0, 1).
double l2_inner(const H1Function& f, const H1Function& g);

/// int_0^1 x^n e^{kx} dx.
std::complex<double> moment_exp(int n, std::complex<double> k);

/// Composite Simpson rule on uniform samples over [0, 1]; trapezoid if the
/// number of intervals is odd.
double simpson(std::span<const double> samples);

}  // namespace heatrisk
