#include "heatrisk/function.hpp"

#include "heatrisk/error.hpp"

#include <algorithm>
#include <cmath>

namespace heatrisk {

namespace {

using cplx = std::complex<double>;

// c * x^power * exp(rate * x)
struct ExpTerm {
    cplx coef;
    int power;
    cplx rate;
};

void append_expansion(const H1Function::Component& comp, std::vector<ExpTerm>& out) {
    const auto& c = comp.coefficients;
    switch (comp.kind) {
        case H1Function::Kind::constant:
            out.push_back({c[0], 0, 0.0});
            break;
        case H1Function::Kind::polynomial:
            for (std::size_t p = 0; p < c.size(); ++p) {
                if (c[p] != 0.0) out.push_back({c[p], static_cast<int>(p), 0.0});
            }
            break;
        case H1Function::Kind::trig: {
            const double a = c[0], b = c[1], s = c[2];
            if (s == 0.0) {
                out.push_back({a, 0, 0.0});
                break;
            }
            const cplx i(0.0, 1.0);
            out.push_back({cplx(a / 2.0, -b / 2.0), 0, i * s});
            out.push_back({cplx(a / 2.0, b / 2.0), 0, -i * s});
            break;
        }
        case H1Function::Kind::hyperbolic: {
            const double a = c[0], b = c[1], k = c[2];
            if (k == 0.0) {
                out.push_back({a, 0, 0.0});
                break;
            }
            out.push_back({(a + b) / 2.0, 0, k});
            out.push_back({(a - b) / 2.0, 0, -k});
            break;
        }
        case H1Function::Kind::sampled:
            throw InvalidArgument("sampled component has no exponential expansion");
    }
}

std::vector<ExpTerm> expand(const H1Function& f) {
    std::vector<ExpTerm> terms;
    for (const auto& comp : f.components()) append_expansion(comp, terms);
    return terms;
}

std::vector<ExpTerm> differentiate(const std::vector<ExpTerm>& terms) {
    std::vector<ExpTerm> out;
    out.reserve(2 * terms.size());
    for (const auto& t : terms) {
        if (t.power > 0) out.push_back({t.coef * static_cast<double>(t.power), t.power - 1, t.rate});
        if (t.rate != cplx(0.0)) out.push_back({t.coef * t.rate, t.power, t.rate});
    }
    return out;
}

double integrate_products(const std::vector<ExpTerm>& f, const std::vector<ExpTerm>& g) {
    cplx total = 0.0;
    for (const auto& a : f) {
        for (const auto& b : g) {
            total += a.coef * b.coef * moment_exp(a.power + b.power, a.rate + b.rate);
        }
    }
    return total.real();
}

// Second-order nodal derivative of uniform samples on [0, 1].
std::vector<double> nodal_derivative(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<double> d(n, 0.0);
    if (n < 3) {
        if (n == 2) d[0] = d[1] = v[1] - v[0];
        return d;
    }
    const double h = 1.0 / static_cast<double>(n - 1);
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    return d;
}

double interpolate(std::span<const double> v, double x) {
    const std::size_t n = v.size();
    if (n == 1) return v[0];
    const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(n - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[i + 1];
}

double eval_component(const H1Function::Component& comp, double x, int order) {
    const auto& c = comp.coefficients;
    switch (comp.kind) {
        case H1Function::Kind::constant:
            return order == 0 ? c[0] : 0.0;
        case H1Function::Kind::polynomial: {
            double acc = 0.0;
            for (std::size_t p = c.size(); p-- > static_cast<std::size_t>(order);) {
                double factor = 1.0;
                for (int q = 0; q < order; ++q) factor *= static_cast<double>(p - q);
                acc = acc * x + factor * c[p];
            }
            return acc;
        }
        case H1Function::Kind::trig: {
            const double a = c[0], b = c[1], s = c[2];
            const double cs = std::cos(s * x), sn = std::sin(s * x);
            switch (order) {
                case 0: return a * cs + b * sn;
                case 1: return s * (-a * sn + b * cs);
                default: return -s * s * (a * cs + b * sn);
            }
        }
        case H1Function::Kind::hyperbolic: {
            const double a = c[0], b = c[1], k = c[2];
            const double ch = std::cosh(k * x), sh = std::sinh(k * x);
            switch (order) {
                case 0: return a * ch + b * sh;
                case 1: return k * (a * sh + b * ch);
                default: return k * k * (a * ch + b * sh);
            }
        }
        case H1Function::Kind::sampled: {
            if (order == 0) return interpolate(c, x);
            auto d = nodal_derivative(c);
            if (order == 1) return interpolate(d, x);
            return interpolate(nodal_derivative(d), x);
        }
    }
    return 0.0;
}

}  // namespace

H1Function H1Function::constant(double c) {
    H1Function f;
    f.components_.push_back({Kind::constant, {c}});
    return f;
}

H1Function H1Function::polynomial(std::vector<double> coefficients) {
    H1Function f;
    f.components_.push_back({Kind::polynomial, std::move(coefficients)});
    return f;
}

H1Function H1Function::trig(double a, double b, double s) {
    H1Function f;
    f.components_.push_back({Kind::trig, {a, b, s}});
    return f;
}

H1Function H1Function::hyperbolic(double a, double b, double k) {
    H1Function f;
    f.components_.push_back({Kind::hyperbolic, {a, b, k}});
    return f;
}

H1Function H1Function::sampled(std::vector<double> values) {
    if (values.size() < 2) throw InvalidArgument("sampled function needs at least 2 values");
    H1Function f;
    f.components_.push_back({Kind::sampled, std::move(values)});
    return f;
}

double H1Function::value(double x) const {
    double acc = 0.0;
    for (const auto& c : components_) acc += eval_component(c, x, 0);
    return acc;
}

double H1Function::derivative(double x) const {
    double acc = 0.0;
    for (const auto& c : components_) acc += eval_component(c, x, 1);
    return acc;
}

double H1Function::second_derivative(double x) const {
    double acc = 0.0;
    for (const auto& c : components_) acc += eval_component(c, x, 2);
    return acc;
}

bool H1Function::is_parametric() const {
    return std::none_of(components_.begin(), components_.end(),
                        [](const Component& c) { return c.kind == Kind::sampled; });
}

H1Function& H1Function::operator+=(const H1Function& other) {
    components_.insert(components_.end(), other.components_.begin(), other.components_.end());
    return *this;
}

H1Function& H1Function::operator*=(double factor) {
    for (auto& comp : components_) {
        switch (comp.kind) {
            case Kind::trig:
            case Kind::hyperbolic:
                comp.coefficients[0] *= factor;
                comp.coefficients[1] *= factor;
                break;
            default:
                for (auto& c : comp.coefficients) c *= factor;
        }
    }
    return *this;
}

H1Function operator+(H1Function lhs, const H1Function& rhs) {
    lhs += rhs;
    return lhs;
}

H1Function operator-(H1Function lhs, const H1Function& rhs) {
    lhs += -1.0 * rhs;
    return lhs;
}

H1Function operator*(double factor, H1Function f) {
    f *= factor;
    return f;
}

std::string to_string(H1Function::Kind kind) {
    switch (kind) {
        case H1Function::Kind::constant: return "constant";
        case H1Function::Kind::polynomial: return "polynomial";
        case H1Function::Kind::trig: return "trig";
        case H1Function::Kind::hyperbolic: return "hyperbolic";
        case H1Function::Kind::sampled: return "sampled";
    }
    return "unknown";
}

nlohmann::json H1Function::to_json() const {
    auto terms = nlohmann::json::array();
    for (const auto& c : components_) {
        terms.push_back({{"kind", to_string(c.kind)}, {"coefficients", c.coefficients}});
    }
    return {{"kind", "sum"}, {"terms", terms}};
}

H1Function H1Function::from_json(const nlohmann::json& j) {
    auto single = [](const nlohmann::json& t) {
        const auto kind = t.at("kind").get<std::string>();
        auto c = t.at("coefficients").get<std::vector<double>>();
        auto need = [&](std::size_t n) {
            if (c.size() != n) {
                throw ConfigError(kind + " function: expected " + std::to_string(n) + " coefficients");
            }
        };
        if (kind == "constant") {
            need(1);
            return H1Function::constant(c[0]);
        }
        if (kind == "polynomial") return H1Function::polynomial(std::move(c));
        if (kind == "trig") {
            need(3);
            return H1Function::trig(c[0], c[1], c[2]);
        }
        if (kind == "hyperbolic") {
            need(3);
            return H1Function::hyperbolic(c[0], c[1], c[2]);
        }
        if (kind == "sampled") return H1Function::sampled(std::move(c));
        throw ConfigError("unknown function kind '" + kind + "'");
    };
    if (j.contains("terms")) {
        H1Function f;
        for (const auto& t : j.at("terms")) f += single(t);
        return f;
    }
    return single(j);
}

std::complex<double> moment_exp(int n, std::complex<double> k) {
    if (std::abs(k) < 2.0) {
        // sum_j k^j / (j! (n + j + 1))
        cplx term = 1.0;
        cplx sum = 1.0 / static_cast<double>(n + 1);
        for (int j = 1; j < 200; ++j) {
            term *= k / static_cast<double>(j);
            const cplx add = term / static_cast<double>(n + j + 1);
            sum += add;
            if (std::abs(add) < 1e-18 * std::max(1.0, std::abs(sum))) break;
        }
        return sum;
    }
    const cplx ek = std::exp(k);
    cplx moment = (ek - 1.0) / k;
    for (int p = 1; p <= n; ++p) moment = (ek - static_cast<double>(p) * moment) / k;
    return moment;
}

double simpson(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) return 0.0;
    const std::size_t intervals = n - 1;
    const double h = 1.0 / static_cast<double>(intervals);
    if (intervals % 2 != 0) {
        double acc = 0.5 * (samples.front() + samples.back());
        for (std::size_t i = 1; i + 1 < n; ++i) acc += samples[i];
        return acc * h;
    }
    double acc = samples.front() + samples.back();
    for (std::size_t i = 1; i + 1 < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * samples[i];
    return acc * h / 3.0;
}

namespace {

std::size_t quadrature_points(const H1Function& f, const H1Function& g) {
    std::size_t n = 2001;
    for (const auto* fn : {&f, &g}) {
        for (const auto& c : fn->components()) {
            if (c.kind == H1Function::Kind::sampled) n = std::max(n, c.coefficients.size());
        }
    }
    return n;
}

// Values and nodal derivatives on an n-point grid. Sampled components on a
// matching grid use their own nodes; everything else is evaluated pointwise.
void nodal_values(const H1Function& f, std::size_t n, std::vector<double>& val, std::vector<double>& der) {
    val.assign(n, 0.0);
    der.assign(n, 0.0);
    for (const auto& c : f.components()) {
        if (c.kind == H1Function::Kind::sampled && c.coefficients.size() == n) {
            const auto d = nodal_derivative(c.coefficients);
            for (std::size_t i = 0; i < n; ++i) {
                val[i] += c.coefficients[i];
                der[i] += d[i];
            }
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(i) / static_cast<double>(n - 1);
            val[i] += eval_component(c, x, 0);
            der[i] += eval_component(c, x, 1);
        }
    }
}

double quadrature_inner(const H1Function& f, const H1Function& g, bool with_derivative) {
    const std::size_t n = quadrature_points(f, g);
    std::vector<double> fv, fd, gv, gd;
    nodal_values(f, n, fv, fd);
    nodal_values(g, n, gv, gd);
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = fv[i] * gv[i] + (with_derivative ? fd[i] * gd[i] : 0.0);
    return simpson(prod);
}

}  // namespace

double h1_inner(const H1Function& f, const H1Function& g) {
    if (f.is_parametric() && g.is_parametric()) {
        const auto ft = expand(f);
        const auto gt = expand(g);
        return integrate_products(ft, gt) + integrate_products(differentiate(ft), differentiate(gt));
    }
    return quadrature_inner(f, g, true);
}

double l2_inner(const H1Function& f, const H1Function& g) {
    if (f.is_parametric() && g.is_parametric()) return integrate_products(expand(f), expand(g));
    return quadrature_inner(f, g, false);
}

}  // namespace heatrisk
