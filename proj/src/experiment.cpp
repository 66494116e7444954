#include "heatrisk/experiment.hpp"

#include "heatrisk/error.hpp"
#include "heatrisk/io.hpp"
#include "heatrisk/noise.hpp"
#include "heatrisk/spectral.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

namespace heatrisk {

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& path, const std::string& why) const {
        std::ostringstream os;
        os << source_;
        if (node.IsDefined() && node.Mark().line >= 0) os << ':' << node.Mark().line + 1;
        os << ": " << path << ": " << why;
        throw ConfigError(os.str());
    }

    void check_keys(const YAML::Node& block, const std::string& path, const std::set<std::string>& allowed) const {
        if (!block.IsMap()) fail(block, path, "expected a mapping");
        for (const auto& kv : block) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, path.empty() ? key : path + "." + key, "unknown key");
        }
    }

    double number(const YAML::Node& n, const std::string& path) const {
        if (!n.IsScalar()) fail(n, path, "expected a number");
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            fail(n, path, "expected a number, got '" + n.Scalar() + "'");
        }
    }

    std::size_t count(const YAML::Node& n, const std::string& path) const {
        const double x = number(n, path);
        if (!(x >= 0.0) || x != std::floor(x) || x > 1e15) fail(n, path, "expected a nonnegative integer");
        return static_cast<std::size_t>(x);
    }

    bool flag(const YAML::Node& n, const std::string& path) const {
        try {
            return n.as<bool>();
        } catch (const YAML::Exception&) {
            fail(n, path, "expected true or false");
        }
    }

    std::string word(const YAML::Node& n, const std::string& path) const {
        if (!n.IsScalar()) fail(n, path, "expected a string");
        return n.Scalar();
    }

    std::vector<double> vector(const YAML::Node& n, const std::string& path, std::optional<std::size_t> len) const {
        if (!n.IsSequence()) fail(n, path, "expected a list of numbers");
        if (len && n.size() != *len) fail(n, path, "expected " + std::to_string(*len) + " entries");
        std::vector<double> out;
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(number(n[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

    Eigen::MatrixXd matrix(const YAML::Node& n, const std::string& path, Eigen::Index rows, Eigen::Index cols) const {
        if (!n.IsSequence() || n.size() == 0) fail(n, path, "expected a list of rows");
        if (static_cast<Eigen::Index>(n.size()) != rows) fail(n, path, "expected " + std::to_string(rows) + " rows");
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const YAML::Node row = n[static_cast<std::size_t>(i)];
            if (!row.IsSequence() || static_cast<Eigen::Index>(row.size()) != cols) {
                fail(row, path, "expected " + std::to_string(cols) + " columns");
            }
            for (Eigen::Index j = 0; j < cols; ++j) {
                m(i, j) = number(row[static_cast<std::size_t>(j)], path);
            }
        }
        return m;
    }

    Interval interval(const YAML::Node& n, const std::string& path) const {
        const auto v = vector(n, path, 2);
        if (!(v[0] <= v[1])) fail(n, path, "expected [lo, hi] with lo <= hi");
        return {v[0], v[1]};
    }

    DriftProfile drift(const YAML::Node& n, const std::string& path, Eigen::Index d) const {
        if (n.IsSequence()) {
            const auto v = vector(n, path, static_cast<std::size_t>(d));
            return DriftProfile::constant(Eigen::Map<const Eigen::VectorXd>(v.data(), d));
        }
        check_keys(n, path, {"knots", "values"});
        DriftProfile p;
        p.knots = vector(n["knots"], path + ".knots", std::nullopt);
        const Eigen::MatrixXd rows = matrix(n["values"], path + ".values", static_cast<Eigen::Index>(p.knots.size()), d);
        p.values = rows.transpose();
        return p;
    }

    nlohmann::json to_json(const YAML::Node& n) const {
        if (n.IsMap()) {
            nlohmann::json j = nlohmann::json::object();
            for (const auto& kv : n) j[kv.first.as<std::string>()] = to_json(kv.second);
            return j;
        }
        if (n.IsSequence()) {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& e : n) j.push_back(to_json(e));
            return j;
        }
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            return n.Scalar();
        }
    }

private:
    std::string source_;
};

void reference_defaults(ExperimentConfig& cfg) {
    auto& s = cfg.system;
    s.A.resize(2, 2);
    s.A << 0.6, 0.4, 0.0, 0.4;
    s.B.resize(2, 1);
    s.B << 0.0, 1.0;
    s.C = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    s.D = Eigen::MatrixXd::Zero(2, 1);
    s.M = Eigen::MatrixXd::Zero(1, 2);
    s.sigma_drift = DriftProfile::constant(Eigen::VectorXd::Constant(2, 0.05));
    s.r_drift = DriftProfile::constant(Eigen::VectorXd::Zero(2));
    s.robin = make_robin(0.0, 0.0, 0.2);
    s.T = 4.0;
    s.X0 = Eigen::VectorXd::Zero(2);
    s.V0 = 0.0;
    cfg.Q = Eigen::MatrixXd::Identity(2, 2);
    cfg.G = Eigen::MatrixXd::Zero(2, 2);
}

void parse_system(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "system", {"A", "B", "C", "D", "M", "sigma", "r", "c", "beta0", "beta1", "T", "X0", "u0", "V0"});
    auto& s = cfg.system;
    Eigen::Index d = s.A.rows();
    if (n["A"]) {
        const YAML::Node a = n["A"];
        if (!a.IsSequence() || a.size() == 0) rd.fail(a, "system.A", "expected a list of rows");
        d = static_cast<Eigen::Index>(a.size());
        s.A = rd.matrix(a, "system.A", d, d);
    }
    const bool resized = d != 2;
    auto required = [&](const char* key) {
        if (resized && !n[key]) rd.fail(n, std::string("system.") + key, "required when A is not 2x2");
    };
    required("B");
    required("C");
    required("X0");
    if (n["B"]) s.B = rd.matrix(n["B"], "system.B", d, 1);
    if (n["C"]) s.C = rd.matrix(n["C"], "system.C", d, d);
    s.D = n["D"] ? rd.matrix(n["D"], "system.D", d, 1) : Eigen::MatrixXd(resized ? Eigen::MatrixXd::Zero(d, 1) : s.D);
    s.M = n["M"] ? rd.matrix(n["M"], "system.M", 1, d) : Eigen::MatrixXd(resized ? Eigen::MatrixXd::Zero(1, d) : s.M);
    if (n["sigma"]) {
        s.sigma_drift = rd.drift(n["sigma"], "system.sigma", d);
    } else if (resized) {
        s.sigma_drift = DriftProfile::constant(Eigen::VectorXd::Zero(d));
    }
    if (n["r"]) {
        s.r_drift = rd.drift(n["r"], "system.r", d);
    } else if (resized) {
        s.r_drift = DriftProfile::constant(Eigen::VectorXd::Zero(d));
    }
    const double c = n["c"] ? rd.number(n["c"], "system.c") : s.robin.c;
    const double b0 = n["beta0"] ? rd.number(n["beta0"], "system.beta0") : s.robin.beta0;
    const double b1 = n["beta1"] ? rd.number(n["beta1"], "system.beta1") : s.robin.beta1;
    s.robin = make_robin(b0, b1, c);
    if (n["T"]) s.T = rd.number(n["T"], "system.T");
    if (n["X0"]) {
        const auto x = rd.vector(n["X0"], "system.X0", static_cast<std::size_t>(d));
        s.X0 = Eigen::Map<const Eigen::VectorXd>(x.data(), d);
    }
    if (n["V0"]) s.V0 = rd.number(n["V0"], "system.V0");
    if (n["u0"]) {
        const YAML::Node u = n["u0"];
        if (u.IsScalar() && u.Scalar() == "compatible") {
            cfg.u0.reset();
        } else {
            try {
                cfg.u0 = H1Function::from_json(rd.to_json(u));
            } catch (const std::exception& e) {
                rd.fail(u, "system.u0", e.what());
            }
        }
    }
    if (cfg.Q.rows() != d) cfg.Q = Eigen::MatrixXd::Identity(d, d);
    if (cfg.G.rows() != d) cfg.G = Eigen::MatrixXd::Zero(d, d);
}

void parse_reduction(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "reduction", {"N", "mu", "signs"});
    if (n["N"]) cfg.order = rd.count(n["N"], "reduction.N");
    if (n["mu"]) cfg.system.robin.mu = rd.number(n["mu"], "reduction.mu");
    if (n["signs"]) {
        const auto w = rd.word(n["signs"], "reduction.signs");
        if (w == "substitution") {
            cfg.signs = SignConvention::substitution;
        } else if (w == "printed") {
            cfg.signs = SignConvention::printed;
        } else {
            rd.fail(n["signs"], "reduction.signs", "expected substitution or printed");
        }
    }
}

void parse_simulation(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "simulation", {"steps", "dt", "S_train", "S_eval", "seed", "workers"});
    if (n["steps"] && n["dt"]) rd.fail(n["dt"], "simulation.dt", "give either steps or dt");
    if (n["steps"]) cfg.steps = rd.count(n["steps"], "simulation.steps");
    if (n["dt"]) {
        const double dt = rd.number(n["dt"], "simulation.dt");
        if (!(dt > 0.0)) rd.fail(n["dt"], "simulation.dt", "must be positive");
        const double m = std::round(cfg.system.T / dt);
        if (m < 1.0 || std::abs(m * dt - cfg.system.T) > 1e-9 * cfg.system.T) {
            rd.fail(n["dt"], "simulation.dt", "must divide the horizon");
        }
        cfg.steps = static_cast<std::size_t>(m);
    }
    if (n["S_train"]) cfg.samples_train = rd.count(n["S_train"], "simulation.S_train");
    if (n["S_eval"]) cfg.samples_eval = rd.count(n["S_eval"], "simulation.S_eval");
    if (n["seed"]) cfg.seed = rd.count(n["seed"], "simulation.seed");
    if (n["workers"]) cfg.workers = static_cast<int>(rd.count(n["workers"], "simulation.workers"));
}

void parse_cost(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "cost", {"c_q", "Q", "G", "r", "terminal"});
    const Eigen::Index d = cfg.system.A.rows();
    if (n["c_q"] && n["Q"]) rd.fail(n["Q"], "cost.Q", "give either c_q or Q");
    if (n["c_q"]) cfg.Q = rd.number(n["c_q"], "cost.c_q") * Eigen::MatrixXd::Identity(d, d);
    if (n["Q"]) cfg.Q = rd.matrix(n["Q"], "cost.Q", d, d);
    if (n["G"]) cfg.G = rd.matrix(n["G"], "cost.G", d, d);
    if (n["r"]) cfg.r_ctrl = rd.number(n["r"], "cost.r");
    if (n["terminal"]) {
        const auto w = rd.word(n["terminal"], "cost.terminal");
        if (w == "physical") {
            cfg.terminal = TerminalWeight::physical;
        } else if (w == "riccati") {
            cfg.terminal = TerminalWeight::riccati;
        } else {
            rd.fail(n["terminal"], "cost.terminal", "expected physical or riccati");
        }
    }
}

void parse_risk(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "risk", {"kind", "alpha", "gamma"});
    if (n["kind"]) {
        const auto w = rd.word(n["kind"], "risk.kind");
        if (w == "cvar") {
            cfg.risk.kind = RiskKind::cvar;
        } else if (w == "expectation") {
            cfg.risk.kind = RiskKind::expectation;
        } else {
            rd.fail(n["kind"], "risk.kind", "expected cvar or expectation");
        }
    }
    if (n["alpha"]) cfg.risk.alpha = rd.number(n["alpha"], "risk.alpha");
    if (n["gamma"]) cfg.risk.gamma = rd.number(n["gamma"], "risk.gamma");
    try {
        cfg.risk.validate();
    } catch (const std::exception& e) {
        rd.fail(n, "risk", e.what());
    }
}

void parse_optimizer(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "optimizer", {"iterations", "eta", "beta_step", "box_v", "box_K", "adaptive", "frozen_bank",
                                   "carry", "eval_every"});
    if (n["iterations"]) cfg.iterations = rd.count(n["iterations"], "optimizer.iterations");
    if (n["eta"]) cfg.eta = rd.number(n["eta"], "optimizer.eta");
    if (n["beta_step"]) cfg.beta_step = rd.number(n["beta_step"], "optimizer.beta_step");
    if (n["box_v"]) cfg.box_v = rd.interval(n["box_v"], "optimizer.box_v");
    if (n["box_K"]) cfg.box_K = rd.interval(n["box_K"], "optimizer.box_K");
    if (n["adaptive"]) cfg.adaptive = rd.flag(n["adaptive"], "optimizer.adaptive");
    if (n["frozen_bank"]) cfg.frozen_bank = rd.flag(n["frozen_bank"], "optimizer.frozen_bank");
    if (n["carry"]) {
        const auto w = rd.word(n["carry"], "optimizer.carry");
        if (w == "rank") {
            cfg.carry = DualCarry::rank;
        } else if (w == "index") {
            cfg.carry = DualCarry::index;
        } else {
            rd.fail(n["carry"], "optimizer.carry", "expected rank or index");
        }
    }
    if (n["eval_every"]) cfg.eval_every = rd.count(n["eval_every"], "optimizer.eval_every");
}

void parse_output(const Reader& rd, const YAML::Node& n, ExperimentConfig& cfg) {
    rd.check_keys(n, "output", {"directory", "levels", "histogram_bins"});
    if (n["directory"]) cfg.output_dir = rd.word(n["directory"], "output.directory");
    if (n["levels"]) {
        cfg.levels = rd.vector(n["levels"], "output.levels", std::nullopt);
        for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
            const double p = cfg.levels[i];
            if (!(p > 0.0 && p < 1.0) || (i > 0 && !(p > cfg.levels[i - 1]))) {
                rd.fail(n["levels"], "output.levels", "expected strictly increasing levels in (0, 1)");
            }
        }
    }
    if (n["histogram_bins"]) cfg.histogram_bins = rd.count(n["histogram_bins"], "output.histogram_bins");
}

void validate_config(const Reader& rd, const YAML::Node& root, const ExperimentConfig& cfg) {
    auto check = [&](const char* block, auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            rd.fail(root[block] ? root[block] : root, block, e.what());
        }
    };
    check("system", [&] {
        CoupledSystemSpec spec = cfg.system;
        spec.u0 = H1Function::zero();
        spec.robin.validate();
        if (!(spec.T > 0.0)) throw InvalidArgument("T must be positive");
    });
    check("simulation", [&] {
        if (cfg.steps == 0) throw InvalidArgument("steps must be positive");
        if (cfg.samples_train == 0 || cfg.samples_eval == 0) throw InvalidArgument("sample counts must be positive");
    });
    check("cost", [&] {
        if (!(cfg.r_ctrl > 0.0)) throw InvalidArgument("r must be positive");
        assemble_cost(cfg.Q, cfg.G, cfg.r_ctrl, cfg.order);
    });
    check("optimizer", [&] {
        if (cfg.eval_every == 0) throw InvalidArgument("eval_every must be positive");
        if (!(cfg.eta >= 0.0) || !(cfg.beta_step >= 0.0)) throw InvalidArgument("step sizes must be nonnegative");
    });
    check("output", [&] {
        if (cfg.histogram_bins == 0) throw InvalidArgument("histogram_bins must be positive");
    });
}

std::string fmt(double x) { return format_double(x); }

nlohmann::json policy_artifact(const FeedbackPolicy& policy, const ExperimentConfig& cfg, const char* stage,
                               std::size_t iterations) {
    nlohmann::json j = to_json(policy, cfg.grid());
    j["provenance"] = {{"stage", stage}, {"seed", cfg.seed}, {"iterations", iterations}};
    return j;
}

}  // namespace

Schedule ExperimentConfig::schedule() const {
    Schedule s;
    s.iterations = iterations;
    s.eta = eta;
    s.beta_step = beta_step;
    s.samples = samples_train;
    s.seed = seed;
    s.frozen_bank = frozen_bank;
    s.carry = carry;
    s.adaptive = adaptive;
    s.eval_every = eval_every;
    s.eval_samples = samples_eval;
    s.eval_seed = eval_seed();
    s.workers = workers;
    return s;
}

std::uint64_t ExperimentConfig::eval_seed() const { return mix_seed(seed, kEvalStream); }

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    const Reader rd(source);
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    ExperimentConfig cfg;
    reference_defaults(cfg);
    if (root.IsNull()) return cfg;
    rd.check_keys(root, "", {"system", "reduction", "simulation", "cost", "risk", "optimizer", "output"});
    if (root["system"]) parse_system(rd, root["system"], cfg);
    if (root["reduction"]) parse_reduction(rd, root["reduction"], cfg);
    if (root["simulation"]) parse_simulation(rd, root["simulation"], cfg);
    if (root["cost"]) parse_cost(rd, root["cost"], cfg);
    if (root["risk"]) parse_risk(rd, root["risk"], cfg);
    if (root["optimizer"]) parse_optimizer(rd, root["optimizer"], cfg);
    if (root["output"]) parse_output(rd, root["output"], cfg);
    validate_config(rd, root, cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.string());
}

CoupledSystemSpec resolved_system(const ExperimentConfig& cfg) {
    CoupledSystemSpec spec = cfg.system;
    if (cfg.u0) {
        spec.u0 = *cfg.u0;
    } else {
        const double mx = (spec.M * spec.X0)(0);
        spec.u0 = spec.V0 * solve_lifter(spec.robin, LifterSide::actuation).function() +
                  mx * solve_lifter(spec.robin, LifterSide::sde).function();
    }
    return spec;
}

ReducedModel build_model(const ExperimentConfig& cfg) {
    ReducedModel model = reduce(resolved_system(cfg), cfg.order, cfg.signs);
    attach_cost(model, assemble_cost(cfg.Q, cfg.G, cfg.r_ctrl, cfg.order));
    if (cfg.terminal == TerminalWeight::riccati) model.G = solve_stochastic_are(model).P;
    return model;
}

std::string model_summary(const ExperimentConfig& cfg, const ReducedModel& model) {
    const auto& p = cfg.system.robin;
    const EigenBasis basis = solve_eigenpairs(p, cfg.order);
    const BoundaryLifter theta = solve_lifter(p, LifterSide::actuation);
    const BoundaryLifter psi = solve_lifter(p, LifterSide::sde);
    std::ostringstream os;
    os << "d = " << model.d << "\n";
    os << "N = " << model.N << "\n";
    os << "n_aug = " << model.n_aug() << "\n";
    os << "robin: beta0 = " << fmt(p.beta0) << ", beta1 = " << fmt(p.beta1) << ", c = " << fmt(p.c)
       << ", mu = " << fmt(p.mu) << "\n";
    os << "lambda = [";
    for (std::size_t n = 0; n < basis.lambdas.size(); ++n) os << (n ? ", " : "") << fmt(basis.lambdas[n]);
    os << "]\n";
    os << "theta(0) = " << fmt(theta.value_at0) << ", theta(1) = " << fmt(theta.value_at1) << "\n";
    os << "psi(0) = " << fmt(psi.value_at0) << ", psi(1) = " << fmt(psi.value_at1) << "\n";
    os << "|Delta + A|_F = " << fmt(model.drift_matrix().norm()) << "\n";
    os << "|C|_F = " << fmt(model.C.norm()) << "\n";
    os << "|B|_2 = " << fmt(model.B.norm()) << "\n";
    os << "|Q|_F = " << fmt(model.Q.norm()) << ", |G|_F = " << fmt(model.G.norm()) << "\n";
    return os.str();
}

QuantileReport quantile_report(std::span<const double> baseline, std::span<const double> optimized,
                               std::span<const double> levels) {
    if (baseline.empty() || optimized.empty()) throw InvalidArgument("cost samples must be non-empty");
    if (baseline.size() != optimized.size()) {
        throw InvalidArgument("cost samples differ in size (" + std::to_string(baseline.size()) + " vs " +
                              std::to_string(optimized.size()) + ")");
    }
    QuantileReport r;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double p = levels[i];
        if (!(p > 0.0 && p < 1.0) || (i > 0 && !(p > levels[i - 1]))) {
            throw InvalidArgument("levels must be strictly increasing in (0, 1)");
        }
        r.levels.push_back(p);
        r.cost1.push_back(empirical_quantile(baseline, p));
        r.cost2.push_back(empirical_quantile(optimized, p));
        r.difference.push_back(r.cost1.back() - r.cost2.back());
    }
    return r;
}

Histogram histogram(std::span<const double> baseline, std::span<const double> optimized, std::size_t bins) {
    if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
    if (baseline.empty() || optimized.empty()) throw InvalidArgument("cost samples must be non-empty");
    double lo = baseline[0], hi = baseline[0];
    for (auto s : {baseline, optimized}) {
        for (double x : s) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t k = 0; k < bins; ++k) h.edges[k] = lo + width * static_cast<double>(k);
    h.edges[bins] = hi;
    auto fill = [&](std::span<const double> s, std::vector<std::size_t>& counts) {
        counts.assign(bins, 0);
        for (double x : s) {
            auto k = static_cast<std::size_t>((x - lo) / width);
            counts[std::min(k, bins - 1)] += 1;
        }
    };
    fill(baseline, h.baseline);
    fill(optimized, h.optimized);
    return h;
}

nlohmann::json to_json(const QuantileReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < report.levels.size(); ++i) {
        rows.push_back({{"level", report.levels[i]},
                        {"cost1", report.cost1[i]},
                        {"cost2", report.cost2[i]},
                        {"difference", report.difference[i]}});
    }
    return rows;
}

nlohmann::json to_json(const Histogram& h) {
    return {{"edges", h.edges}, {"baseline", h.baseline}, {"optimized", h.optimized}};
}

std::string quantiles_to_csv(const QuantileReport& report) {
    std::string out = "level,cost1,cost2,difference\n";
    for (std::size_t i = 0; i < report.levels.size(); ++i) {
        out += fmt(report.levels[i]) + ',' + fmt(report.cost1[i]) + ',' + fmt(report.cost2[i]) + ',' +
               fmt(report.difference[i]) + '\n';
    }
    return out;
}

void cmd_reduce(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ReducedModel model = build_model(cfg);
    write_json_file(out / artifact::model, to_json(model));
    write_text_file(out / artifact::summary, model_summary(cfg, model));
}

void cmd_baseline(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ReducedModel model = reduced_model_from_json(read_json_file(out / artifact::model));
    const RiccatiSolution sol = solve_stochastic_are(model);
    const TimeGrid grid = cfg.grid();
    const BaselinePolicy base = baseline_policy(sol, grid, cfg.box_v, cfg.box_K);
    for (const auto& w : base.warnings) std::cerr << "warning: " << w << "\n";
    const NoiseBank bank(cfg.eval_seed(), cfg.samples_eval, grid.steps, grid.T);
    std::vector<double> costs;
    evaluate_policy(model, base.policy, cfg.risk, bank, grid, cfg.workers, &costs);
    write_json_file(out / artifact::riccati, to_json(sol));
    write_json_file(out / artifact::baseline_policy, policy_artifact(base.policy, cfg, "baseline", 0));
    write_costs_csv(out / artifact::baseline_costs, costs);
}

void cmd_optimize(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ReducedModel model = reduced_model_from_json(read_json_file(out / artifact::model));
    const FeedbackPolicy init = policy_from_json(read_json_file(out / artifact::baseline_policy));
    const TimeGrid grid = cfg.grid();
    const Schedule schedule = cfg.schedule();
    auto progress = [&](const OptimizerState& s) {
        if (s.iteration % cfg.eval_every == 0 && !s.evaluations.empty()) {
            const auto& e = s.evaluations.back();
            std::fprintf(stderr, "iteration %zu: held-out risk %.6g, mean %.6g\n", e.iteration, e.risk, e.mean_cost);
        }
    };
    OptimizerState state;
    try {
        state = run_optimization(model, cfg.risk, init, schedule, grid, progress);
    } catch (const DivergenceError& e) {
        const auto& good = e.last_good();
        write_json_file(out / artifact::last_good_policy,
                        policy_artifact(good.policy, cfg, "last_good", good.iteration));
        std::ostringstream hist;
        write_history_csv(hist, good.history);
        write_text_file(out / artifact::history, hist.str());
        throw;
    }
    const NoiseBank bank(cfg.eval_seed(), cfg.samples_eval, grid.steps, grid.T);
    std::vector<double> costs;
    evaluate_policy(model, state.policy, cfg.risk, bank, grid, cfg.workers, &costs);
    write_json_file(out / artifact::policy, policy_artifact(state.policy, cfg, "optimized", state.iteration));
    std::ostringstream hist, evals;
    write_history_csv(hist, state.history);
    write_evaluations_csv(evals, state.evaluations);
    write_text_file(out / artifact::history, hist.str());
    write_text_file(out / artifact::evaluations, evals.str());
    write_costs_csv(out / artifact::optimized_costs, costs);
}

QuantileReport cmd_report(const std::filesystem::path& baseline_csv, const std::filesystem::path& optimized_csv,
                          std::span<const double> levels, std::size_t bins, const std::filesystem::path& out) {
    const auto c1 = read_costs_csv(baseline_csv);
    const auto c2 = read_costs_csv(optimized_csv);
    const QuantileReport report = quantile_report(c1, c2, levels);
    const Histogram h = histogram(c1, c2, bins);
    nlohmann::json j;
    j["format"] = "heatrisk.report/1";
    j["samples"] = c1.size();
    j["quantiles"] = to_json(report);
    j["summary"] = {{"baseline", {{"mean", mean(c1)}, {"cvar_0.1", cvar_estimate(c1, 0.1)}}},
                    {"optimized", {{"mean", mean(c2)}, {"cvar_0.1", cvar_estimate(c2, 0.1)}}}};
    j["histogram"] = to_json(h);
    write_json_file(out / artifact::report, j);
    write_text_file(out / artifact::quantiles, quantiles_to_csv(report));
    return report;
}

void cmd_all(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    cmd_reduce(cfg, out);
    cmd_baseline(cfg, out);
    cmd_optimize(cfg, out);
    cmd_report(out / artifact::baseline_costs, out / artifact::optimized_costs, cfg.levels, cfg.histogram_bins, out);
}

}  // namespace heatrisk
