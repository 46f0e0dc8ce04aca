#include "mdfem/cli.hpp"

#include "mdfem/kernelspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mdfem::cli {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + v);
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": " + v);
    }
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_double(key, trim(tok)));
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty value for " + key);

        if (key == "problem.family") cfg.family = value;
        else if (key == "problem.c") cfg.c = parse_double(key, value);
        else if (key == "problem.sigma") cfg.sigma = parse_double(key, value);
        else if (key == "problem.alphahat") cfg.alphahat = parse_double(key, value);
        else if (key == "problem.amp") cfg.amp = parse_double(key, value);
        else if (key == "problem.cdelta") cfg.cdelta = parse_double(key, value);
        else if (key == "problem.delta") cfg.delta = parse_double(key, value);
        else if (key == "problem.bnorm") cfg.bnorm = parse_double(key, value);
        else if (key == "problem.bbase") cfg.bbase = parse_double(key, value);
        else if (key == "problem.jmax") cfg.jmax = parse_long(key, value);
        else if (key == "problem.a0") cfg.a0 = value;
        else if (key == "problem.f") cfg.f = value;
        else if (key == "problem.g") cfg.g = value;
        else if (key == "problem.t") cfg.t = parse_double(key, value);
        else if (key == "problem.tprime") cfg.tprime = parse_double(key, value);
        else if (key == "weights.pstar") cfg.pstar = parse_double(key, value);
        else if (key == "weights.bfamily") cfg.bfamily = value;
        else if (key == "weights.bvalues") cfg.bvalues = parse_list(key, value);
        else if (key == "run.epsilon") cfg.epsilons = parse_list(key, value);
        else if (key == "run.mode") cfg.mode = value;
        else if (key == "run.shifts") cfg.shifts = static_cast<int>(parse_long(key, value));
        else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_long(key, value));
        else if (key == "run.replications")
            cfg.replications = static_cast<int>(parse_long(key, value));
        else if (key == "run.threads") cfg.threads = static_cast<int>(parse_long(key, value));
        else if (key == "run.oracle_s") cfg.oracle_s = static_cast<int>(parse_long(key, value));
        else if (key == "run.oracle_degree")
            cfg.oracle_degree = static_cast<int>(parse_long(key, value));
        else if (key == "plan.strategy") cfg.strategy = value;
        else if (key == "plan.cache") cfg.cache = value;
        else if (key == "plan.fem_constant") cfg.fem_constant = parse_double(key, value);
        else if (key == "output.csv") cfg.csv = value;
        else if (key == "output.timing") cfg.timing = value == "true" || value == "1";
        else throw ConfigError("unknown key: " + key);
    }

    if (!(cfg.pstar > 0.0 && cfg.pstar < 1.0)) throw ConfigError("p* must lie in (0,1)");
    if (cfg.mode != "auto" && cfg.mode != "deterministic" && cfg.mode != "randomized")
        throw ConfigError("run.mode must be auto, deterministic or randomized");
    if (cfg.strategy != "cbc" && cfg.strategy != "random" && cfg.strategy != "fixed")
        throw ConfigError("plan.strategy must be cbc, random or fixed");
    if (cfg.bfamily != "model" && cfg.bfamily != "finite")
        throw ConfigError("weights.bfamily must be model or finite");
    if (cfg.bfamily == "finite" && cfg.bvalues.empty())
        throw ConfigError("weights.bfamily = finite needs weights.bvalues");
    if (cfg.shifts < 2) throw ConfigError("run.shifts must be at least 2");
    if (cfg.replications < 1) throw ConfigError("run.replications must be positive");
    if (cfg.threads < 0) throw ConfigError("run.threads must be nonnegative");
    if (cfg.threads == 0) cfg.threads = 2;
    if (!(cfg.fem_constant > 0.0)) throw ConfigError("plan.fem_constant must be positive");
    for (double e : cfg.epsilons)
        if (e <= 0.0) throw ConfigError("run.epsilon entries must be positive");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in);
}

DiffusionModel make_model(const RunConfig& cfg) {
    DiffusionModel m;
    try {
        m.a0 = ClosedForm::parse(cfg.a0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem.a0: ") + e.what());
    }
    if (cfg.family == "global") m.family = PhiFamily::global;
    else if (cfg.family == "wavelet") m.family = PhiFamily::wavelet;
    else if (cfg.family == "dyadic") m.family = PhiFamily::dyadic;
    else if (cfg.family == "single") m.family = PhiFamily::single;
    else throw ConfigError("unknown problem.family: " + cfg.family);
    m.c = cfg.c;
    m.sigma = cfg.sigma;
    m.alphahat = cfg.alphahat;
    m.amp = cfg.amp;
    m.cdelta = cfg.cdelta;
    m.delta = cfg.delta;
    m.bnorm = cfg.bnorm;
    m.bbase = cfg.bbase;
    m.jmax = cfg.jmax;
    return m;
}

Weights make_weights(const RunConfig& cfg, const DiffusionModel& model) {
    if (cfg.bfamily == "finite") return Weights::finite(cfg.bvalues);
    return Weights::from_model(model);
}

Functional make_functional(const RunConfig& cfg) {
    ClosedForm g;
    try {
        g = ClosedForm::parse(cfg.g);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem.g: ") + e.what());
    }
    Functional G = Functional::integral(g, cfg.tprime);
    if (cfg.g.rfind("bump:", 0) == 0) G.kind = Functional::Kind::smoothed_point_eval;
    return G;
}

ClosedForm make_source(const RunConfig& cfg) {
    try {
        return ClosedForm::parse(cfg.f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("problem.f: ") + e.what());
    }
}

SearchOptions make_search_options(const RunConfig& cfg) {
    SearchOptions opts;
    if (cfg.strategy == "cbc") opts.strategy = SearchStrategy::cbc;
    else if (cfg.strategy == "random") opts.strategy = SearchStrategy::random_search;
    else opts.strategy = SearchStrategy::fixed;
    return opts;
}

CubatureMode resolve_mode(const RunConfig& cfg, const RateParams& rates) {
    if (cfg.mode == "auto") return rates.mode;
    const CubatureMode want =
        cfg.mode == "deterministic" ? CubatureMode::deterministic : CubatureMode::randomized;
    if (want != rates.mode)
        throw AdmissibilityError("requested mode " + cfg.mode +
                                 " does not match the derived branch for lambda");
    return want;
}

namespace {

struct Problem {
    DiffusionModel model;
    ClosedForm f;
    Functional G;
    Weights weights;
    RateParams rates;
    CubatureConstants constants;
    double M = 0.0;
    Interval S;

    explicit Problem(const RunConfig& cfg)
        : model(make_model(cfg)),
          f(make_source(cfg)),
          G(make_functional(cfg)),
          weights(make_weights(cfg, model)),
          rates(derive_rates(model, cfg.t, cfg.tprime, cfg.pstar)) {
        constants = cubature_constants(rates);
        M = embedding_constant(rates.alpha);
        S = product_weight_sum(weights, M, cfg.pstar, 1e-13);
    }

    ActiveSet aset(double eps) const {
        return build_active_set(weights, M, rates.pstar, eps, S);
    }
};

std::string subset_to_string(const IndexSet& u) {
    if (u.empty()) return "{}";
    std::string s = "{";
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(u[i]);
    }
    return s + "}";
}

OracleEstimate study_oracle(const Problem& p, const RunConfig& cfg, double eps_min,
                            std::ostream& log) {
    const double target = eps_min / 10.0;
    int degree = cfg.oracle_degree;
    Mesh1D mesh =
        Mesh1D::for_target_width(std::pow(eps_min / 40.0, 1.0 / p.rates.tau), p.rates.fem_degree);
    for (int attempt = 0; attempt < 4; ++attempt) {
        auto est = tensor_gauss_reference(p.model, p.f, p.G, cfg.oracle_s, degree, mesh,
                                          cfg.threads);
        log << "# oracle " << est.fingerprint << " value=" << fmt(est.value)
            << " error_estimate=" << fmt(est.error_estimate) << "\n";
        if (est.error_estimate <= target) return est;
        degree += 2;
        mesh = mesh.refined(1);
    }
    throw NumericalError("oracle error estimate failed to reach eps/10");
}

}  // namespace

int cmd_plan(const RunConfig& cfg, std::ostream& out) {
    if (cfg.epsilons.empty()) throw ConfigError("run.epsilon is required");
    Problem p(cfg);
    out << "kappa_upper = " << fmt(p.rates.kappa) << "\n";
    out << "lambda = " << fmt(p.rates.lambda) << ", alpha = " << p.rates.alpha << ", tau = "
        << fmt(p.rates.tau) << ", mode = "
        << (p.rates.mode == CubatureMode::deterministic ? "deterministic" : "randomized")
        << ", a_mdm = " << fmt(p.rates.a_mdm) << "\n";
    out << "M = " << fmt(p.M) << ", S = [" << fmt(p.S.lo) << ", " << fmt(p.S.hi) << "]\n";
    out << "C_kappa_alpha = " << fmt(c_kappa_alpha(p.rates.kappa, p.rates.alpha)) << "\n";
    for (double eps : cfg.epsilons) {
        auto aset = p.aset(eps);
        auto plan = make_plan(aset, p.rates, p.constants, eps, cfg.fem_constant);
        auto diag = diagnostics(aset, p.weights, p.M);
        out << "epsilon = " << fmt(eps) << ": members = " << aset.members.size()
            << ", d_eps = " << diag.max_cardinality
            << ", tail_mass <= " << fmt(diag.tail_mass_upper) << "\n";
        for (const auto& e : plan.entries) {
            out << "  u=" << subset_to_string(e.u) << " gammaM=" << fmt(e.gamma_u *
                       std::pow(p.M, static_cast<double>(e.u.size())))
                << " k_u=" << fmt(e.k_u) << " n_u=" << e.n_u << " h_u=" << fmt(e.h_u)
                << " mesh_h=" << fmt(e.mesh.h()) << "\n";
        }
        out << "  constraint_residual = " << fmt(plan.constraint_residual)
            << ", predicted_error2 = " << fmt(plan.predicted_error2)
            << ", predicted_cost = " << fmt(plan.predicted_cost) << "\n";
    }
    return 0;
}

int cmd_run(const RunConfig& cfg, std::ostream& out) {
    if (cfg.epsilons.empty()) throw ConfigError("run.epsilon is required");
    Problem p(cfg);
    RuleSource rules(make_search_options(cfg), cfg.cache);
    ExecutionContext ctx{&p.model, &p.f, &p.G, &rules, &p.weights, cfg.threads};
    for (double eps : cfg.epsilons) {
        auto plan = make_plan(p.aset(eps), p.rates, p.constants, eps, cfg.fem_constant);
        MdfemResult res;
        if (resolve_mode(cfg, p.rates) == CubatureMode::deterministic)
            res = run_deterministic(plan, ctx);
        else
            res = run_randomized(plan, ctx, cfg.shifts, cfg.seed);
        out << "epsilon=" << fmt(eps) << " value=" << fmt(res.value)
            << " stderr=" << fmt(res.stderr_est) << " cost_units=" << fmt(res.cost_units)
            << " members=" << plan.entries.size() << "\n";
    }
    return 0;
}

int cmd_study(const RunConfig& cfg, std::ostream& csv, std::ostream& log) {
    if (cfg.epsilons.size() < 3) throw ConfigError("study needs at least 3 run.epsilon values");
    Problem p(cfg);
    const double eps_min = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
    auto oracle = study_oracle(p, cfg, eps_min, log);

    RuleSource rules(make_search_options(cfg), cfg.cache);
    ExecutionContext ctx{&p.model, &p.f, &p.G, &rules, &p.weights, cfg.threads};
    const CubatureMode mode = resolve_mode(cfg, p.rates);

    csv << "epsilon,value,ref_value,abs_error,rmse,cost_units,wall_ms,active_set_size,"
           "max_cardinality,seed\n";
    for (double eps : cfg.epsilons) {
        auto aset = p.aset(eps);
        auto diag = diagnostics(aset, p.weights, p.M);
        auto plan = make_plan(aset, p.rates, p.constants, eps, cfg.fem_constant);
        for (int rep = 0; rep < cfg.replications; ++rep) {
            const std::uint64_t rep_seed = hash_mix(cfg.seed, static_cast<std::uint64_t>(rep));
            MdfemResult res;
            if (mode == CubatureMode::deterministic)
                res = run_deterministic(plan, ctx);
            else
                res = run_randomized(plan, ctx, cfg.shifts, rep_seed);
            csv << fmt(eps) << ',' << fmt(res.value) << ',' << fmt(oracle.value) << ','
                << fmt(std::abs(res.value - oracle.value)) << ',' << fmt(res.stderr_est) << ','
                << fmt(res.cost_units) << ',' << fmt(cfg.timing ? res.wall_ms : 0.0) << ','
                << aset.members.size() << ',' << diag.max_cardinality << ',' << rep_seed
                << "\n";
        }
    }
    return 0;
}

int cmd_baseline(const RunConfig& cfg, std::ostream& csv, std::ostream& log) {
    if (cfg.epsilons.empty()) throw ConfigError("run.epsilon is required");
    Problem p(cfg);
    const double eps_min = *std::min_element(cfg.epsilons.begin(), cfg.epsilons.end());
    auto oracle = study_oracle(p, cfg, eps_min, log);

    RuleSource rules(make_search_options(cfg), cfg.cache);
    ExecutionContext ctx{&p.model, &p.f, &p.G, &rules, &p.weights, cfg.threads};
    const CubatureMode mode = resolve_mode(cfg, p.rates);

    csv << "epsilon,method,value,ref_value,abs_error,cost_units\n";
    for (double eps : cfg.epsilons) {
        auto plan = make_plan(p.aset(eps), p.rates, p.constants, eps, cfg.fem_constant);
        MdfemResult res;
        if (mode == CubatureMode::deterministic)
            res = run_deterministic(plan, ctx);
        else
            res = run_randomized(plan, ctx, cfg.shifts, cfg.seed);
        csv << fmt(eps) << ",mdfem," << fmt(res.value) << ',' << fmt(oracle.value) << ','
            << fmt(std::abs(res.value - oracle.value)) << ',' << fmt(res.cost_units) << "\n";

        auto bplan = plan_single_level(p.weights, p.rates, eps, p.rates.fem_degree);
        auto bres = single_level_baseline(ctx, bplan,
                                          mode == CubatureMode::randomized, cfg.seed);
        csv << fmt(eps) << ",slqmcfem," << fmt(bres.value) << ',' << fmt(oracle.value) << ','
            << fmt(std::abs(bres.value - oracle.value)) << ',' << fmt(bres.cost_units) << "\n";
    }
    return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& log, bool inject_sign_fault) {
    Problem p(cfg);
    bool all_pass = true;
    auto report = [&](const char* name, bool pass) {
        log << (pass ? "PASS " : "FAIL ") << name << "\n";
        all_pass = all_pass && pass;
    };

    // telescoping identity over all subsets of {1,2,3}
    {
        const Mesh1D mesh = Mesh1D::with_elements(8 * p.rates.fem_degree, p.rates.fem_degree);
        bool pass = true;
        std::uint64_t state = 0xC0FFEE;
        SubsetSolveCache cache;
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> y(3);
            for (auto& v : y)
                v = std::ldexp(static_cast<double>(splitmix64(state) >> 11), -53) - 0.5;
            double total = 0.0;
            for (unsigned mask = 0; mask < 8; ++mask) {
                IndexSet u;
                std::vector<double> yu;
                for (int j = 0; j < 3; ++j)
                    if (mask & (1u << j)) {
                        u.push_back(j + 1);
                        yu.push_back(y[j]);
                    }
                double term = decomposed_value(u, yu, mesh, p.model, p.f, p.G, &cache);
                if (inject_sign_fault && mask == 0) term = -term;
                total += term;
            }
            IndexSet full = {1, 2, 3};
            const double direct = apply_functional(
                p.G, assemble_solve(p.model, full, y, p.f, mesh));
            pass = pass && std::abs(total - direct) <= 1e-12;
        }
        report("telescoping identity (s=3)", pass);
    }

    // net projection of generating vectors
    {
        bool pass = true;
        for (int m = 2; m <= 6 && pass; ++m) {
            auto rule = search_generating_vector(m, m, 3, p.weights.head(3), 1,
                                                 make_search_options(cfg));
            for (int j = 0; j < 3; ++j) {
                auto table = coordinate_digit_table(rule.modulus, rule.gen[j], m, m);
                std::vector<bool> seen(table.size(), false);
                for (auto v : table) seen[v] = true;
                for (bool s : seen) pass = pass && s;
            }
        }
        report("net projection property", pass);
    }

    // product weight sum interval against brute force
    {
        const double brute = subset_sum_bruteforce(p.weights, p.M, p.rates.pstar, 10);
        const double tail = std::pow(p.M, p.rates.pstar) *
                            p.weights.tail_power_sum(10, p.rates.pstar);
        const bool pass = p.S.hi >= brute * (1.0 - 1e-12) &&
                          p.S.lo <= brute * std::exp(tail) * (1.0 + 1e-12);
        report("product weight sum interval", pass);
    }

    // plan constraint identity
    {
        const double eps = cfg.epsilons.empty() ? 0.05 : cfg.epsilons.front();
        auto plan = make_plan(p.aset(eps), p.rates, p.constants, eps, cfg.fem_constant);
        const bool pass =
            plan.constraint_residual <= 1e-8 && plan.predicted_error2 <= eps / 2.0 * (1 + 1e-12);
        report("plan constraint identity", pass);
    }

    if (!all_pass) throw NumericalError("validation suite reported failures");
    return 0;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out,
                std::ostream& log, bool inject_sign_fault) {
    try {
        if (command == "plan") return cmd_plan(cfg, out);
        if (command == "run") return cmd_run(cfg, out);
        if (command == "study") return cmd_study(cfg, out, log);
        if (command == "baseline") return cmd_baseline(cfg, out, log);
        if (command == "validate") return cmd_validate(cfg, log, inject_sign_fault);
        throw ConfigError("unknown command: " + command);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const AdmissibilityError& e) {
        log << "admissibility error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        return 4;
    }
}

}  // namespace mdfem::cli
