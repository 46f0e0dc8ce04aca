#include "mdfem/mdfemdriver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace mdfem {

namespace {

std::uint64_t next_pow2(std::uint64_t v) {
    std::uint64_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

int log2_exact(std::uint64_t v) {
    int m = 0;
    while ((std::uint64_t{1} << m) < v) ++m;
    return m;
}

double pounds_of(const IndexSet& u) {
    if (u.empty()) return 1.0;  // override: the empty record costs one solve
    const double card = static_cast<double>(u.size());
    return std::ldexp(card, static_cast<int>(u.size()));
}

// run tasks 0..count-1 on a small pool; each task writes only its own slot
void run_tasks(int threads, std::size_t count, const std::function<void(std::size_t)>& task) {
    threads = std::max(1, threads);
    if (threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            task(i);
        }
    };
    std::vector<std::thread> pool;
    const int use = static_cast<int>(std::min<std::size_t>(threads, count));
    pool.reserve(use);
    for (int t = 0; t < use; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace

std::uint64_t subset_id(const IndexSet& u) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (int idx : u) h = hash_mix(h, static_cast<std::uint64_t>(idx));
    return h;
}

ParameterPlan make_plan(const ActiveSet& aset, const RateParams& rates,
                        const CubatureConstants& constants, double epsilon,
                        double fem_constant) {
    if (aset.members.empty()) throw std::invalid_argument("active set is empty");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    if (!(fem_constant > 0.0)) throw std::invalid_argument("fem_constant must be positive");

    const double lam = rates.lambda;
    const double tau = rates.tau;
    const double d = rates.d;
    const double D = lam * (tau + d) + tau;

    // finiteness of the normalization sum over all subsets needs
    // tau / D >= p*  (the lambda admissibility boundary)
    if (tau / D < rates.pstar * (1.0 - 1e-12))
        throw AdmissibilityError("lambda exceeds the admissible rate for this p*");

    ParameterPlan plan;
    plan.epsilon = epsilon;
    plan.rates = rates;
    plan.constants = constants;
    plan.A = std::pow(std::pow(d, lam + 1.0) * lam / std::pow(tau, lam + 1.0), 1.0 / D);
    plan.B = std::pow(std::pow(d, d) * std::pow(lam, tau + d) / std::pow(tau, d), 1.0 / D);
    const double AB = std::pow(plan.A, tau) + std::pow(plan.B, -lam);
    plan.Atilde = std::pow(2.0, -1.0 / tau) * plan.A * std::pow(AB, -1.0 / tau);
    plan.Btilde = std::pow(2.0, 1.0 / lam) * plan.B * std::pow(AB, 1.0 / lam);

    double norm_sum = 0.0;
    for (const auto& e : aset.members) {
        const int card = static_cast<int>(e.u.size());
        const double gamma_u = e.weight / std::pow(aset.M, card);
        const double C = constants.C_u(card);
        const double pounds = pounds_of(e.u);
        const double fem_w = fem_constant * std::pow(2.0, card);
        norm_sum += std::pow(std::pow(gamma_u * C, tau) * std::pow(fem_w, lam * d) *
                                 std::pow(pounds, lam * tau),
                             1.0 / D);
    }
    plan.xi = std::pow(2.0 / epsilon * AB * norm_sum, D / (lam * tau));

    double constraint = 0.0;
    for (const auto& e : aset.members) {
        PlanEntry entry;
        entry.u = e.u;
        const int card = static_cast<int>(e.u.size());
        entry.gamma_u = e.weight / std::pow(aset.M, card);
        entry.C_u = constants.C_u(card);
        entry.pounds = pounds_of(e.u);

        const double fem_w = fem_constant * std::pow(2.0, card);
        entry.h_u = plan.A * std::pow(plan.xi, -lam / D) *
                    std::pow(entry.gamma_u * entry.C_u * std::pow(entry.pounds, lam) /
                                 std::pow(fem_w, lam + 1.0),
                             1.0 / D);
        entry.k_u = plan.B * std::pow(plan.xi, tau / D) *
                    std::pow(std::pow(entry.gamma_u * entry.C_u, tau + d) /
                                 (std::pow(fem_w, d) * std::pow(entry.pounds, tau)),
                             1.0 / D);

        constraint += entry.gamma_u * entry.C_u / std::pow(entry.k_u, lam) +
                      fem_w * std::pow(entry.h_u, tau);

        entry.n_u = next_pow2(static_cast<std::uint64_t>(std::ceil(entry.k_u)));
        entry.m_u = log2_exact(entry.n_u);
        entry.mesh = Mesh1D::for_target_width(entry.h_u, rates.fem_degree);
        entry.n_eff = e.u.empty() ? 1 : entry.n_u;

        plan.predicted_error2 += entry.gamma_u * entry.C_u / std::pow(double(entry.n_u), lam) +
                                 fem_w * std::pow(entry.mesh.h(), tau);
        plan.predicted_cost +=
            static_cast<double>(entry.n_eff) / entry.mesh.h() * entry.pounds;
        plan.entries.push_back(std::move(entry));
    }
    plan.constraint_residual = std::abs(constraint - epsilon / 2.0) / (epsilon / 2.0);
    if (plan.constraint_residual > 1e-8)
        throw NumericalError("plan constraint identity violated beyond 1e-8 relative");
    if (plan.predicted_error2 > epsilon / 2.0 * (1.0 + 1e-12))
        throw NumericalError("rounded plan exceeds the eps/2 budget");
    return plan;
}

namespace {

double estimate_with_rule(const PlanEntry& entry, const PolyLatticeRule& rule,
                          const ExecutionContext& ctx, const DigitalShift* shift,
                          SubsetSolveCache& cache) {
    const int card = static_cast<int>(entry.u.size());
    const SolveWorkspace ws(*ctx.model, entry.u, *ctx.f, *ctx.G, entry.mesh);
    auto nodes = generate_points(rule, shift);
    double acc = 0.0;
    std::vector<double> y(card);
    for (std::uint64_t k = 0; k < nodes.count; ++k) {
        const double* p = nodes.point(k);
        for (int j = 0; j < card; ++j) y[j] = p[j];
        acc += decomposed_value(ws, y, &cache);
    }
    return acc * nodes.weight;
}

void check_context(const ExecutionContext& ctx) {
    if (!ctx.model || !ctx.f || !ctx.G || !ctx.rules || !ctx.weights)
        throw std::invalid_argument("execution context is incomplete");
}

}  // namespace

MdfemResult run_deterministic(const ParameterPlan& plan, const ExecutionContext& ctx) {
    check_context(ctx);
    if (plan.rates.mode != CubatureMode::deterministic)
        throw std::invalid_argument("plan is not in the deterministic branch");
    const auto t0 = std::chrono::steady_clock::now();
    const int alpha = plan.rates.alpha;

    // rules fetched up front: the cache is shared and search must not race
    std::vector<PolyLatticeRule> rules(plan.entries.size());
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto& e = plan.entries[i];
        const int card = static_cast<int>(e.u.size());
        if (card >= 1 && e.m_u >= 1)
            rules[i] = ctx.rules->get(alpha, e.m_u, alpha * e.m_u, card, ctx.weights->head(card));
    }

    MdfemResult res;
    res.epsilon = plan.epsilon;
    res.mode = CubatureMode::deterministic;
    res.contributions.resize(plan.entries.size());

    std::vector<SubsetSolveCache> caches(plan.entries.size());
    run_tasks(ctx.threads, plan.entries.size(), [&](std::size_t i) {
        const auto& e = plan.entries[i];
        double value;
        if (e.u.empty() || e.m_u == 0) {
            SubsetSolveCache& cache = caches[i];
            if (e.u.empty()) {
                value = cache.get_or_compute(e.mesh, {}, {}, [&] {
                    return apply_functional(*ctx.G,
                                            assemble_solve(*ctx.model, {}, {}, *ctx.f, e.mesh));
                });
            } else {
                std::vector<double> node(e.u.size(), -0.5);
                const SolveWorkspace ws(*ctx.model, e.u, *ctx.f, *ctx.G, e.mesh);
                value = decomposed_value(ws, node, &cache);
            }
        } else {
            value = estimate_with_rule(e, rules[i], ctx, nullptr, caches[i]);
        }
        res.contributions[i] = {e.u, value, e.n_eff,
                                static_cast<double>(e.n_eff) / e.mesh.h() * e.pounds};
    });

    for (const auto& c : res.contributions) {
        res.value += c.value;
        res.cost_units += c.cost;
    }
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return res;
}

MdfemResult run_randomized(const ParameterPlan& plan, const ExecutionContext& ctx, int shifts,
                           std::uint64_t seed) {
    check_context(ctx);
    if (plan.rates.mode != CubatureMode::randomized)
        throw std::invalid_argument("plan is not in the randomized branch");
    if (shifts < 2) throw std::invalid_argument("randomized mode needs at least 2 shifts");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<PolyLatticeRule> rules(plan.entries.size());
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto& e = plan.entries[i];
        const int card = static_cast<int>(e.u.size());
        if (card >= 1 && e.m_u >= 1)
            rules[i] = ctx.rules->get(1, e.m_u, e.m_u, card, ctx.weights->head(card));
    }

    const std::size_t n_entries = plan.entries.size();
    std::vector<double> task_values(n_entries * shifts, 0.0);
    std::vector<SubsetSolveCache> caches(n_entries);

    run_tasks(ctx.threads, n_entries * shifts, [&](std::size_t t) {
        const std::size_t i = t / shifts;
        const int r = static_cast<int>(t % shifts);
        const auto& e = plan.entries[i];
        const int card = static_cast<int>(e.u.size());
        double value;
        if (card == 0) {
            value = caches[i].get_or_compute(e.mesh, {}, {}, [&] {
                return apply_functional(*ctx.G,
                                        assemble_solve(*ctx.model, {}, {}, *ctx.f, e.mesh));
            });
        } else {
            const auto shift = DigitalShift::from_seed(
                hash_mix(seed, hash_mix(subset_id(e.u), static_cast<std::uint64_t>(r))), card);
            if (e.m_u == 0) {
                std::vector<double> node(card);
                for (int j = 0; j < card; ++j)
                    node[j] =
                        std::ldexp(static_cast<double>(shift.digits[j]), -shift.n_bits) - 0.5;
                const SolveWorkspace ws(*ctx.model, e.u, *ctx.f, *ctx.G, e.mesh);
                value = decomposed_value(ws, node, &caches[i]);
            } else {
                value = estimate_with_rule(e, rules[i], ctx, &shift, caches[i]);
            }
        }
        task_values[t] = value;
    });

    MdfemResult res;
    res.epsilon = plan.epsilon;
    res.mode = CubatureMode::randomized;
    res.shifts = shifts;
    res.seed = seed;
    res.contributions.resize(n_entries);

    std::vector<double> totals(shifts, 0.0);
    for (std::size_t i = 0; i < n_entries; ++i) {
        const auto& e = plan.entries[i];
        double mean = 0.0;
        for (int r = 0; r < shifts; ++r) {
            totals[r] += task_values[i * shifts + r];
            mean += task_values[i * shifts + r];
        }
        mean /= shifts;
        res.contributions[i] = {e.u, mean, e.n_eff,
                                static_cast<double>(e.n_eff) / e.mesh.h() * e.pounds};
        res.value += mean;
        res.cost_units += res.contributions[i].cost;
    }
    double var = 0.0;
    for (int r = 0; r < shifts; ++r) var += (totals[r] - res.value) * (totals[r] - res.value);
    var /= (shifts - 1.0);
    res.stderr_est = std::sqrt(var / shifts);
    res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                      .count();
    return res;
}

BaselinePlan plan_single_level(const Weights& weights, const RateParams& rates, double epsilon,
                               int fem_degree) {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    BaselinePlan plan;
    const double part = epsilon / 3.0;
    // truncation: (sup_{j > s} b_j)^2 <= eps/3
    int s = 0;
    while (std::pow(weights.gamma_upper_from(s + 1), 2) > part) {
        ++s;
        if (s > 4096) throw AdmissibilityError("single-level truncation dimension too large");
    }
    plan.s = s;
    // cubature: N^{-1/p*} <= eps/3
    plan.N = 1;
    plan.m = 0;
    while (std::pow(static_cast<double>(plan.N), -1.0 / rates.pstar) > part) {
        plan.N <<= 1;
        ++plan.m;
    }
    // discretization: h^tau <= eps/3
    plan.mesh = Mesh1D::for_target_width(std::pow(part, 1.0 / rates.tau), fem_degree);
    return plan;
}

BaselineResult single_level_baseline(const ExecutionContext& ctx, const BaselinePlan& plan,
                                     bool shifted, std::uint64_t seed) {
    check_context(ctx);
    BaselineResult out;
    out.plan = plan;
    out.cost_units = static_cast<double>(plan.N) / plan.mesh.h() * std::max(plan.s, 1);

    if (plan.s == 0) {
        out.value =
            apply_functional(*ctx.G, assemble_solve(*ctx.model, {}, {}, *ctx.f, plan.mesh));
        return out;
    }

    IndexSet u(plan.s);
    for (int j = 0; j < plan.s; ++j) u[j] = j + 1;

    CubatureNodeSet nodes;
    if (plan.m == 0) {
        nodes.count = 1;
        nodes.s = plan.s;
        nodes.weight = 1.0;
        nodes.coords.assign(plan.s, -0.5);
        if (shifted) {
            auto shift = DigitalShift::from_seed(seed, plan.s);
            for (int j = 0; j < plan.s; ++j)
                nodes.coords[j] =
                    std::ldexp(static_cast<double>(shift.digits[j]), -shift.n_bits) - 0.5;
        }
    } else {
        auto rule = ctx.rules->get(1, plan.m, plan.m, plan.s, ctx.weights->head(plan.s));
        if (shifted) {
            auto shift = DigitalShift::from_seed(seed, plan.s);
            nodes = generate_points(rule, &shift);
        } else {
            nodes = generate_points(rule);
        }
    }

    const SolveWorkspace ws(*ctx.model, u, *ctx.f, *ctx.G, plan.mesh);
    const std::uint64_t chunk = 64;
    const std::uint64_t nchunks = (nodes.count + chunk - 1) / chunk;
    std::vector<double> partial(nchunks, 0.0);
    run_tasks(ctx.threads, nchunks, [&](std::size_t c) {
        std::vector<double> y(plan.s);
        double acc = 0.0;
        const std::uint64_t hi = std::min<std::uint64_t>(nodes.count, (c + 1) * chunk);
        for (std::uint64_t k = c * chunk; k < hi; ++k) {
            const double* p = nodes.point(k);
            for (int j = 0; j < plan.s; ++j) y[j] = p[j];
            acc += ws.solve_functional(y);
        }
        partial[c] = acc;
    });
    double sum = 0.0;
    for (double p : partial) sum += p;
    out.value = sum * nodes.weight;
    return out;
}

MdmCubaturePlan mdm_cubature_sizes(const ActiveSet& aset,
                                   const std::function<double(int)>& C_of_card,
                                   const std::function<double(int)>& pounds_of_card,
                                   double lambda, double lambda1, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    if (aset.members.empty()) throw std::invalid_argument("active set is empty");
    // q = 1 throughout (the p = infinity norm branch)
    const double ql = lambda;

    auto card_weight = [&](const ActiveSetEntry& e) {
        const int card = static_cast<int>(e.u.size());
        const double gamma_u = e.weight / std::pow(aset.M, card);
        const double logfac = card == 0 ? 1.0 : std::pow(card, lambda1 * card);
        return gamma_u * C_of_card(card) * logfac;
    };

    double norm = 0.0;
    for (const auto& e : aset.members) {
        const int card = static_cast<int>(e.u.size());
        norm += std::pow(pounds_of_card(card), ql / (ql + 1.0)) *
                std::pow(card_weight(e), 1.0 / (ql + 1.0));
    }

    MdmCubaturePlan plan;
    plan.error_inflation = 1.0;
    for (const auto& e : aset.members) {
        const int card = static_cast<int>(e.u.size());
        const double k = std::pow(2.0 / epsilon, 1.0 / lambda) * std::pow(norm, 1.0 / ql) *
                         std::pow(card_weight(e) / pounds_of_card(card), 1.0 / (ql + 1.0));
        plan.subsets.push_back(e.u);
        plan.k_u.push_back(k);
        plan.n_u.push_back(static_cast<std::uint64_t>(std::max(1.0, std::ceil(k))));
        if (card >= 1) {
            const double ln_n = std::log(static_cast<double>(plan.n_u.back()));
            plan.error_inflation =
                std::max(plan.error_inflation, std::pow(ln_n / card, lambda1 * card));
        }
    }
    return plan;
}

}  // namespace mdfem
