#include "doctest.h"

#include "mdfem/kernelspace.hpp"
#include "mdfem/mdfemdriver.hpp"

#include <cmath>

using namespace mdfem;

namespace {

struct Fixture {
    DiffusionModel model;
    ClosedForm f = ClosedForm::constant(1.0);
    Functional G = Functional::integral(ClosedForm::constant(1.0), 1.0);
    Weights weights = Weights::finite({});
    RateParams rates;
    CubatureConstants constants;
    double M = 0.0;
    Interval S;

    explicit Fixture(double t = 1.0, double pstar = 0.5, double c = 0.1,
                     double bbase = 0.5) {
        model.a0 = ClosedForm::constant(1.0);
        model.family = PhiFamily::dyadic;
        model.c = c;
        model.bbase = bbase;
        model.jmax = 6;
        weights = Weights::from_model(model);
        rates = derive_rates(model, t, t, pstar);
        constants = cubature_constants(rates);
        M = embedding_constant(rates.alpha);
        S = product_weight_sum(weights, M, pstar, 1e-14);
    }

    ActiveSet aset(double eps) const {
        return build_active_set(weights, M, rates.pstar, eps, S);
    }

    ExecutionContext ctx(RuleSource& rules, int threads = 1) const {
        return {&model, &f, &G, &rules, &weights, threads};
    }
};

}  // namespace

TEST_CASE("plan satisfies the constraint identity and the rounding budget") {
    Fixture fx;  // tau=2, p*=0.5 -> lambda=2/3 randomized
    CHECK(fx.rates.lambda == doctest::Approx(2.0 / 3.0));
    for (double eps : {0.05, 0.02, 0.005}) {
        auto plan = make_plan(fx.aset(eps), fx.rates, fx.constants, eps);
        CHECK(plan.constraint_residual <= 1e-8);
        CHECK(plan.predicted_error2 <= eps / 2.0 * (1.0 + 1e-12));
        for (const auto& e : plan.entries) {
            CHECK(e.n_u >= static_cast<std::uint64_t>(std::ceil(e.k_u)));
            CHECK((e.n_u & (e.n_u - 1)) == 0);  // power of two
            CHECK(e.mesh.h() <= e.h_u);
        }
    }
}

TEST_CASE("plan scaling in epsilon") {
    Fixture fx;
    const double eps = 0.01;
    auto aset = fx.aset(eps);  // held fixed
    auto p1 = make_plan(aset, fx.rates, fx.constants, eps);
    auto p2 = make_plan(aset, fx.rates, fx.constants, 2.0 * eps);
    const double kfac = std::pow(2.0, -1.0 / fx.rates.lambda);
    const double hfac = std::pow(2.0, 1.0 / fx.rates.tau);
    REQUIRE(p1.entries.size() == p2.entries.size());
    for (std::size_t i = 0; i < p1.entries.size(); ++i) {
        CHECK(p2.entries[i].k_u == doctest::Approx(p1.entries[i].k_u * kfac).epsilon(1e-10));
        CHECK(p2.entries[i].h_u == doctest::Approx(p1.entries[i].h_u * hfac).epsilon(1e-10));
    }
}

TEST_CASE("singleton empty-set plan") {
    Fixture fx;
    // epsilon large enough that only the empty set stays
    auto w0 = Weights::finite({0.25});
    auto S0 = product_weight_sum(w0, fx.M, 0.5, 1e-14);
    auto aset = build_active_set(w0, fx.M, 0.5, 1.6, S0);
    REQUIRE(aset.members.size() == 1);
    REQUIRE(aset.members[0].u.empty());
    auto plan = make_plan(aset, fx.rates, fx.constants, 1.6);
    REQUIRE(plan.entries.size() == 1);
    const auto& e = plan.entries[0];
    CHECK(e.pounds == 1.0);  // empty-set override
    const double lhs = e.gamma_u * e.C_u / std::pow(e.k_u, fx.rates.lambda) +
                       std::pow(e.h_u, fx.rates.tau);
    CHECK(lhs == doctest::Approx(1.6 / 2.0).epsilon(1e-9));

    RuleSource rules;
    auto ctx = fx.ctx(rules);
    auto res = run_randomized(plan, ctx, 4, 99);
    const double direct =
        apply_functional(fx.G, assemble_solve(fx.model, {}, {}, fx.f, e.mesh));
    CHECK(res.value == doctest::Approx(direct).epsilon(1e-15));
    CHECK(res.stderr_est == 0.0);  // no coordinates to shift
}

TEST_CASE("unshifted rule averages a linear coordinate exactly") {
    // 1d projection is {k/2^m} - 1/2, so the mean of y is -1/(2 n)
    auto rule = search_generating_vector(4, 4, 1, {1.0}, 1);
    auto nodes = generate_points(rule);
    double mean = 0.0;
    for (std::uint64_t k = 0; k < nodes.count; ++k) mean += nodes.weight * nodes.point(k)[0];
    CHECK(mean == doctest::Approx(-1.0 / (2.0 * nodes.count)).epsilon(1e-13));
}

TEST_CASE("randomized runs are reproducible across thread counts") {
    Fixture fx(1.0, 0.5, 0.1, 0.25);
    const double eps = 0.04;
    auto plan = make_plan(fx.aset(eps), fx.rates, fx.constants, eps);
    RuleSource rules;
    auto ctx1 = fx.ctx(rules, 1);
    auto ctx2 = fx.ctx(rules, 4);
    auto a = run_randomized(plan, ctx1, 4, 2026);
    auto b = run_randomized(plan, ctx2, 4, 2026);
    auto c = run_randomized(plan, ctx1, 4, 2026);
    CHECK(a.value == b.value);  // bit identical
    CHECK(a.value == c.value);
    CHECK(a.stderr_est == b.stderr_est);
    auto d = run_randomized(plan, ctx1, 4, 777);
    CHECK(a.value != d.value);  // seed matters

    CHECK_THROWS_AS(run_randomized(plan, ctx1, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(run_deterministic(plan, ctx1), std::invalid_argument);
}

TEST_CASE("randomized estimate tracks the tensor-gauss oracle") {
    Fixture fx(1.0, 0.5, 0.1, 0.25);
    RuleSource rules;
    auto ctx = fx.ctx(rules, 2);
    auto oracle = tensor_gauss_reference(fx.model, fx.f, fx.G, 6, 5,
                                         Mesh1D::with_elements(256, 1), 2);
    REQUIRE(oracle.error_estimate <= 1e-4);
    for (double eps : {0.1, 0.05}) {
        auto plan = make_plan(fx.aset(eps), fx.rates, fx.constants, eps);
        auto res = run_randomized(plan, ctx, 8, 11);
        CHECK(std::abs(res.value - oracle.value) <= eps);
        CHECK(res.cost_units > 0.0);
    }
}

TEST_CASE("deterministic branch end to end") {
    // tau=4, p*=1/3 -> lambda=1.6, alpha=2; fast b-decay keeps the set thin
    Fixture fx(2.0, 1.0 / 3.0, 0.05, 1.0 / 16.0);
    REQUIRE(fx.rates.mode == CubatureMode::deterministic);
    REQUIRE(fx.rates.alpha == 2);
    RuleSource rules;
    auto ctx = fx.ctx(rules, 2);
    auto oracle = tensor_gauss_reference(fx.model, fx.f, fx.G, 6, 5,
                                         Mesh1D::with_elements(128, 2), 2);
    REQUIRE(oracle.error_estimate <= 1e-6);
    const double eps = 0.05;
    auto plan = make_plan(fx.aset(eps), fx.rates, fx.constants, eps);
    auto res = run_deterministic(plan, ctx);
    CHECK(std::abs(res.value - oracle.value) <= eps);
}

TEST_CASE("single level baseline") {
    Fixture fx;
    RuleSource rules;
    auto ctx = fx.ctx(rules, 2);

    // s = 0: one solve on the mesh, cost formula with max(s,1)
    BaselinePlan p0;
    p0.s = 0;
    p0.N = 4;
    p0.m = 2;
    p0.mesh = Mesh1D::with_elements(8, 1);
    auto r0 = single_level_baseline(ctx, p0, false, 0);
    const double direct =
        apply_functional(fx.G, assemble_solve(fx.model, {}, {}, fx.f, p0.mesh));
    CHECK(r0.value == doctest::Approx(direct).epsilon(1e-15));
    CHECK(r0.cost_units == doctest::Approx(4.0 * 8.0 * 1.0));

    // planner obeys the eps/3 splits
    const double eps = 0.02;
    auto bp = plan_single_level(fx.weights, fx.rates, eps, fx.rates.fem_degree);
    CHECK(std::pow(fx.weights.gamma_upper_from(bp.s + 1), 2) <= eps / 3.0);
    CHECK(std::pow(static_cast<double>(bp.N), -1.0 / fx.rates.pstar) <= eps / 3.0);
    CHECK(std::pow(bp.mesh.h(), fx.rates.tau) <= eps / 3.0);

    // against the oracle
    auto oracle = tensor_gauss_reference(fx.model, fx.f, fx.G, 6, 5,
                                         Mesh1D::with_elements(256, 1), 2);
    auto rb = single_level_baseline(ctx, bp, true, 42);
    CHECK(std::abs(rb.value - oracle.value) <= 5 * eps);
}

TEST_CASE("general mdm cubature sizes") {
    Fixture fx;
    auto aset = fx.aset(0.05);
    auto C = [&](int card) { return fx.constants.C_u(card); };
    auto pounds = [](int card) {
        return card == 0 ? 1.0 : std::ldexp(static_cast<double>(card), card);
    };

    auto plain = mdm_cubature_sizes(aset, C, pounds, fx.rates.lambda, 0.0, 0.05);
    CHECK(plain.error_inflation == 1.0);
    REQUIRE(plain.k_u.size() == aset.members.size());

    // lambda1 = 0, q = 1: hand-rolled two-term Lagrange solution
    {
        auto w2 = Weights::finite({0.5});
        auto S2 = product_weight_sum(w2, 1.0, 0.5, 1e-14);
        auto tiny = build_active_set(w2, 1.0, 0.5, 0.4, S2);
        REQUIRE(tiny.members.size() == 2);
        auto got = mdm_cubature_sizes(tiny, C, pounds, fx.rates.lambda, 0.0, 0.4);
        const double lam = fx.rates.lambda;
        double norm = 0.0;
        std::vector<double> want;
        for (const auto& e : tiny.members) {
            const int card = static_cast<int>(e.u.size());
            const double gamma_u = e.weight;  // M = 1 here
            norm += std::pow(pounds(card), lam / (lam + 1.0)) *
                    std::pow(gamma_u * C(card), 1.0 / (lam + 1.0));
        }
        for (std::size_t i = 0; i < tiny.members.size(); ++i) {
            const auto& e = tiny.members[i];
            const int card = static_cast<int>(e.u.size());
            want.push_back(std::pow(2.0 / 0.4, 1.0 / lam) * std::pow(norm, 1.0 / lam) *
                           std::pow(e.weight * C(card) / pounds(card), 1.0 / (lam + 1.0)));
            CHECK(got.k_u[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }

    auto inflated = mdm_cubature_sizes(aset, C, pounds, fx.rates.lambda, 0.3, 0.05);
    CHECK(inflated.error_inflation >= 1.0);
}

TEST_CASE("baseline at oracle settings reproduces the oracle value") {
    Fixture fx;  // dyadic b_j = 2^-j
    RuleSource rules;
    auto ctx = fx.ctx(rules, 2);
    auto oracle = tensor_gauss_reference(fx.model, fx.f, fx.G, 6, 6,
                                         Mesh1D::with_elements(1024, 1), 2);
    BaselinePlan bp;
    bp.s = 6;
    bp.N = std::uint64_t{1} << 14;
    bp.m = 14;
    bp.mesh = Mesh1D::with_elements(1024, 1);
    auto res = single_level_baseline(ctx, bp, true, 1);
    CHECK(std::abs(res.value - oracle.value) <= 10.0 * oracle.error_estimate);
    CHECK(res.cost_units == doctest::Approx(16384.0 * 1024.0 * 6.0));
}

TEST_CASE("result value equals the sum of per-subset contributions") {
    Fixture fx(1.0, 0.5, 0.1, 0.25);
    RuleSource rules;
    auto ctx = fx.ctx(rules, 1);
    auto plan = make_plan(fx.aset(0.05), fx.rates, fx.constants, 0.05);
    auto res = run_randomized(plan, ctx, 3, 5);
    double sum = 0.0;
    for (const auto& c : res.contributions) sum += c.value;
    CHECK(res.value == doctest::Approx(sum).epsilon(1e-15));
    double cost = 0.0;
    for (const auto& c : res.contributions) cost += c.cost;
    CHECK(res.cost_units == doctest::Approx(cost).epsilon(1e-15));
}

TEST_CASE("fem_constant shifts the error split but keeps the identity") {
    Fixture fx;
    const double eps = 0.02;
    auto aset = fx.aset(eps);
    auto p1 = make_plan(aset, fx.rates, fx.constants, eps, 1.0);
    auto p4 = make_plan(aset, fx.rates, fx.constants, eps, 4.0);
    CHECK(p4.constraint_residual <= 1e-8);
    CHECK(p4.predicted_error2 <= eps / 2.0 * (1.0 + 1e-12));
    // a larger FEM constant buys finer meshes
    for (std::size_t i = 0; i < p1.entries.size(); ++i)
        CHECK(p4.entries[i].h_u < p1.entries[i].h_u);
    CHECK_THROWS_AS(make_plan(aset, fx.rates, fx.constants, eps, 0.0), std::invalid_argument);
}
