#include "doctest.h"

#include "mdfem/kernelspace.hpp"
#include "mdfem/problemspec.hpp"

#include <cmath>
#include <vector>

using namespace mdfem;

namespace {

DiffusionModel global_model(double a0, double c, double sigma) {
    DiffusionModel m;
    m.a0 = ClosedForm::constant(a0);
    m.family = PhiFamily::global;
    m.c = c;
    m.sigma = sigma;
    m.jmax = -1;
    return m;
}

DiffusionModel dyadic_model(double a0, double c, long jmax) {
    DiffusionModel m;
    m.a0 = ClosedForm::constant(a0);
    m.family = PhiFamily::dyadic;
    m.c = c;
    m.jmax = jmax;
    return m;
}

double zeta(double s) {
    double z = 0.0;
    for (long j = 1; j <= 2000000; ++j) z += std::pow(static_cast<double>(j), -s);
    return z;
}

}  // namespace

TEST_CASE("kappa bounds for the built-in families") {
    // a0=2, phi_j = 0.1 j^-4 sin(j pi x), b_j = j^-2.5:
    // kappa <= 0.1 zeta(3/2) / 4
    auto m = global_model(2.0, 0.1, 4.0);
    const double k = compute_kappa(m);
    const double bound = 0.1 * zeta(1.5) / 4.0;
    CHECK(k <= bound + 1e-9);
    CHECK(k == doctest::Approx(bound).epsilon(0.05));  // the bound is nearly tight
    CHECK(bound == doctest::Approx(0.0653).epsilon(1e-2));

    // zero fluctuations
    auto z = dyadic_model(1.0, 0.0, 4);
    CHECK(compute_kappa(z) == 0.0);

    // one constant term phi_1 = 0.5, b_1 = 1, a0 = 1 -> kappa = 0.25
    DiffusionModel s;
    s.a0 = ClosedForm::constant(1.0);
    s.family = PhiFamily::single;
    s.c = 0.5;
    CHECK(compute_kappa(s) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("wavelet model basics and envelope") {
    DiffusionModel m;
    m.a0 = ClosedForm::constant(1.0);
    m.family = PhiFamily::wavelet;
    m.alphahat = 2.0;
    m.amp = 1.0;
    m.cdelta = 2.0;
    m.delta = 0.5;
    m.jmax = -1;

    // per-level disjoint supports: sum over a level of |phi| equals one hat
    for (double x : {0.1, 0.37, 0.82}) {
        double lvl2 = std::abs(m.phi(2, x)) > 0 ? 1 : 0;
        double lvl3 = std::abs(m.phi(3, x)) > 0 ? 1 : 0;
        CHECK(lvl2 + lvl3 <= 1);
    }
    // b_j <= C j^-alphahat (ln j)^(1+delta) for j >= 2
    const double C = m.cdelta * m.amp * std::pow(2.0 / std::log(2.0), 1.0 + m.delta);
    for (long j = 2; j <= 10000; ++j) {
        const double env = C * std::pow(static_cast<double>(j), -m.alphahat) *
                           std::pow(std::log(static_cast<double>(j)), 1.0 + m.delta);
        CHECK(m.b(j) <= env * (1.0 + 1e-9));
    }
    CHECK(compute_kappa(m) < 1.0);
    CHECK(m.b_tail_power(0, 0.75) > 0.0);  // converges for alphahat*p > 1
    CHECK_THROWS_AS(m.b_tail_power(0, 0.4), AdmissibilityError);
}

TEST_CASE("derive_rates branches and formulas") {
    auto m = dyadic_model(1.0, 0.05, 6);

    auto r1 = derive_rates(m, 1.0, 1.0, 0.5);
    CHECK(r1.tau == doctest::Approx(2.0));
    CHECK(r1.lambda == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(r1.mode == CubatureMode::randomized);
    CHECK(r1.alpha == 1);
    CHECK(r1.a_mdm == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(r1.fem_degree == 1);

    // tau=4 at p*=0.5 stays in the randomized branch (lambda = 0.8);
    // lambda = 1.6 with alpha = 2 requires p* = 1/3
    auto r2 = derive_rates(m, 2.0, 2.0, 0.5);
    CHECK(r2.lambda == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(r2.mode == CubatureMode::randomized);
    CHECK(r2.a_mdm == doctest::Approx(1.5).epsilon(1e-14));

    auto r3 = derive_rates(m, 2.0, 2.0, 1.0 / 3.0);
    CHECK(r3.lambda == doctest::Approx(1.6).epsilon(1e-14));
    CHECK(r3.mode == CubatureMode::deterministic);
    CHECK(r3.alpha == 2);
    CHECK(r3.a_mdm == doctest::Approx(0.875).epsilon(1e-14));
    CHECK(r3.fem_degree == 2);

    CHECK_THROWS_AS(derive_rates(m, 1.0, 1.0, 0.97), AdmissibilityError);  // lambda < 1/2
    CHECK_THROWS_AS(derive_rates(m, 1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(derive_rates(m, 1.0, 1.0, 0.0), std::invalid_argument);

    // monotonicity: lambda nondecreasing in tau, nonincreasing in p*
    double prev = 0.0;
    for (double tau : {1.0, 2.0, 3.0, 4.0, 6.0}) {
        RateParams r;
        const double lam = tau * 0.5 / (0.5 * (tau + 1.0));
        CHECK(lam >= prev);
        prev = lam;
        (void)r;
    }
    auto lam_at = [&](double ps) {
        return 2.0 * (1.0 - ps) / (ps * 3.0);
    };
    CHECK(lam_at(0.3) >= lam_at(0.5));
    CHECK(lam_at(0.5) >= lam_at(0.7));

    // kappa admissibility error names the violated bound
    auto bad = dyadic_model(1.0, 0.9, 6);  // kappa near 0.9*6/2 ... way over
    try {
        derive_rates(bad, 1.0, 1.0, 0.5);
        CHECK(false);
    } catch (const AdmissibilityError& e) {
        CHECK(std::string(e.what()).find("1/(2*alpha+1)") != std::string::npos);
    }
}

TEST_CASE("cubature constants") {
    RateParams r;
    r.lambda = 0.5;
    r.alpha = 1;
    r.mode = CubatureMode::randomized;
    auto c = cubature_constants(r);
    CHECK(c.C1 == doctest::Approx(1.25).epsilon(1e-14));
    CHECK(c.C_u(0) == doctest::Approx(std::pow(2.0, 0.5)).epsilon(1e-14));
    CHECK(c.C_u(2) == doctest::Approx(std::pow(2.0, 0.5) * std::pow(1.25, 1.0)).epsilon(1e-14));

    RateParams r2;
    r2.lambda = 1.0;
    r2.alpha = 2;
    r2.mode = CubatureMode::deterministic;
    auto c2 = cubature_constants(r2);
    CHECK(c2.Ctilde == doctest::Approx(1.0).epsilon(1e-14));

    RateParams r3;
    r3.lambda = 1.6;
    r3.alpha = 2;
    r3.mode = CubatureMode::deterministic;
    auto c3 = cubature_constants(r3);
    // independent evaluation of the closed form
    const double g = std::pow(2.0, 1.0 / 1.6) - 1.0;
    const double ctilde = (1.0 - g) / ((2.0 - std::pow(2.0, 1.0 / 1.6)) * g);
    const double calpha = 1.0 + std::sqrt(2.0) * 2.0 * 1.5 * 2.5 *
                                    (ctilde + (1.0 / g) / (std::pow(2.0, 2.0 / 1.6) - 2.0));
    CHECK(c3.Ctilde == doctest::Approx(ctilde).epsilon(1e-14));
    CHECK(c3.Calpha == doctest::Approx(calpha).epsilon(1e-14));
    CHECK(c3.Calpha > 0.0);
    CHECK(std::isfinite(c3.C_u(3)));

    RateParams bad;
    bad.lambda = 1.2;
    bad.mode = CubatureMode::randomized;
    CHECK_THROWS_AS(cubature_constants(bad), std::invalid_argument);
}

TEST_CASE("c_kappa_alpha geometric series") {
    CHECK(c_kappa_alpha(0.0, 1) == 0.0);
    CHECK(c_kappa_alpha(0.0, 3) == 0.0);
    CHECK(c_kappa_alpha(0.2, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    const double r = std::pow(0.4 / 0.9, 2);
    CHECK(c_kappa_alpha(0.1, 2) == doctest::Approx(r / (1.0 - r)).epsilon(1e-14));
    CHECK_THROWS_AS(c_kappa_alpha(0.34, 1), AdmissibilityError);
}

TEST_CASE("product weight sum") {
    // all gammas zero: only the empty set
    auto z = Weights::finite({0.0, 0.0});
    auto sz = product_weight_sum(z, 1.0, 0.5, 1e-12);
    CHECK(sz.lo == doctest::Approx(1.0));
    CHECK(sz.hi == doctest::Approx(1.0));

    // finite dyadic weights, M=1, p*=1: prod (1 + 2^-j)
    std::vector<double> g;
    for (int j = 1; j <= 10; ++j) g.push_back(std::ldexp(1.0, -j));
    auto w = Weights::finite(g);
    auto s = product_weight_sum(w, 1.0, 1.0, 1e-12);
    double want = 1.0;
    for (int j = 1; j <= 10; ++j) want *= 1.0 + std::ldexp(1.0, -j);
    CHECK(s.lo == doctest::Approx(want).epsilon(1e-14));
    CHECK(s.hi == doctest::Approx(want).epsilon(1e-14));

    // brute force over all subsets of the first 10 indices
    double brute = 0.0;
    for (unsigned mask = 0; mask < (1u << 10); ++mask) {
        double term = 1.0;
        for (int j = 0; j < 10; ++j)
            if (mask & (1u << j)) term *= g[j];
        brute += term;  // p*=1, M=1
    }
    CHECK(s.lo == doctest::Approx(brute).epsilon(1e-12));

    // single weight
    auto w1 = Weights::finite({0.3});
    auto s1 = product_weight_sum(w1, 0.8752, 0.5, 1e-12);
    CHECK(s1.lo == doctest::Approx(1.0 + std::pow(0.3 * 0.8752, 0.5)).epsilon(1e-14));

    // infinite family: interval brackets brute force + tail
    auto m = global_model(1.0, 0.1, 4.0);
    auto wm = Weights::from_model(m);
    const double M = embedding_constant(1);
    auto sm = product_weight_sum(wm, M, 0.5, 1e-10);
    double brute12 = 0.0;
    for (unsigned mask = 0; mask < (1u << 12); ++mask) {
        double term = 1.0;
        int card = 0;
        for (int j = 0; j < 12; ++j)
            if (mask & (1u << j)) {
                term *= wm.gamma(j + 1);
                ++card;
            }
        brute12 += std::pow(term * std::pow(M, card), 0.5);
    }
    // the true sum lies in [brute12, brute12 * exp(tail)]; the returned
    // interval must overlap it
    const double tail12 = std::pow(M, 0.5) * wm.tail_power_sum(12, 0.5);
    CHECK(sm.hi >= brute12);
    CHECK(sm.lo <= brute12 * std::exp(tail12));
    CHECK(sm.lo <= sm.hi);
}

TEST_CASE("closed forms parse and evaluate") {
    auto c = ClosedForm::parse("2.5");
    CHECK(c.is_constant());
    CHECK(c(0.3) == 2.5);
    auto s = ClosedForm::parse("sinpi");
    CHECK(s(0.5) == doctest::Approx(1.0));
    auto p = ClosedForm::parse("poly:0,1,-1");  // x - x^2
    CHECK(p(0.5) == doctest::Approx(0.25));
    CHECK(p.poly_degree() == 2);
    auto bmp = ClosedForm::parse("bump:0.5,0.2");
    CHECK(bmp(0.5) == doctest::Approx(10.0));  // (2/w) at the peak
    CHECK(bmp(0.39) == 0.0);
    CHECK_THROWS_AS(ClosedForm::parse("wat"), std::invalid_argument);

    auto f = Functional::smoothed_point(0.5, 0.2, 2.0);
    CHECK(f.kind == Functional::Kind::smoothed_point_eval);
    CHECK(f.g(0.5) == doctest::Approx(10.0));
}

TEST_CASE("weights head and fingerprint stability") {
    auto m = dyadic_model(1.0, 0.1, 6);
    auto w = Weights::from_model(m);
    auto h = w.head(3);
    CHECK(h[0] == doctest::Approx(0.5));
    CHECK(h[1] == doctest::Approx(0.25));
    CHECK(h[2] == doctest::Approx(0.125));
    CHECK(w.fingerprint() == Weights::from_model(m).fingerprint());
    CHECK(w.fingerprint() != Weights::finite({0.5, 0.25}).fingerprint());
    CHECK(w.gamma_upper_from(4) == doctest::Approx(w.gamma(4)));
}
