#include "mdfem/problemspec.hpp"

#include "mdfem/polylattice.hpp"  // hash_mix for fingerprints

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace mdfem {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hat01(double t) {  // reference hat on [0,1], peak 1 at 1/2
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return 1.0 - std::abs(2.0 * t - 1.0);
}

struct WaveletIndex {
    int level;   // l >= 1
    long loc;    // 0 <= k < 2^(l-1)
};

WaveletIndex wavelet_index(long j) {
    int level = 1;
    while ((std::int64_t{1} << level) <= j) ++level;  // smallest l with 2^l > j
    return {level, j - (std::int64_t{1} << (level - 1))};
}

}  // namespace

// ---------------------------------------------------------------- ClosedForm

ClosedForm ClosedForm::constant(double v) {
    ClosedForm f;
    f.kind_ = Kind::constant;
    f.poly_degree_ = 0;
    std::ostringstream os;
    os << v;
    f.text_ = os.str();
    f.eval_ = [v](double) { return v; };
    return f;
}

ClosedForm ClosedForm::sinpi() {
    ClosedForm f;
    f.kind_ = Kind::sinpi;
    f.poly_degree_ = -1;
    f.text_ = "sinpi";
    f.eval_ = [](double x) { return std::sin(kPi * x); };
    return f;
}

ClosedForm ClosedForm::poly(std::vector<double> c) {
    if (c.empty()) c.push_back(0.0);
    ClosedForm f;
    f.kind_ = Kind::poly;
    f.poly_degree_ = static_cast<int>(c.size()) - 1;
    std::ostringstream os;
    os << "poly:";
    for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
    f.text_ = os.str();
    f.eval_ = [c = std::move(c)](double x) {
        double v = 0.0;
        for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
        return v;
    };
    return f;
}

ClosedForm ClosedForm::bump(double x0, double width) {
    if (width <= 0.0) throw std::invalid_argument("bump width must be positive");
    ClosedForm f;
    f.kind_ = Kind::bump;
    f.poly_degree_ = -1;
    std::ostringstream os;
    os << "bump:" << x0 << "," << width;
    f.text_ = os.str();
    const double scale = 2.0 / width;  // makes the bump integrate to 1
    f.eval_ = [x0, width, scale](double x) {
        const double t = (x - x0) / width;
        if (t <= -0.5 || t >= 0.5) return 0.0;
        const double c = std::cos(kPi * t);
        return scale * c * c;
    };
    return f;
}

ClosedForm ClosedForm::parse(const std::string& expr) {
    if (expr == "sinpi") return sinpi();
    if (expr == "x") return poly({0.0, 1.0});
    auto parse_list = [](const std::string& body) {
        std::vector<double> vals;
        std::stringstream ss(body);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            std::size_t pos = 0;
            vals.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument("bad number: " + tok);
        }
        return vals;
    };
    if (expr.rfind("poly:", 0) == 0) return poly(parse_list(expr.substr(5)));
    if (expr.rfind("bump:", 0) == 0) {
        auto vals = parse_list(expr.substr(5));
        if (vals.size() != 2) throw std::invalid_argument("bump wants x0,width");
        return bump(vals[0], vals[1]);
    }
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(expr, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("unknown closed form: " + expr);
    }
    if (pos != expr.size()) throw std::invalid_argument("unknown closed form: " + expr);
    return constant(v);
}

double ClosedForm::constant_value() const {
    if (!is_constant()) throw std::logic_error("closed form is not constant");
    return eval_(0.0);
}

// ------------------------------------------------------------ DiffusionModel

void DiffusionModel::validate() const {
    switch (family) {
        case PhiFamily::global:
            if (sigma <= 1.5) throw AdmissibilityError("global family needs sigma > 3/2");
            if (bnorm <= 0.0 || bnorm > 1.0)
                throw AdmissibilityError("global family needs bnorm in (0,1]");
            break;
        case PhiFamily::wavelet:
            if (alphahat <= 0.0 || delta <= 0.0 || cdelta <= 0.0 || amp <= 0.0)
                throw AdmissibilityError("wavelet family needs positive alphahat, delta, cdelta, amp");
            break;
        case PhiFamily::dyadic:
            if (jmax < 0) throw AdmissibilityError("dyadic family needs a finite jmax");
            if (!(bbase > 0.0 && bbase < 1.0))
                throw AdmissibilityError("dyadic family needs bbase in (0,1)");
            break;
        case PhiFamily::single:
            break;
    }
    if (a0_min() <= 0.0) throw AdmissibilityError("a0 must be bounded away from zero");
}

double DiffusionModel::phi_sup(long j) const {
    if (j < 1) return 0.0;
    if (jmax >= 0 && j > jmax) return 0.0;
    switch (family) {
        case PhiFamily::global:
            return c * std::pow(static_cast<double>(j), -sigma);
        case PhiFamily::wavelet: {
            const auto wi = wavelet_index(j);
            return amp * std::pow(2.0, -alphahat * wi.level);
        }
        case PhiFamily::dyadic:
            return c * std::pow(bbase, static_cast<double>(j));
        case PhiFamily::single:
            return j == 1 ? std::abs(c) : 0.0;
    }
    return 0.0;
}

double DiffusionModel::phi(long j, double x) const {
    if (j < 1) return 0.0;
    if (jmax >= 0 && j > jmax) return 0.0;
    switch (family) {
        case PhiFamily::global:
            return c * std::pow(static_cast<double>(j), -sigma) * std::sin(j * kPi * x);
        case PhiFamily::wavelet: {
            const auto wi = wavelet_index(j);
            const double h = std::ldexp(1.0, -(wi.level - 1));
            return amp * std::pow(2.0, -alphahat * wi.level) * hat01(x / h - wi.loc);
        }
        case PhiFamily::dyadic:
            return c * std::pow(bbase, static_cast<double>(j)) * std::sin(j * kPi * x);
        case PhiFamily::single:
            return j == 1 ? c : 0.0;
    }
    return 0.0;
}

double DiffusionModel::b(long j) const {
    if (j < 1) return 0.0;
    if (jmax >= 0 && j > jmax) return 0.0;
    switch (family) {
        case PhiFamily::global:
            return std::min(1.0, bnorm * std::pow(static_cast<double>(j), -(sigma - 1.5)));
        case PhiFamily::wavelet: {
            const auto wi = wavelet_index(j);
            return std::min(1.0, cdelta * amp * std::pow(wi.level, 1.0 + delta) *
                                     std::pow(2.0, -alphahat * wi.level));
        }
        case PhiFamily::dyadic:
            return std::pow(bbase, static_cast<double>(j));
        case PhiFamily::single:
            return j == 1 ? 1.0 : 0.0;
    }
    return 0.0;
}

double DiffusionModel::a_eval(double x, std::span<const int> u, std::span<const double> y) const {
    double a = a0(x);
    for (std::size_t i = 0; i < u.size(); ++i) a += y[i] * phi(u[i], x);
    return a;
}

double DiffusionModel::a0_min() const {
    if (a0.is_constant()) return a0.constant_value();
    double m = a0(0.0);
    for (int i = 1; i <= 10000; ++i) m = std::min(m, a0(i * 1e-4));
    return m;
}

double DiffusionModel::a0_max() const {
    if (a0.is_constant()) return a0.constant_value();
    double m = a0(0.0);
    for (int i = 1; i <= 10000; ++i) m = std::max(m, a0(i * 1e-4));
    return m;
}

long DiffusionModel::support() const {
    switch (family) {
        case PhiFamily::single:
            return 1;
        case PhiFamily::dyadic:
            return jmax;
        default:
            return jmax;  // -1 = infinite unless truncated
    }
}

double DiffusionModel::phi_over_b_tail(long J) const {
    if (J < 0) J = 0;
    const long sup = support();
    if (sup >= 0 && J >= sup) return 0.0;
    switch (family) {
        case PhiFamily::global:
            // |phi_j|/b_j <= (c/bnorm) j^{-3/2}
            if (J == 0) return (c / bnorm) * (1.0 + 2.0);  // j=1 term + integral bound
            return (c / bnorm) * 2.0 / std::sqrt(static_cast<double>(J));
        case PhiFamily::wavelet: {
            // per level at most one overlapping hat, level sum <= 1/(cdelta l^(1+delta))
            const int L = (J == 0) ? 1 : wavelet_index(J + 1).level;
            return (std::pow(L, -(1.0 + delta)) + 1.0 / (delta * std::pow(L, delta))) / cdelta;
        }
        case PhiFamily::dyadic:
            return std::abs(c) * static_cast<double>(sup - J);
        case PhiFamily::single:
            return J == 0 ? std::abs(c) : 0.0;
    }
    return 0.0;
}

double DiffusionModel::b_tail_power(long J, double p) const {
    if (J < 0) J = 0;
    const long sup = support();
    if (sup >= 0) {
        double s = 0.0;
        for (long j = J + 1; j <= sup; ++j) s += std::pow(b(j), p);
        return s;
    }
    switch (family) {
        case PhiFamily::global: {
            const double beta = p * (sigma - 1.5);
            if (beta <= 1.0)
                throw AdmissibilityError("weight series diverges: p*(sigma-3/2) must exceed 1");
            // sum_{j>J} j^-beta <= J^(1-beta)/(beta-1), J >= 1
            const double Jeff = std::max<long>(J, 1);
            double head = 0.0;
            if (J == 0) head = std::pow(b(1), p);
            return head + std::pow(bnorm, p) * std::pow(Jeff, 1.0 - beta) / (beta - 1.0);
        }
        case PhiFamily::wavelet: {
            if (alphahat * p <= 1.0)
                throw AdmissibilityError("weight series diverges: alphahat * p must exceed 1");
            const int L0 = (J == 0) ? 1 : wavelet_index(J + 1).level;
            // partial level of J+1
            double s = 0.0;
            const long lvl_end = (std::int64_t{1} << L0) - 1;
            for (long j = std::max(J + 1, std::int64_t{1} << (L0 - 1)); j <= lvl_end; ++j)
                s += std::pow(b(j), p);
            // whole levels, stopping when a geometric bound covers the rest
            for (int l = L0 + 1; l <= 62; ++l) {
                const double bl = std::min(1.0, cdelta * amp * std::pow(l, 1.0 + delta) *
                                                    std::pow(2.0, -alphahat * l));
                const double term = std::ldexp(1.0, l - 1) * std::pow(bl, p);
                s += term;
                const double ratio = 2.0 * std::pow((l + 1.0) / l, p * (1.0 + delta)) *
                                     std::pow(2.0, -alphahat * p);
                if (ratio < 1.0 && bl < 1.0) {
                    s += term * ratio / (1.0 - ratio);
                    return s;
                }
            }
            throw AdmissibilityError("weight series tail bound not reached within 62 levels");
        }
        default:
            return 0.0;  // finite families handled above
    }
}

double compute_kappa(const DiffusionModel& model) {
    const long sup = model.support();
    const long J = (sup >= 0) ? sup : std::min<long>(model.j_max_eval, 4096);
    const double tail = model.phi_over_b_tail(J);

    const int grid = 10000;
    double worst = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double x = static_cast<double>(i) / grid;
        double series = 0.0;
        if (model.family == PhiFamily::wavelet) {
            // one hat per level covers x
            const int levels = wavelet_index(J).level;
            for (int l = 1; l <= levels; ++l) {
                const double h = std::ldexp(1.0, -(l - 1));
                long k = static_cast<long>(std::floor(x / h));
                k = std::min<long>(k, (std::int64_t{1} << (l - 1)) - 1);
                const long j = (std::int64_t{1} << (l - 1)) + k;
                if (j <= J && model.b(j) > 0.0) series += std::abs(model.phi(j, x)) / model.b(j);
            }
        } else {
            for (long j = 1; j <= J; ++j) {
                const double bj = model.b(j);
                if (bj > 0.0) series += std::abs(model.phi(j, x)) / bj;
            }
        }
        worst = std::max(worst, (series + tail) / (2.0 * model.a0(x)));
    }
    return worst;
}

// ------------------------------------------------------------------- rates

RateParams derive_rates(const DiffusionModel& model, double t, double tprime, double pstar) {
    if (!(pstar > 0.0 && pstar < 1.0))
        throw std::invalid_argument("p* must lie in (0,1)");
    if (t < 0.0 || tprime < 0.0) throw std::invalid_argument("t and t' must be nonnegative");
    model.validate();

    RateParams r;
    r.d = 1;
    r.t = t;
    r.tprime = tprime;
    r.tau = t + tprime;
    r.pstar = pstar;
    if (r.tau <= 0.0) throw std::invalid_argument("tau = t + t' must be positive");
    r.lambda = r.tau * (1.0 - pstar) / (pstar * (r.tau + r.d));
    if (r.lambda < 0.5)
        throw AdmissibilityError("no theorem branch applies: lambda < 1/2");
    r.mode = (r.lambda >= 1.0) ? CubatureMode::deterministic : CubatureMode::randomized;
    r.alpha = static_cast<int>(std::floor(r.lambda)) + 1;
    r.a_mdm = r.d / r.tau + (1.0 + r.d / r.tau) * pstar / (1.0 - pstar);
    r.fem_degree = std::clamp(static_cast<int>(std::lround(std::max(t, tprime))), 1, 3);

    r.kappa = compute_kappa(model);
    const double bound = 1.0 / (2.0 * r.alpha + 1.0);
    if (!(r.kappa < bound)) {
        std::ostringstream os;
        os << "kappa " << r.kappa << " >= 1/(2*alpha+1) = " << bound << " (alpha=" << r.alpha
           << ")";
        throw AdmissibilityError(os.str());
    }
    return r;
}

CubatureConstants cubature_constants(const RateParams& rates) {
    CubatureConstants c;
    c.alpha = rates.alpha;
    c.lambda = rates.lambda;
    c.mode = rates.mode;
    const double lam = rates.lambda;
    if (rates.mode == CubatureMode::randomized) {
        if (!(lam >= 0.5 && lam < 1.0))
            throw std::invalid_argument("randomized constants need lambda in [1/2, 1)");
        if (lam == 0.5)
            c.C1 = std::pow(13.0 / 12.0, 1.0 / (2.0 * lam)) + 1.0 / 6.0;
        else
            c.C1 = std::pow(13.0 / 12.0, 1.0 / (2.0 * lam)) +
                   1.0 / (std::pow(3.0, 1.0 / (2.0 * lam)) * (std::pow(2.0, 1.0 / lam) - 2.0));
    } else {
        const int a = rates.alpha;
        if (!(lam >= 1.0 && lam < a))
            throw std::invalid_argument("deterministic constants need lambda in [1, alpha)");
        if (lam == 1.0) {
            c.Ctilde = a - 1.0;
        } else {
            const double g = std::pow(2.0, 1.0 / lam) - 1.0;
            c.Ctilde = (1.0 - std::pow(g, a - 1)) / ((2.0 - std::pow(2.0, 1.0 / lam)) *
                                                     std::pow(g, a - 1));
        }
        double fact = 1.0;
        for (int i = 2; i <= a; ++i) fact *= i;
        double prod = 1.0;
        for (int j = 1; j <= a - 1; ++j) prod /= (std::pow(2.0, j / lam) - 1.0);
        c.Calpha = 1.0 + std::sqrt(static_cast<double>(a)) * fact * 1.5 *
                             std::pow(2.5, a - 1) *
                             (c.Ctilde + prod / (std::pow(2.0, a / lam) - 2.0));
    }
    return c;
}

double CubatureConstants::C_u(int card) const {
    if (mode == CubatureMode::randomized)
        return std::pow(2.0, lambda) * std::pow(C1, card * lambda);
    return std::pow(Calpha, card * lambda);
}

double c_kappa_alpha(double kappa, int alpha) {
    if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
    if (kappa < 0.0) throw std::invalid_argument("kappa must be nonnegative");
    if (!(kappa < 1.0 / (2.0 * alpha + 1.0)))
        throw AdmissibilityError("series diverges: kappa >= 1/(2*alpha+1)");
    const double ratio = 2.0 * alpha * kappa / (1.0 - kappa);
    const double r = ratio * ratio;
    return r / (1.0 - r);
}

// ----------------------------------------------------------------- Weights

Weights Weights::from_model(const DiffusionModel& model) {
    Weights w;
    auto m = std::make_shared<DiffusionModel>(model);
    w.gamma_ = [m](long j) { return m->b(j); };
    w.tail_ = [m](long J, double p) { return m->b_tail_power(J, p); };
    w.support_ = model.support();
    // b_j envelopes: global/dyadic/single are nonincreasing; wavelet may
    // rise within the first levels, so take the max over the rest of its
    // level and the next level's value.
    if (model.family == PhiFamily::wavelet) {
        w.envelope_ = [m](long j) {
            const auto wi = wavelet_index(j);
            double env = 0.0;
            for (int l = wi.level; l <= 62; ++l) {
                const double bl = std::min(1.0, m->cdelta * m->amp *
                                                    std::pow(l, 1.0 + m->delta) *
                                                    std::pow(2.0, -m->alphahat * l));
                env = std::max(env, bl);
                // past the crest the level values only decay
                if (l > (1.0 + m->delta) / (m->alphahat * std::log(2.0)) + 1.0 && bl < env)
                    break;
            }
            return env;
        };
    } else {
        w.envelope_ = w.gamma_;
    }
    std::uint64_t h = 0x811C9DC5ULL;
    for (int j = 1; j <= 16; ++j) {
        std::uint64_t bits;
        double g = w.gamma_(j);
        std::memcpy(&bits, &g, sizeof(bits));
        h = hash_mix(h, bits);
    }
    h = hash_mix(h, static_cast<std::uint64_t>(w.support_ + 2));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    w.fp_ = buf;
    return w;
}

Weights Weights::finite(std::vector<double> gamma) {
    for (double g : gamma)
        if (g < 0.0) throw std::invalid_argument("weights must be nonnegative");
    Weights w;
    auto vec = std::make_shared<std::vector<double>>(std::move(gamma));
    w.support_ = static_cast<long>(vec->size());
    w.gamma_ = [vec](long j) {
        return (j >= 1 && j <= static_cast<long>(vec->size())) ? (*vec)[j - 1] : 0.0;
    };
    w.tail_ = [vec](long J, double p) {
        double s = 0.0;
        for (long j = J + 1; j <= static_cast<long>(vec->size()); ++j)
            s += std::pow((*vec)[j - 1], p);
        return s;
    };
    w.envelope_ = [vec](long j) {
        double env = 0.0;
        for (long i = j; i <= static_cast<long>(vec->size()); ++i)
            env = std::max(env, (*vec)[i - 1]);
        return env;
    };
    std::uint64_t h = 0x811C9DC5ULL;
    for (double g : *vec) {
        std::uint64_t bits;
        std::memcpy(&bits, &g, sizeof(bits));
        h = hash_mix(h, bits);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    w.fp_ = buf;
    return w;
}

double Weights::gamma(long j) const { return gamma_(j); }
double Weights::tail_power_sum(long J, double p) const { return tail_(J, p); }
double Weights::gamma_upper_from(long j) const { return envelope_(j); }
std::string Weights::fingerprint() const { return fp_; }

std::vector<double> Weights::head(int s) const {
    std::vector<double> out(s);
    for (int j = 0; j < s; ++j) out[j] = gamma_(j + 1);
    return out;
}

Interval product_weight_sum(const Weights& weights, double M, double pstar, double tol) {
    if (M <= 0.0) throw std::invalid_argument("M must be positive");
    if (!(pstar > 0.0 && pstar <= 1.0)) throw std::invalid_argument("p* must lie in (0,1]");
    if (tol <= 0.0) tol = 1e-12;

    const long sup = weights.support();
    double log_prod = 0.0;
    long J = 0;
    const long hard_cap = 1 << 22;
    while (true) {
        if (sup >= 0 && J >= sup) return {std::exp(log_prod), std::exp(log_prod)};
        if (sup < 0) {
            const double tail = std::pow(M, pstar) * weights.tail_power_sum(J, pstar);
            if (tail <= tol || J >= hard_cap) {
                const double lo = std::exp(log_prod);
                return {lo, lo * std::exp(tail)};
            }
        }
        ++J;
        log_prod += std::log1p(std::pow(weights.gamma(J) * M, pstar));
    }
}

// --------------------------------------------------------------- Functional

Functional Functional::integral(ClosedForm g, double tprime) {
    Functional f;
    f.kind = Kind::integral_against_g;
    f.g = std::move(g);
    f.tprime = tprime;
    return f;
}

Functional Functional::smoothed_point(double x0, double width, double tprime) {
    Functional f;
    f.kind = Kind::smoothed_point_eval;
    f.g = ClosedForm::bump(x0, width);
    f.tprime = tprime;
    return f;
}

}  // namespace mdfem
