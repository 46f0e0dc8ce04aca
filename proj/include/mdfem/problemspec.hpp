#ifndef MDFEM_PROBLEMSPEC_HPP
#define MDFEM_PROBLEMSPEC_HPP

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdfem {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Small closed-form scalar function vocabulary for a0, f and g, so that
/// configs stay line-based text and every form has known smoothness.
class ClosedForm {
public:
    ClosedForm() : text_("0"), eval_([](double) { return 0.0; }) {}

    static ClosedForm constant(double v);
    static ClosedForm sinpi();                       // sin(pi x)
    static ClosedForm poly(std::vector<double> c);   // c0 + c1 x + ...
    static ClosedForm bump(double x0, double width); // normalized cos^2 bump

    /// Accepts a number, "sinpi", "x", "poly:c0,c1,...", "bump:x0,w".
    static ClosedForm parse(const std::string& expr);

    double operator()(double x) const { return eval_(x); }
    bool is_constant() const { return kind_ == Kind::constant; }
    double constant_value() const;
    int poly_degree() const { return poly_degree_; }  // -1 when not polynomial
    const std::string& describe() const { return text_; }

private:
    enum class Kind { constant, sinpi, poly, bump };
    Kind kind_ = Kind::constant;
    int poly_degree_ = 0;
    std::string text_;
    std::function<double(double)> eval_;
};

enum class PhiFamily { global, wavelet, dyadic, single };

/// Diffusion data a(x,y) = a0(x) + sum_j y_j phi_j(x) on [0,1] with the
/// matched summability sequence {b_j}.  Families:
///   global:  phi_j = c j^-sigma sin(j pi x),        b_j = min(1, bnorm j^-(sigma-3/2))
///   wavelet: dyadic hats, level l >= 1, 2^(l-1) per level, sup = amp 2^(-ahat l),
///            b_{l,k} = min(1, cdelta amp l^(1+delta) 2^(-ahat l)),
///            ordered coarse to fine with k ascending (j = 2^(l-1)+k)
///   dyadic:  phi_j = c bbase^j sin(j pi x), b_j = bbase^j, finite truncation jmax
///   single:  phi_1 = c (constant), b_1 = 1
struct DiffusionModel {
    ClosedForm a0 = ClosedForm::constant(1.0);
    PhiFamily family = PhiFamily::dyadic;
    double c = 0.1;
    double sigma = 4.0;
    double alphahat = 2.0;
    double amp = 1.0;
    double cdelta = 1.0;
    double delta = 0.5;
    double bnorm = 1.0;
    double bbase = 0.5;       // dyadic family decay base, in (0,1)
    long jmax = 6;            // truncation index; -1 = infinite (global/wavelet)
    long j_max_eval = 4096;   // series truncation for pointwise evaluation

    double phi(long j, double x) const;
    double phi_sup(long j) const;
    double b(long j) const;

    /// a(x, y_u) for a sparse assignment: indices u (ascending) and values.
    double a_eval(double x, std::span<const int> u, std::span<const double> y) const;

    double a0_min() const;
    double a0_max() const;

    /// Upper bound on sum_{j>J} sup_x |phi_j(x)|/b_j.
    double phi_over_b_tail(long J) const;
    /// Upper bound on sum_{j>J} b_j^p; throws when the series diverges.
    double b_tail_power(long J, double p) const;
    /// Index after which the series is identically zero, or -1.
    long support() const;

    void validate() const;  // family parameter sanity
};

/// Certified upper bound on kappa = || sum_j |phi_j|/b_j / (2 a0) ||_inf:
/// grid sup of the truncated series plus the analytic tail bound.
double compute_kappa(const DiffusionModel& model);

enum class CubatureMode { deterministic, randomized };

struct RateParams {
    int d = 1;
    double t = 1.0;
    double tprime = 1.0;
    double tau = 2.0;
    double pstar = 0.5;
    double lambda = 0.0;
    int alpha = 1;
    CubatureMode mode = CubatureMode::randomized;
    double a_mdm = 0.0;
    int fem_degree = 1;
    double kappa = 0.0;
};

/// Thrown when a standing assumption of the method fails (kappa bound,
/// rate branch, summability); the CLI maps it to exit code 3.
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Derive the cubature rate lambda = tau (1-p*) / (p* (tau+d)), the
/// smoothness alpha = floor(lambda)+1, the mode branch and the cost
/// exponent; rejects lambda < 1/2 and kappa >= 1/(2 alpha + 1).
RateParams derive_rates(const DiffusionModel& model, double t, double tprime, double pstar);

struct CubatureConstants {
    int alpha = 1;
    double lambda = 0.5;
    CubatureMode mode = CubatureMode::randomized;
    double C1 = 0.0;      // randomized branch constant
    double Ctilde = 0.0;  // deterministic branch helper
    double Calpha = 0.0;  // deterministic branch constant

    /// C_{u,lambda} as a function of |u| only.
    double C_u(int card) const;
};

CubatureConstants cubature_constants(const RateParams& rates);

/// sum_{k>=1} r^k with r = (2 alpha kappa / (1-kappa))^2; diverges (throws)
/// when kappa >= 1/(2 alpha + 1).
double c_kappa_alpha(double kappa, int alpha);

/// Product weights gamma_j = b_j (or an explicit finite list in tests).
class Weights {
public:
    static Weights from_model(const DiffusionModel& model);
    static Weights finite(std::vector<double> gamma);

    double gamma(long j) const;  // j >= 1
    double tail_power_sum(long J, double p) const;
    long support() const { return support_; }
    /// Nonincreasing envelope: an upper bound on sup_{i >= j} gamma_i.
    double gamma_upper_from(long j) const;
    std::string fingerprint() const;
    /// First s weights, for generating-vector search.
    std::vector<double> head(int s) const;

private:
    std::function<double(long)> gamma_;
    std::function<double(long, double)> tail_;
    std::function<double(long)> envelope_;
    long support_ = -1;
    std::string fp_;
};

/// S = sum_{|v| finite} (gamma_v M^|v|)^{p*} = prod_j (1 + (gamma_j M)^{p*}),
/// truncated once the analytic tail is below tol; returns [lower, upper].
Interval product_weight_sum(const Weights& weights, double M, double pstar, double tol);

/// Bounded linear functional G.  Both kinds reduce to integration against a
/// weight function; smoothed point evaluation uses a normalized bump.
struct Functional {
    enum class Kind { integral_against_g, smoothed_point_eval };
    Kind kind = Kind::integral_against_g;
    ClosedForm g = ClosedForm::constant(1.0);
    double tprime = 1.0;

    static Functional integral(ClosedForm g, double tprime);
    static Functional smoothed_point(double x0, double width, double tprime);
};

}  // namespace mdfem

#endif
