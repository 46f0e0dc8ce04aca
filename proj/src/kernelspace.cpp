#include "mdfem/kernelspace.hpp"

#include <cmath>
#include <stdexcept>

namespace mdfem {

double bessel_i0_one() {
    // I_0(1) = sum_k (1/4)^k / (k!)^2
    double sum = 0.0;
    double term = 1.0;
    for (int k = 0; k < 25; ++k) {
        sum += term;
        term *= 0.25 / ((k + 1.0) * (k + 1.0));
    }
    return sum;
}

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double binomial(int n, int k) {
    double b = 1.0;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return b;
}

}  // namespace

double kernel_eval(int alpha, double x, double y) {
    if (alpha < 1) throw std::invalid_argument("kernel smoothness must be >= 1");
    if (x == 0.0 || y == 0.0) return 0.0;
    if ((x > 0.0) != (y > 0.0)) return 0.0;

    const double u = std::abs(x);
    const double v = std::abs(y);
    const double w = std::min(u, v);

    double poly = 0.0;
    double pr = 1.0;  // (u v)^r / (r!)^2, running
    for (int r = 1; r <= alpha - 1; ++r) {
        pr *= (u * v) / (static_cast<double>(r) * r);
        poly += pr;
    }

    // integral_0^w (u-t)^(a-1) (v-t)^(a-1) dt, expanded term by term
    const int a1 = alpha - 1;
    double integral = 0.0;
    for (int i = 0; i <= a1; ++i) {
        for (int j = 0; j <= a1; ++j) {
            const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            integral += sign * binomial(a1, i) * binomial(a1, j) *
                        std::pow(u, a1 - i) * std::pow(v, a1 - j) *
                        std::pow(w, i + j + 1) / (i + j + 1);
        }
    }
    const double fa1 = factorial(a1);
    return poly + integral / (fa1 * fa1);
}

double kernel_eval_product(int alpha, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("kernel slices must have equal length");
    double prod = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) prod *= kernel_eval(alpha, x[j], y[j]);
    return prod;
}

double embedding_constant(int alpha) {
    if (alpha < 1) throw std::invalid_argument("kernel smoothness must be >= 1");
    const double fa1 = factorial(alpha - 1);
    const double correction = 1.0 / (fa1 * fa1 * (2.0 * alpha - 1.0) * std::ldexp(1.0, 2 * alpha - 1));
    return std::sqrt(bessel_i0_one() - 1.0 + correction);
}

}  // namespace mdfem
