#include "mdfem/gf2poly.hpp"

#include <bit>
#include <cmath>

namespace mdfem {

int Poly2::degree() const {
    if (bits_ == 0) return -1;
    return 63 - std::countl_zero(bits_);
}

Poly2 Poly2::mul(Poly2 a, Poly2 b) {
    if (a.is_zero() || b.is_zero()) return Poly2::zero();
    if (a.degree() + b.degree() > 63)
        throw std::overflow_error("gf2 product exceeds degree 63");
    std::uint64_t r = 0;
    std::uint64_t av = a.bits_;
    std::uint64_t bv = b.bits_;
    while (bv) {
        if (bv & 1u) r ^= av;
        av <<= 1;
        bv >>= 1;
    }
    return Poly2(r);
}

Poly2 mul(Poly2 a, Poly2 b) { return Poly2::mul(a, b); }

std::pair<Poly2, Poly2> divmod(Poly2 num, Poly2 den) {
    if (den.is_zero()) throw std::domain_error("division by zero polynomial");
    const int dd = den.degree();
    std::uint64_t r = num.bits();
    std::uint64_t q = 0;
    int dr = num.degree();
    while (dr >= dd) {
        const int shift = dr - dd;
        q |= (std::uint64_t{1} << shift);
        r ^= (den.bits() << shift);
        dr = Poly2(r).degree();
    }
    return {Poly2(q), Poly2(r)};
}

Poly2 poly_mod(Poly2 num, Poly2 den) { return divmod(num, den).second; }

double LaurentPrefix::value() const {
    return std::ldexp(static_cast<double>(digits), -depth);
}

LaurentPrefix laurent_div(Poly2 num, Poly2 den, int depth) {
    if (den.is_zero()) throw std::domain_error("division by zero polynomial");
    if (depth < 1 || depth > 53) throw std::invalid_argument("laurent depth must be in 1..53");
    Poly2 r = poly_mod(num, den);
    const int dd = den.degree();
    LaurentPrefix out;
    out.depth = depth;
    for (int i = 1; i <= depth; ++i) {
        // r*x = w_i*den + r', deg r' < deg den
        std::uint64_t shifted = r.bits() << 1;
        std::uint64_t w = (shifted >> dd) & 1u;
        if (w) shifted ^= den.bits();
        r = Poly2(shifted);
        out.digits = (out.digits << 1) | w;
    }
    return out;
}

namespace {

// Does q divide p?  Plain long-division check.
bool divides(std::uint64_t q, std::uint64_t p, int dq, int dp) {
    std::uint64_t r = p;
    int dr = dp;
    while (dr >= dq) {
        r ^= q << (dr - dq);
        dr = Poly2(r).degree();
    }
    return r == 0;
}

}  // namespace

bool is_irreducible(Poly2 p) {
    const int n = p.degree();
    if (n <= 0) return false;  // constants and zero
    if (n == 1) return true;   // x and x+1
    if ((p.bits() & 1u) == 0) return false;  // divisible by x
    // p has constant term 1, so any divisor has constant term 1 as well.
    for (int d = 1; 2 * d <= n; ++d) {
        const std::uint64_t lo = (std::uint64_t{1} << d) | 1u;
        const std::uint64_t hi = std::uint64_t{1} << (d + 1);
        for (std::uint64_t q = lo; q < hi; q += 2) {
            if (divides(q, p.bits(), d, n)) return false;
        }
    }
    return true;
}

Poly2 irreducible_of_degree(int n) {
    if (n < 1 || n > 63) throw std::invalid_argument("irreducible degree must be in 1..63");
    const std::uint64_t lo = std::uint64_t{1} << n;
    const std::uint64_t hi = (n == 63) ? ~std::uint64_t{0} : (std::uint64_t{1} << (n + 1)) - 1;
    for (std::uint64_t bits = lo; bits <= hi; ++bits) {
        Poly2 p(bits);
        if (is_irreducible(p)) return p;
        if (bits == hi) break;
    }
    throw std::logic_error("no irreducible polynomial found");  // unreachable
}

std::string Poly2::to_hex() const {
    if (bits_ == 0) return "0";
    static const char* digits = "0123456789abcdef";
    std::string out;
    std::uint64_t v = bits_;
    while (v) {
        out.insert(out.begin(), digits[v & 0xF]);
        v >>= 4;
    }
    return out;
}

Poly2 Poly2::from_hex(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty hex polynomial");
    std::uint64_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else throw std::invalid_argument("bad hex polynomial: " + s);
        v = (v << 4) | static_cast<std::uint64_t>(d);
    }
    return Poly2(v);
}

}  // namespace mdfem
