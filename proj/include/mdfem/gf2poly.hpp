#ifndef MDFEM_GF2POLY_HPP
#define MDFEM_GF2POLY_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace mdfem {

/// Polynomial over GF(2), bit i holding the coefficient of x^i.
/// Degree is capped at 63 so every value fits one machine word and all
/// arithmetic is branch-free shift/xor.
class Poly2 {
public:
    constexpr Poly2() = default;
    constexpr explicit Poly2(std::uint64_t bits) : bits_(bits) {}

    /// Identify a non-negative integer k = k0 + k1*2 + ... with the
    /// polynomial k0 + k1*x + ...
    static constexpr Poly2 from_index(std::uint64_t k) { return Poly2(k); }
    static constexpr Poly2 zero() { return Poly2(0); }
    static constexpr Poly2 one() { return Poly2(1); }
    static constexpr Poly2 x() { return Poly2(2); }

    constexpr std::uint64_t bits() const { return bits_; }
    constexpr bool is_zero() const { return bits_ == 0; }

    /// Degree of the polynomial; -1 stands in for deg(0) = -infinity.
    int degree() const;

    constexpr bool coeff(int i) const {
        return i >= 0 && i < 64 && ((bits_ >> i) & 1u);
    }

    friend constexpr Poly2 operator+(Poly2 a, Poly2 b) { return Poly2(a.bits_ ^ b.bits_); }
    friend constexpr Poly2 operator^(Poly2 a, Poly2 b) { return Poly2(a.bits_ ^ b.bits_); }
    friend Poly2 operator*(Poly2 a, Poly2 b) { return mul(a, b); }
    friend constexpr bool operator==(Poly2 a, Poly2 b) { return a.bits_ == b.bits_; }
    friend constexpr bool operator!=(Poly2 a, Poly2 b) { return a.bits_ != b.bits_; }
    friend constexpr bool operator<(Poly2 a, Poly2 b) { return a.bits_ < b.bits_; }

    /// Carry-less (schoolbook shift-xor) product. The result must fit in
    /// degree 63; callers stay far below that at desk scale.
    static Poly2 mul(Poly2 a, Poly2 b);

    std::string to_hex() const;
    static Poly2 from_hex(const std::string& s);

private:
    std::uint64_t bits_ = 0;
};

Poly2 mul(Poly2 a, Poly2 b);

/// Quotient and remainder of polynomial long division; den must be nonzero.
std::pair<Poly2, Poly2> divmod(Poly2 num, Poly2 den);

/// num mod den.
Poly2 poly_mod(Poly2 num, Poly2 den);

/// First n digits w_1..w_n (coefficients of x^{-1}..x^{-n}) of the formal
/// Laurent expansion of num/den.  value() = sum w_i 2^{-i} in [0, 1-2^{-n}].
struct LaurentPrefix {
    std::uint64_t digits = 0;  // w_1 is the most significant of the n bits
    int depth = 0;

    bool digit(int i) const {  // i in 1..depth
        return ((digits >> (depth - i)) & 1u) != 0;
    }
    double value() const;
};

/// Laurent division realizing the truncation map onto [0,1): the integer
/// (non-negative power) part of num/den is discarded, matching a reduction
/// of num mod den up front.  Requires den != 0 and 1 <= depth <= 53.
LaurentPrefix laurent_div(Poly2 num, Poly2 den, int depth);

/// Exhaustive trial-division irreducibility test.
bool is_irreducible(Poly2 p);

/// Lexicographically smallest irreducible polynomial of degree n
/// (smallest as an integer in the bit encoding), 1 <= n <= 63.
Poly2 irreducible_of_degree(int n);

}  // namespace mdfem

#endif
