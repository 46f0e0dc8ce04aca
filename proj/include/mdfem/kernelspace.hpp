#ifndef MDFEM_KERNELSPACE_HPP
#define MDFEM_KERNELSPACE_HPP

#include <span>

namespace mdfem {

/// I_0(1), modified Bessel function of the first kind at 1, by its power
/// series.  Kept local so no math library Bessel routine is pulled in.
double bessel_i0_one();

/// One-dimensional reproducing kernel for alpha-smooth functions anchored
/// at 0 over [-1/2, 1/2].  Zero when x and y have opposite signs or either
/// is zero; on the same-sign branches the integral term is expanded in
/// closed form (binomial expansion, exact up to roundoff).
double kernel_eval(int alpha, double x, double y);

/// Tensor-product kernel over matching coordinate slices.
double kernel_eval_product(int alpha, std::span<const double> x, std::span<const double> y);

/// The embedding constant M with M_u = M^{|u|}:
/// M = sqrt(I0(1) - 1 + 1/(((alpha-1)!)^2 (2 alpha - 1) 2^(2 alpha - 1))).
double embedding_constant(int alpha);

}  // namespace mdfem

#endif
