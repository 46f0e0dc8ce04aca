#ifndef MDFEM_ORACLES_HPP
#define MDFEM_ORACLES_HPP

#include "mdfem/fem1d.hpp"

#include <functional>
#include <string>

namespace mdfem {

struct OracleEstimate {
    double value = 0.0;
    double error_estimate = 0.0;  // nonnegative, from paired refinements
    std::string fingerprint;
};

/// Ground truth for the truncated problem: tensor Gauss-Legendre over
/// [-1/2,1/2]^s of G(u^h(., y)) with the FEM on fine_mesh.  quad_degree is
/// the node count per dimension; the error estimate pairs quad_degree
/// against quad_degree + 2 and fine_mesh against the mesh twice as coarse.
/// Deterministic for any thread count.
OracleEstimate tensor_gauss_reference(const DiffusionModel& model, const ClosedForm& f,
                                      const Functional& G, int s, int quad_degree,
                                      Mesh1D fine_mesh, int threads = 1);

/// Same tensor rule for a plain integrand over [-1/2,1/2]^s (no PDE).
OracleEstimate tensor_gauss_integral(const std::function<double(std::span<const double>)>& F,
                                     int s, int quad_degree);

/// sum over all subsets v of {1..J} of (gamma_v M^|v|)^{p*}.
double subset_sum_bruteforce(const Weights& weights, double M, double pstar, int J);

}  // namespace mdfem

#endif
