#ifndef MDFEM_FEM1D_HPP
#define MDFEM_FEM1D_HPP

#include "mdfem/problemspec.hpp"

#include <cstdint>
#include <vector>

namespace mdfem {

using IndexSet = std::vector<int>;

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Gauss-Legendre nodes and weights on [-1,1], Newton iteration on the
/// Legendre recurrence (no tables).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int points);

/// Uniform mesh on [0,1] with Lagrange elements of degree 1..3.  Widths are
/// restricted to 1/(2^k * degree) so meshes of a common degree nest.
struct Mesh1D {
    int elements = 1;
    int degree = 1;

    double h() const { return 1.0 / elements; }
    int node_count() const { return elements * degree + 1; }
    int interior_dofs() const { return elements * degree - 1; }
    std::uint64_t fingerprint() const;

    static Mesh1D with_elements(int elements, int degree);
    /// Largest admissible width <= h_target (round down).
    static Mesh1D for_target_width(double h_target, int degree);
    Mesh1D refined(int extra_halvings) const;
};

/// Symmetric positive definite band matrix, upper band storage.
class BandedSpd {
public:
    BandedSpd(int n, int bandwidth);

    int size() const { return n_; }
    int bandwidth() const { return bw_; }
    double& at(int i, int j);
    double at(int i, int j) const;
    std::vector<double> multiply(const std::vector<double>& x) const;
    /// In-place Cholesky; throws NumericalError when not positive definite.
    void factorize();
    std::vector<double> solve(std::vector<double> rhs) const;  // after factorize()

private:
    int n_;
    int bw_;
    bool factored_ = false;
    std::vector<double> band_;  // row-major, (bw+1) entries per row: A[i][i+d]
};

struct FemSystem {
    Mesh1D mesh;
    BandedSpd matrix;
    std::vector<double> rhs;
};

struct FemSolution {
    Mesh1D mesh;
    std::vector<double> node_values;  // all nodes, boundary entries exactly zero

    double eval(double x) const;
    /// H^1_0 seminorm |u|_V = ||u'||_L2.
    double v_norm() const;
};

/// Galerkin system for -(a u')' = f with a(x) = a0 + sum_{j in u} y_j phi_j.
FemSystem assemble(const DiffusionModel& model, const IndexSet& u,
                   std::span<const double> y, const ClosedForm& f, Mesh1D mesh);

FemSolution assemble_solve(const DiffusionModel& model, const IndexSet& u,
                           std::span<const double> y, const ClosedForm& f, Mesh1D mesh);

/// G(u^h) by per-element Gauss quadrature against the functional's weight.
double apply_functional(const Functional& G, const FemSolution& sol);

/// Quadrature-point tables for repeated solves on one (subset, mesh) pair
/// that differ only in the parameter values: a0, f, g and the subset's
/// phi_j are evaluated once.  solve() accepts one value per index of u
/// (zeros allowed, giving the projection onto a sub-subset).  Thread-safe
/// for concurrent solves.
class SolveWorkspace {
public:
    SolveWorkspace(const DiffusionModel& model, IndexSet u, const ClosedForm& f,
                   const Functional& G, Mesh1D mesh);

    FemSolution solve(std::span<const double> y) const;
    double solve_functional(std::span<const double> y) const;  // G(u^h(., y))
    const Mesh1D& mesh() const { return mesh_; }
    const IndexSet& subset() const { return u_; }

private:
    Mesh1D mesh_;
    IndexSet u_;
    int qpoints_;
    std::vector<double> a0q_, fq_, gq_;  // elements * qpoints each
    std::vector<double> phiq_;           // (elements * qpoints) * |u|, index-major inner
};

struct EocReport {
    std::vector<double> widths;
    std::vector<double> errors;  // against the reference three halvings finer
    std::vector<double> eoc;     // log2 ratios of consecutive errors
    bool exact = false;          // errors at quadrature-noise floor
};

EocReport convergence_order(const DiffusionModel& model, const IndexSet& u,
                            std::span<const double> y, const ClosedForm& f,
                            const Functional& G, int degree, int k_min, int k_max);

}  // namespace mdfem

#endif
