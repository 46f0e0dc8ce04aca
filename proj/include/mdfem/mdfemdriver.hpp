#ifndef MDFEM_MDFEMDRIVER_HPP
#define MDFEM_MDFEMDRIVER_HPP

#include "mdfem/activeset.hpp"
#include "mdfem/anchored.hpp"
#include "mdfem/oracles.hpp"
#include "mdfem/polylattice.hpp"

#include <cstdint>
#include <functional>

namespace mdfem {

struct PlanEntry {
    IndexSet u;
    double gamma_u = 1.0;
    double C_u = 1.0;
    double pounds = 1.0;   // 2^|u| |u|, with the empty-set override of 1
    double h_u = 0.0;      // planner (unrounded) mesh width
    double k_u = 0.0;      // planner (unrounded) node count
    std::uint64_t n_u = 1; // ceil(k_u) rounded up to a power of two
    int m_u = 0;           // log2(n_u)
    Mesh1D mesh;           // width rounded down to the nesting grid
    std::uint64_t n_eff = 1;  // nodes actually evaluated (1 for the empty set)
};

/// Cost-optimal per-subset parameters from the Lagrange system of the
/// constrained minimization: minimize sum k_u h_u^{-d} pounds_u subject to
/// sum (gamma_u C_u / k_u^lambda + 2^|u| h_u^tau) = eps/2.
struct ParameterPlan {
    std::vector<PlanEntry> entries;
    double epsilon = 0.0;
    double A = 0.0, B = 0.0, Atilde = 0.0, Btilde = 0.0, xi = 0.0;
    double constraint_residual = 0.0;  // relative, with unrounded values
    double predicted_error2 = 0.0;     // with rounded values; <= eps/2
    double predicted_cost = 0.0;       // sum n_eff h_mesh^-d pounds
    RateParams rates;
    CubatureConstants constants;
};

/// fem_constant scales the FEM half of the error budget (a stand-in for
/// the unknowable discretization constant, 1 by default): the planned error-2
/// identity becomes sum_u (gamma_u C_u / k_u^lambda + fem_constant 2^|u| h_u^tau) = eps/2.
ParameterPlan make_plan(const ActiveSet& aset, const RateParams& rates,
                        const CubatureConstants& constants, double epsilon,
                        double fem_constant = 1.0);

struct SubsetContribution {
    IndexSet u;
    double value = 0.0;
    std::uint64_t nodes = 0;
    double cost = 0.0;
};

struct MdfemResult {
    double value = 0.0;
    double stderr_est = 0.0;  // randomized mode: sample standard error over shifts
    double epsilon = 0.0;
    double cost_units = 0.0;
    double wall_ms = 0.0;
    std::vector<SubsetContribution> contributions;
    CubatureMode mode = CubatureMode::deterministic;
    int shifts = 0;
    std::uint64_t seed = 0;
};

struct ExecutionContext {
    const DiffusionModel* model = nullptr;
    const ClosedForm* f = nullptr;
    const Functional* G = nullptr;
    RuleSource* rules = nullptr;
    const Weights* weights = nullptr;
    int threads = 1;
};

/// Higher-order rules with modulus degree alpha*m, plain (unshifted) nodes.
MdfemResult run_deterministic(const ParameterPlan& plan, const ExecutionContext& ctx);

/// Randomly digitally shifted rules; averages `shifts` independent shifted
/// estimates per subset and reports the sample standard error of the total.
/// All shift randomness derives from (seed, subset id, shift index), so the
/// result is bit-identical for any thread count.
MdfemResult run_randomized(const ParameterPlan& plan, const ExecutionContext& ctx, int shifts,
                           std::uint64_t seed);

struct BaselinePlan {
    int s = 0;
    std::uint64_t N = 1;
    int m = 0;
    Mesh1D mesh;
};

/// Split eps/3 per error source of the truncation algorithm:
/// N^{-1/p*} + h^tau + (sup_{j>s} b_j)^2 <= eps.
BaselinePlan plan_single_level(const Weights& weights, const RateParams& rates, double epsilon,
                               int fem_degree);

struct BaselineResult {
    double value = 0.0;
    double cost_units = 0.0;  // N h^-d max(s,1)
    BaselinePlan plan;
};

/// Truncate y to s dimensions, one (optionally shifted) rule, one mesh.
BaselineResult single_level_baseline(const ExecutionContext& ctx, const BaselinePlan& plan,
                                     bool shifted, std::uint64_t seed);

/// General-MDM cubature sizing with the log-factor exponent lambda1:
/// k_u per the Lagrange solution with |u|^{lambda1 |u|} weights, n_u = ceil(k_u),
/// and the error inflation max(1, max_u (ln n_u / |u|)^{lambda1 |u|}).
struct MdmCubaturePlan {
    std::vector<IndexSet> subsets;
    std::vector<double> k_u;
    std::vector<std::uint64_t> n_u;
    double error_inflation = 1.0;
};

MdmCubaturePlan mdm_cubature_sizes(const ActiveSet& aset,
                                   const std::function<double(int)>& C_of_card,
                                   const std::function<double(int)>& pounds_of_card,
                                   double lambda, double lambda1, double epsilon);

std::uint64_t subset_id(const IndexSet& u);

}  // namespace mdfem

#endif
