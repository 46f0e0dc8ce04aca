#ifndef MDFEM_ACTIVESET_HPP
#define MDFEM_ACTIVESET_HPP

#include "mdfem/problemspec.hpp"

#include <vector>

namespace mdfem {

/// Finite subset of N, sorted ascending, 1-based indices.
using IndexSet = std::vector<int>;

struct ActiveSetEntry {
    IndexSet u;
    double weight = 1.0;  // gamma_u * M^|u|
};

/// The family of subsets kept by the decomposition: membership test
/// (gamma_u M_u)^(1-1/varsigma) > (eps/2) / S with S = sum_v (gamma_v M_v)^(1/varsigma),
/// instantiated at varsigma = 1/p* unless overridden.  Members are sorted
/// by decreasing weight, ties by shortlex on the index set.
struct ActiveSet {
    std::vector<ActiveSetEntry> members;
    double epsilon = 0.0;
    double pstar = 0.0;
    double varsigma = 0.0;
    double M = 0.0;
    double threshold = 0.0;      // right-hand side of the membership test
    double weight_floor = 0.0;   // threshold^(1/(1-1/varsigma)), the cutoff on gamma_u M_u
    Interval S{1.0, 1.0};        // the weight-power sum used in the threshold

    bool contains(const IndexSet& u) const;
};

/// Exact DFS enumeration over indices in decreasing-gamma order with
/// product pruning; uses S.hi in the threshold so the retained set can only
/// grow (conservative for the eps/2 truncation guarantee).
/// varsigma = 0 selects the default 1/p*.
ActiveSet build_active_set(const Weights& weights, double M, double pstar, double epsilon,
                           const Interval& S, double varsigma = 0.0);

struct ActiveSetDiagnostics {
    std::size_t cardinality = 0;
    int max_cardinality = 0;       // superposition dimension d(eps)
    double in_set_mass = 0.0;      // sum over members of gamma_u M_u
    double tail_mass_upper = 0.0;  // upper bound on sum over non-members
};

ActiveSetDiagnostics diagnostics(const ActiveSet& aset, const Weights& weights, double M);

}  // namespace mdfem

#endif
