#include "mdfem/activeset.hpp"

#include <algorithm>
#include <cmath>

namespace mdfem {

bool ActiveSet::contains(const IndexSet& u) const {
    return std::any_of(members.begin(), members.end(),
                       [&](const ActiveSetEntry& e) { return e.u == u; });
}

namespace {

struct Candidate {
    int index;
    double gamma_m;  // gamma_j * M
};

void dfs(const std::vector<Candidate>& cand, const std::vector<double>& boost_suffix,
         std::size_t from, IndexSet& current, double weight, double floor,
         std::vector<ActiveSetEntry>& out) {
    for (std::size_t i = from; i < cand.size(); ++i) {
        const double w = weight * cand[i].gamma_m;
        // best achievable by any branch from position i onward
        if (w * boost_suffix[i + 1] <= floor) break;
        current.push_back(cand[i].index);
        if (w > floor) out.push_back({current, w});
        dfs(cand, boost_suffix, i + 1, current, w, floor, out);
        current.pop_back();
    }
}

}  // namespace

ActiveSet build_active_set(const Weights& weights, double M, double pstar, double epsilon,
                           const Interval& S, double varsigma) {
    if (!(pstar > 0.0 && pstar < 1.0)) throw std::invalid_argument("p* must lie in (0,1)");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    if (M <= 0.0) throw std::invalid_argument("M must be positive");
    if (varsigma == 0.0) varsigma = 1.0 / pstar;
    if (!(varsigma > 1.0 && varsigma <= 1.0 / pstar + 1e-12))
        throw std::invalid_argument("varsigma must lie in (1, 1/p*]");

    ActiveSet aset;
    aset.epsilon = epsilon;
    aset.pstar = pstar;
    aset.varsigma = varsigma;
    aset.M = M;
    aset.S = S;
    aset.threshold = (epsilon / 2.0) / S.hi;
    const double exponent = 1.0 - 1.0 / varsigma;
    aset.weight_floor = std::pow(aset.threshold, 1.0 / exponent);

    // candidate indices: j can only appear in a member if gamma_j M times
    // the product of all weight-increasing indices still clears the floor
    std::vector<Candidate> cand;
    double boost = 1.0;
    int boosters = 0;
    {
        const long hard_cap = 10'000'000;
        long j = 1;
        while (true) {
            if (weights.gamma_upper_from(j) * M * boost <= aset.weight_floor) break;
            if (j > hard_cap)
                throw AdmissibilityError(
                    "active set enumeration not guaranteed finite for these weights");
            const double gm = weights.gamma(j) * M;
            if (gm >= 1.0) {
                boost *= gm;
                if (++boosters > 60)
                    throw AdmissibilityError(
                        "active set enumeration not guaranteed finite for these weights");
            }
            if (gm > 0.0) cand.push_back({static_cast<int>(j), gm});
            ++j;
        }
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.gamma_m != b.gamma_m) return a.gamma_m > b.gamma_m;
        return a.index < b.index;
    });

    // suffix products of the weight-increasing candidates
    std::vector<double> boost_suffix(cand.size() + 1, 1.0);
    for (std::size_t i = cand.size(); i-- > 0;)
        boost_suffix[i] = boost_suffix[i + 1] * std::max(1.0, cand[i].gamma_m);

    if (1.0 > aset.weight_floor) aset.members.push_back({IndexSet{}, 1.0});
    IndexSet current;
    dfs(cand, boost_suffix, 0, current, 1.0, aset.weight_floor, aset.members);

    std::sort(aset.members.begin(), aset.members.end(),
              [](const ActiveSetEntry& a, const ActiveSetEntry& b) {
                  if (a.weight != b.weight) return a.weight > b.weight;
                  if (a.u.size() != b.u.size()) return a.u.size() < b.u.size();
                  return a.u < b.u;
              });
    return aset;
}

ActiveSetDiagnostics diagnostics(const ActiveSet& aset, const Weights& weights, double M) {
    ActiveSetDiagnostics d;
    d.cardinality = aset.members.size();
    for (const auto& e : aset.members) {
        d.max_cardinality = std::max(d.max_cardinality, static_cast<int>(e.u.size()));
        d.in_set_mass += e.weight;
    }
    const Interval s1 = product_weight_sum(weights, M, 1.0, 1e-12);
    d.tail_mass_upper = std::max(0.0, s1.hi - d.in_set_mass);
    return d;
}

}  // namespace mdfem
