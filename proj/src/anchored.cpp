#include "mdfem/anchored.hpp"

#include <bit>
#include <cstring>

namespace mdfem {

std::string SubsetSolveCache::make_key(const Mesh1D& mesh, const IndexSet& v,
                                       std::span<const double> y) {
    std::string key;
    key.reserve(8 + v.size() * 12);
    const std::uint64_t fp = mesh.fingerprint();
    key.append(reinterpret_cast<const char*>(&fp), sizeof(fp));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::int32_t idx = v[i];
        std::uint64_t bits;
        std::memcpy(&bits, &y[i], sizeof(bits));
        key.append(reinterpret_cast<const char*>(&idx), sizeof(idx));
        key.append(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    return key;
}

double decomposed_value(const SolveWorkspace& ws, std::span<const double> y_u,
                        SubsetSolveCache* cache) {
    const IndexSet& u = ws.subset();
    if (u.size() != y_u.size()) throw std::invalid_argument("index/value length mismatch");
    if (u.size() > 24) throw std::invalid_argument("subset too large for inclusion-exclusion");
    const int card = static_cast<int>(u.size());

    double total = 0.0;
    IndexSet v;
    std::vector<double> y_v;
    std::vector<double> y_masked(card);
    for (std::uint32_t mask = 0; mask < (1u << card); ++mask) {
        v.clear();
        y_v.clear();
        for (int i = 0; i < card; ++i) {
            if (mask & (1u << i)) {
                v.push_back(u[i]);
                y_v.push_back(y_u[i]);
                y_masked[i] = y_u[i];
            } else {
                y_masked[i] = 0.0;
            }
        }
        auto solve = [&] { return ws.solve_functional(y_masked); };
        const double val =
            cache ? cache->get_or_compute(ws.mesh(), v, y_v, solve) : solve();
        const int sign_card = card - std::popcount(mask);
        total += (sign_card % 2 == 0) ? val : -val;
    }
    return total;
}

double decomposed_value(const IndexSet& u, std::span<const double> y_u, Mesh1D mesh,
                        const DiffusionModel& model, const ClosedForm& f,
                        const Functional& G, SubsetSolveCache* cache) {
    SolveWorkspace ws(model, u, f, G, mesh);
    return decomposed_value(ws, y_u, cache);
}

double anchored_vanishing_check(const IndexSet& u, std::span<const double> y_u, Mesh1D mesh,
                                const DiffusionModel& model, const ClosedForm& f,
                                const Functional& G, SubsetSolveCache* cache) {
    bool has_zero = false;
    for (double v : y_u) has_zero = has_zero || v == 0.0;
    if (!has_zero)
        throw std::invalid_argument("vanishing check needs some y_j = 0 inside u");
    return decomposed_value(u, y_u, mesh, model, f, G, cache);
}

}  // namespace mdfem
