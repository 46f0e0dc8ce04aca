#ifndef MDFEM_ANCHORED_HPP
#define MDFEM_ANCHORED_HPP

#include "mdfem/fem1d.hpp"

#include <mutex>
#include <unordered_map>

namespace mdfem {

/// Memo for G(u^h(., y_v)) solves keyed by (mesh fingerprint, v, exact bit
/// patterns of y_v).  Insert-once semantics; safe for concurrent lookups
/// from per-node workers.
class SubsetSolveCache {
public:
    struct Stats {
        std::size_t hits = 0;
        std::size_t misses = 0;
    };

    template <typename Fn>
    double get_or_compute(const Mesh1D& mesh, const IndexSet& v, std::span<const double> y,
                          Fn&& compute) {
        const std::string key = make_key(mesh, v, y);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = map_.find(key);
            if (it != map_.end()) {
                ++stats_.hits;
                return it->second;
            }
        }
        const double value = compute();
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = map_.emplace(key, value);
        if (inserted)
            ++stats_.misses;
        else
            ++stats_.hits;  // raced with another worker; values are identical
        return it->second;
    }

    Stats stats() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return stats_;
    }

private:
    static std::string make_key(const Mesh1D& mesh, const IndexSet& v,
                                std::span<const double> y);

    mutable std::mutex mutex_;
    std::unordered_map<std::string, double> map_;
    Stats stats_;
};

/// The anchored-decomposition term G(u_u^{h}(., y_u)): inclusion-exclusion
/// over all v subseteq u of G(u^h(., y_v)), every inner solve on the same
/// mesh, y_v zeroing the coordinates outside v.
double decomposed_value(const IndexSet& u, std::span<const double> y_u, Mesh1D mesh,
                        const DiffusionModel& model, const ClosedForm& f,
                        const Functional& G, SubsetSolveCache* cache = nullptr);

/// Same, against a prebuilt workspace for (u, mesh); the fast path for
/// cubature loops that revisit one subset many times.
double decomposed_value(const SolveWorkspace& ws, std::span<const double> y_u,
                        SubsetSolveCache* cache = nullptr);

/// decomposed_value specialized to inputs where some y_j = 0; the result is
/// contractually zero up to roundoff.  Throws unless the precondition holds.
double anchored_vanishing_check(const IndexSet& u, std::span<const double> y_u, Mesh1D mesh,
                                const DiffusionModel& model, const ClosedForm& f,
                                const Functional& G, SubsetSolveCache* cache = nullptr);

}  // namespace mdfem

#endif
