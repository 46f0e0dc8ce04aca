#ifndef MDFEM_POLYLATTICE_HPP
#define MDFEM_POLYLATTICE_HPP

#include "mdfem/gf2poly.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mdfem {

/// Polynomial lattice rule P_{p,m,n,s}(q): 2^m points in s dimensions from
/// truncated Laurent expansions k(x) q_j(x) / p(x).  Plain and randomly
/// shifted rules use n = m; higher-order rules use n = alpha*m.
struct PolyLatticeRule {
    int m = 0;          // log2 of the point count
    int n = 0;          // modulus degree, also the digit depth of each point
    Poly2 modulus;      // irreducible of degree n
    std::vector<Poly2> gen;
    int s = 0;

    std::uint64_t count() const { return std::uint64_t{1} << m; }
    void validate() const;  // throws std::invalid_argument on a malformed rule
};

/// Per-dimension digital-shift digits, derived deterministically from a
/// seed with a counter-based generator so results are independent of
/// evaluation order.
struct DigitalShift {
    std::vector<std::uint64_t> digits;  // one value per dimension, n_bits each
    int n_bits = 53;

    static DigitalShift from_seed(std::uint64_t seed, int s, int n_bits = 53);
    static DigitalShift zero(int s, int n_bits = 53);
};

/// Equal-weight node set over [-1/2, 1/2)^s.
struct CubatureNodeSet {
    std::uint64_t count = 0;
    int s = 0;
    double weight = 0.0;             // 2^{-m}, same for every node
    std::vector<double> coords;      // count x s, row-major

    const double* point(std::uint64_t k) const { return coords.data() + k * s; }
};

/// Digit integers (w_1..w_n packed, w_1 most significant) of the 1D slice
/// k -> theta_n(k q / p) for k = 0..2^m-1.
std::vector<std::uint64_t> coordinate_digit_table(Poly2 modulus, Poly2 q, int m, int n);

/// Nodes of the (optionally digitally shifted) rule, translated by -1/2.
CubatureNodeSet generate_points(const PolyLatticeRule& rule,
                                const DigitalShift* shift = nullptr);

/// Figure of merit: weighted sum over the truncated dual net of the point
/// set, with Walsh-coefficient decay 2^{-mu_alpha(l)} for alpha >= 2 and the
/// squared first-order decay for alpha = 1 (shift-averaged mean-square
/// form).  Shift-invariant, nonnegative, deterministic; smaller is better.
double quality_criterion(const PolyLatticeRule& rule, const std::vector<double>& gamma,
                         int alpha);

enum class SearchStrategy { cbc, random_search, fixed };

struct SearchOptions {
    SearchStrategy strategy = SearchStrategy::cbc;
    std::uint64_t seed = 0x5851F42D4C957F2DULL;  // candidate sampling only
    std::size_t pool = 512;                     // candidate budget per component / vectors
};

/// Build a rule whose generating vector is chosen by the configured
/// strategy.  CBC minimizes the criterion component by component over all
/// nonzero q_j of degree < n (a deterministic sample of `pool` candidates
/// once the full set gets too large); random-search takes the best of
/// `pool` full vectors; fixed returns q = (1,...,1).  Ties always break
/// toward the lexicographically smallest candidate.
PolyLatticeRule search_generating_vector(int m, int n, int s,
                                         const std::vector<double>& gamma, int alpha,
                                         const SearchOptions& opts = {});

/// Cache file, line-based text: header
///   plr v1 alpha=<a> m=<m> n=<n> s=<s> modulus=<hex>
/// then one line per component `q<j>=<hex>`.
void save_rule(const std::filesystem::path& file, const PolyLatticeRule& rule, int alpha);
std::optional<PolyLatticeRule> load_rule(const std::filesystem::path& file, int alpha, int m,
                                         int n, int s);

std::string weight_fingerprint(const std::vector<double>& gamma);

/// Memoizing provider of generating vectors, keyed by
/// (alpha, m, n, s, weight fingerprint); backed by an optional on-disk
/// cache directory.  Thread-safe.
class RuleSource {
public:
    explicit RuleSource(SearchOptions opts = {}, std::filesystem::path cache_dir = {})
        : opts_(opts), cache_dir_(std::move(cache_dir)) {}

    PolyLatticeRule get(int alpha, int m, int n, int s, const std::vector<double>& gamma);

private:
    SearchOptions opts_;
    std::filesystem::path cache_dir_;
    std::map<std::string, PolyLatticeRule> memo_;
    std::mutex mutex_;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b);

}  // namespace mdfem

#endif
