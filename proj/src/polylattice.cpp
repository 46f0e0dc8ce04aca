#include "mdfem/polylattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace mdfem {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t state = a ^ (0x9E3779B97F4A7C15ULL + (b << 6) + (b >> 2));
    return splitmix64(state);
}

void PolyLatticeRule::validate() const {
    if (m < 1 || m > 40) throw std::invalid_argument("rule: m out of range");
    if (n < m || n > 53) throw std::invalid_argument("rule: modulus degree out of range");
    if (s < 1) throw std::invalid_argument("rule: dimension must be >= 1");
    if (modulus.degree() != n) throw std::invalid_argument("rule: modulus degree mismatch");
    if (!is_irreducible(modulus)) throw std::invalid_argument("rule: modulus not irreducible");
    if (static_cast<int>(gen.size()) != s) throw std::invalid_argument("rule: bad vector length");
    for (const Poly2& q : gen)
        if (q.is_zero() || q.degree() >= n)
            throw std::invalid_argument("rule: component out of G_n");
}

DigitalShift DigitalShift::from_seed(std::uint64_t seed, int s, int n_bits) {
    DigitalShift out;
    out.n_bits = n_bits;
    out.digits.resize(s);
    for (int j = 0; j < s; ++j) {
        std::uint64_t state = hash_mix(seed, static_cast<std::uint64_t>(j) + 1);
        out.digits[j] = splitmix64(state) >> (64 - n_bits);
    }
    return out;
}

DigitalShift DigitalShift::zero(int s, int n_bits) {
    DigitalShift out;
    out.n_bits = n_bits;
    out.digits.assign(s, 0);
    return out;
}

std::vector<std::uint64_t> coordinate_digit_table(Poly2 modulus, Poly2 q, int m, int n) {
    // digits are linear in k: precompute the expansion of x^i q / p per bit
    std::vector<std::uint64_t> basis(m);
    for (int i = 0; i < m; ++i) {
        Poly2 xi(std::uint64_t{1} << i);
        Poly2 num = poly_mod(mul(xi, q), modulus);
        basis[i] = laurent_div(num, modulus, n).digits;
    }
    const std::uint64_t count = std::uint64_t{1} << m;
    std::vector<std::uint64_t> table(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::uint64_t d = 0;
        std::uint64_t bits = k;
        while (bits) {
            const int i = std::countr_zero(bits);
            d ^= basis[i];
            bits &= bits - 1;
        }
        table[k] = d;
    }
    return table;
}

CubatureNodeSet generate_points(const PolyLatticeRule& rule, const DigitalShift* shift) {
    rule.validate();
    if (shift && static_cast<int>(shift->digits.size()) != rule.s)
        throw std::invalid_argument("shift dimension mismatch");
    if (shift && shift->n_bits < rule.n)
        throw std::invalid_argument("shift precision below rule digit depth");

    const std::uint64_t count = rule.count();
    CubatureNodeSet out;
    out.count = count;
    out.s = rule.s;
    out.weight = std::ldexp(1.0, -rule.m);
    out.coords.resize(count * rule.s);

    const int prec = shift ? shift->n_bits : rule.n;
    for (int j = 0; j < rule.s; ++j) {
        auto table = coordinate_digit_table(rule.modulus, rule.gen[j], rule.m, rule.n);
        for (std::uint64_t k = 0; k < count; ++k) {
            std::uint64_t d = table[k];
            if (shift) {
                d <<= (shift->n_bits - rule.n);  // align digit 1 with digit 1
                d ^= shift->digits[j];
            }
            out.coords[k * rule.s + j] = std::ldexp(static_cast<double>(d), -prec) - 0.5;
        }
    }
    return out;
}

namespace {

// W(x) = sum_{l=1}^{2^n-1} r(l) wal_l(x) for the digit weight
// r(l) = 2^{-rho * mu_alpha(l)}, evaluated by a digit-by-digit pass over
// the n most significant digits of x.  States track how many 1-bits of l
// have been placed (capped at alpha); only the first alpha ones, scanned
// from the most significant position, carry weight.
class WalshKernelEval {
public:
    WalshKernelEval(int n, int alpha, int rho) : n_(n), alpha_(alpha) {
        pos_weight_.resize(n + 1);
        for (int a = 1; a <= n; ++a) pos_weight_[a] = std::ldexp(1.0, -rho * a);
    }

    double operator()(std::uint64_t digits) const {
        // v[t]: accumulated sum over prefixes with t weighted ones so far
        double v[8] = {1.0};
        for (int t = 1; t <= alpha_; ++t) v[t] = 0.0;
        for (int a = n_; a >= 1; --a) {
            const double sign = ((digits >> (n_ - a)) & 1u) ? -1.0 : 1.0;
            const double w = pos_weight_[a];
            const double vsat = v[alpha_];
            for (int t = alpha_; t >= 1; --t) v[t] += sign * w * v[t - 1];
            v[alpha_] += sign * vsat;  // ones beyond the alpha most significant
        }
        double total = 0.0;
        for (int t = 0; t <= alpha_; ++t) total += v[t];
        return total - 1.0;  // drop l = 0
    }

private:
    int n_;
    int alpha_;
    std::vector<double> pos_weight_;
};

int criterion_rho(int alpha) { return alpha == 1 ? 2 : 1; }

double criterion_from_tables(const std::vector<std::vector<std::uint64_t>>& tables,
                             const std::vector<double>& gamma, int n, int alpha) {
    const WalshKernelEval wk(n, alpha, criterion_rho(alpha));
    const std::uint64_t count = tables.front().size();
    double sum = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) {
        double prod = 1.0;
        for (std::size_t j = 0; j < tables.size(); ++j)
            prod *= 1.0 + gamma[j] * wk(tables[j][k]);
        sum += prod;
    }
    return std::max(0.0, sum / static_cast<double>(count) - 1.0);
}

std::vector<Poly2> candidate_pool(int n, int m, std::size_t pool, std::uint64_t seed,
                                  std::uint64_t salt) {
    const std::uint64_t total = (std::uint64_t{1} << n) - 1;
    // keep the per-component search budget (candidates x points) bounded
    for (int excess = m - 12; excess > 0 && pool > 64; --excess) pool /= 2;
    std::vector<Poly2> out;
    if (total <= pool || n <= 10) {
        out.reserve(total);
        for (std::uint64_t q = 1; q <= total; ++q) out.emplace_back(q);
        return out;
    }
    std::set<std::uint64_t> picked;
    std::uint64_t state = hash_mix(seed, salt);
    while (picked.size() < pool) {
        std::uint64_t q = (splitmix64(state) % total) + 1;
        picked.insert(q);
    }
    out.reserve(picked.size());
    for (std::uint64_t q : picked) out.emplace_back(q);  // std::set: ascending, lex order
    return out;
}

}  // namespace

double quality_criterion(const PolyLatticeRule& rule, const std::vector<double>& gamma,
                         int alpha) {
    rule.validate();
    if (static_cast<int>(gamma.size()) < rule.s)
        throw std::invalid_argument("criterion: need one weight per dimension");
    std::vector<std::vector<std::uint64_t>> tables(rule.s);
    for (int j = 0; j < rule.s; ++j)
        tables[j] = coordinate_digit_table(rule.modulus, rule.gen[j], rule.m, rule.n);
    return criterion_from_tables(tables, gamma, rule.n, alpha);
}

PolyLatticeRule search_generating_vector(int m, int n, int s,
                                         const std::vector<double>& gamma, int alpha,
                                         const SearchOptions& opts) {
    if (alpha < 1) throw std::invalid_argument("search: alpha must be >= 1");
    if ((alpha == 1 && n != m) || (alpha >= 2 && n != alpha * m))
        throw std::invalid_argument("search: need n = m (alpha = 1) or n = alpha*m");
    if (s < 1 || m < 1) throw std::invalid_argument("search: m and s must be >= 1");
    if (n > 53) throw std::invalid_argument("search: modulus degree beyond 53 digits");
    if (static_cast<int>(gamma.size()) < s)
        throw std::invalid_argument("search: need one weight per dimension");

    PolyLatticeRule rule;
    rule.m = m;
    rule.n = n;
    rule.s = s;
    rule.modulus = irreducible_of_degree(n);

    if (opts.strategy == SearchStrategy::fixed) {
        rule.gen.assign(s, Poly2::one());
        return rule;
    }

    const std::uint64_t count = std::uint64_t{1} << m;
    const WalshKernelEval wk(n, alpha, criterion_rho(alpha));

    if (opts.strategy == SearchStrategy::cbc) {
        std::vector<double> prod(count, 1.0);
        for (int j = 0; j < s; ++j) {
            auto pool = candidate_pool(n, m, opts.pool, opts.seed, static_cast<std::uint64_t>(j));
            double best = 0.0;
            Poly2 best_q;
            std::vector<std::uint64_t> best_table;
            bool first = true;
            for (const Poly2& q : pool) {
                auto table = coordinate_digit_table(rule.modulus, q, m, n);
                double sum = 0.0;
                for (std::uint64_t k = 0; k < count; ++k)
                    sum += prod[k] * (1.0 + gamma[j] * wk(table[k]));
                if (first || sum < best) {
                    first = false;
                    best = sum;
                    best_q = q;
                    best_table = std::move(table);
                }
            }
            rule.gen.push_back(best_q);
            for (std::uint64_t k = 0; k < count; ++k)
                prod[k] *= 1.0 + gamma[j] * wk(best_table[k]);
        }
        return rule;
    }

    // random search over full vectors
    const std::uint64_t total = (std::uint64_t{1} << n) - 1;
    std::vector<std::vector<Poly2>> vectors;
    if (s == 1) {
        for (const Poly2& q : candidate_pool(n, m, opts.pool, opts.seed, 0))
            vectors.push_back({q});
    } else {
        std::uint64_t state = hash_mix(opts.seed, 0xA5A5A5A5ULL);
        for (std::size_t r = 0; r < opts.pool; ++r) {
            std::vector<Poly2> v(s);
            for (int j = 0; j < s; ++j) v[j] = Poly2((splitmix64(state) % total) + 1);
            vectors.push_back(std::move(v));
        }
        std::sort(vectors.begin(), vectors.end());
        vectors.erase(std::unique(vectors.begin(), vectors.end()), vectors.end());
    }
    double best = 0.0;
    std::vector<Poly2> best_v;
    bool first = true;
    for (const auto& v : vectors) {
        rule.gen = v;
        const double merit = quality_criterion(rule, gamma, alpha);
        if (first || merit < best) {
            first = false;
            best = merit;
            best_v = v;
        }
    }
    rule.gen = best_v;
    return rule;
}

void save_rule(const std::filesystem::path& file, const PolyLatticeRule& rule, int alpha) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write rule cache file: " + file.string());
    out << "plr v1 alpha=" << alpha << " m=" << rule.m << " n=" << rule.n << " s=" << rule.s
        << " modulus=" << rule.modulus.to_hex() << "\n";
    for (int j = 0; j < rule.s; ++j)
        out << "q" << (j + 1) << "=" << rule.gen[j].to_hex() << "\n";
}

std::optional<PolyLatticeRule> load_rule(const std::filesystem::path& file, int alpha, int m,
                                         int n, int s) {
    std::ifstream in(file);
    if (!in) return std::nullopt;
    std::string header;
    if (!std::getline(in, header)) return std::nullopt;
    std::ostringstream want;
    want << "plr v1 alpha=" << alpha << " m=" << m << " n=" << n << " s=" << s << " modulus=";
    if (header.rfind(want.str(), 0) != 0) return std::nullopt;

    PolyLatticeRule rule;
    rule.m = m;
    rule.n = n;
    rule.s = s;
    try {
        rule.modulus = Poly2::from_hex(header.substr(want.str().size()));
        for (int j = 0; j < s; ++j) {
            std::string line;
            if (!std::getline(in, line)) return std::nullopt;
            std::ostringstream prefix;
            prefix << "q" << (j + 1) << "=";
            if (line.rfind(prefix.str(), 0) != 0) return std::nullopt;
            rule.gen.push_back(Poly2::from_hex(line.substr(prefix.str().size())));
        }
        rule.validate();
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return rule;
}

std::string weight_fingerprint(const std::vector<double>& gamma) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (double g : gamma) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(g));
        std::memcpy(&bits, &g, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

PolyLatticeRule RuleSource::get(int alpha, int m, int n, int s,
                                const std::vector<double>& gamma) {
    std::ostringstream key;
    key << alpha << "-" << m << "-" << n << "-" << s << "-" << weight_fingerprint(gamma);

    std::lock_guard<std::mutex> lock(mutex_);
    auto it = memo_.find(key.str());
    if (it != memo_.end()) return it->second;

    std::filesystem::path file;
    if (!cache_dir_.empty()) {
        file = cache_dir_ / ("plr-" + key.str() + ".txt");
        if (auto rule = load_rule(file, alpha, m, n, s)) {
            memo_[key.str()] = *rule;
            return *rule;
        }
    }

    PolyLatticeRule rule = search_generating_vector(m, n, s, gamma, alpha, opts_);
    memo_[key.str()] = rule;
    if (!cache_dir_.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cache_dir_, ec);
        if (!ec) save_rule(file, rule, alpha);
    }
    return rule;
}

}  // namespace mdfem
