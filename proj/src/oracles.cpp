#include "mdfem/oracles.hpp"

#include <cmath>
#include <sstream>
#include <thread>
#include <vector>

namespace mdfem {

namespace {

// Tensor sum over quad_degree^s nodes, chunked with fixed boundaries and
// reduced in chunk order so results do not depend on the thread count.
double tensor_sum(int s, int quad_degree, int threads,
                  const std::function<double(std::span<const double>)>& F) {
    const GaussRule& gr = gauss_legendre(quad_degree);
    std::uint64_t total = 1;
    for (int j = 0; j < s; ++j) total *= static_cast<std::uint64_t>(quad_degree);

    const std::uint64_t chunk = 4096;
    const std::uint64_t nchunks = (total + chunk - 1) / chunk;
    std::vector<double> partial(nchunks, 0.0);

    auto worker = [&](std::uint64_t c0, std::uint64_t c1) {
        std::vector<double> y(s);
        for (std::uint64_t c = c0; c < c1; ++c) {
            double acc = 0.0;
            const std::uint64_t hi = std::min(total, (c + 1) * chunk);
            for (std::uint64_t k = c * chunk; k < hi; ++k) {
                std::uint64_t rest = k;
                double w = 1.0;
                for (int j = 0; j < s; ++j) {
                    const int idx = static_cast<int>(rest % quad_degree);
                    rest /= quad_degree;
                    y[j] = 0.5 * gr.nodes[idx];
                    w *= 0.5 * gr.weights[idx];
                }
                acc += w * F(y);
            }
            partial[c] = acc;
        }
    };

    threads = std::max(1, threads);
    if (threads == 1 || nchunks == 1) {
        worker(0, nchunks);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t per = (nchunks + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const std::uint64_t c0 = t * per;
            const std::uint64_t c1 = std::min(nchunks, c0 + per);
            if (c0 >= c1) break;
            pool.emplace_back(worker, c0, c1);
        }
        for (auto& th : pool) th.join();
    }

    double sum = 0.0;
    for (double p : partial) sum += p;
    return sum;
}

}  // namespace

OracleEstimate tensor_gauss_reference(const DiffusionModel& model, const ClosedForm& f,
                                      const Functional& G, int s, int quad_degree,
                                      Mesh1D fine_mesh, int threads) {
    if (s < 0 || s > 8) throw std::invalid_argument("oracle dimension must be in 0..8");
    if (quad_degree < 1) throw std::invalid_argument("oracle quadrature degree must be >= 1");

    IndexSet u(s);
    for (int j = 0; j < s; ++j) u[j] = j + 1;

    auto value_at = [&](int qd, Mesh1D mesh) {
        if (s == 0) return apply_functional(G, assemble_solve(model, {}, {}, f, mesh));
        const SolveWorkspace ws(model, u, f, G, mesh);
        auto F = [&](std::span<const double> y) { return ws.solve_functional(y); };
        return tensor_sum(s, qd, threads, F);
    };

    OracleEstimate est;
    est.value = value_at(quad_degree, fine_mesh);
    const Mesh1D coarse = Mesh1D::with_elements(std::max(1, fine_mesh.elements / 2),
                                                fine_mesh.degree);
    const double v_coarse_mesh = value_at(quad_degree, coarse);
    double quad_diff = 0.0;
    if (s > 0) quad_diff = std::abs(est.value - value_at(quad_degree + 2, fine_mesh));
    est.error_estimate = quad_diff + std::abs(est.value - v_coarse_mesh);

    std::ostringstream fp;
    fp << "tensor-gauss s=" << s << " q=" << quad_degree << " elems=" << fine_mesh.elements
       << " deg=" << fine_mesh.degree;
    est.fingerprint = fp.str();
    return est;
}

OracleEstimate tensor_gauss_integral(const std::function<double(std::span<const double>)>& F,
                                     int s, int quad_degree) {
    if (s < 1 || s > 8) throw std::invalid_argument("oracle dimension must be in 1..8");
    OracleEstimate est;
    est.value = tensor_sum(s, quad_degree, 1, F);
    est.error_estimate = std::abs(est.value - tensor_sum(s, quad_degree + 2, 1, F));
    std::ostringstream fp;
    fp << "tensor-gauss-integral s=" << s << " q=" << quad_degree;
    est.fingerprint = fp.str();
    return est;
}

double subset_sum_bruteforce(const Weights& weights, double M, double pstar, int J) {
    if (J < 0 || J > 20) throw std::invalid_argument("brute-force subset bound must be in 0..20");
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << J); ++mask) {
        double w = 1.0;
        for (int j = 0; j < J; ++j)
            if (mask & (1u << j)) w *= weights.gamma(j + 1) * M;
        total += std::pow(w, pstar);
    }
    return total;
}

}  // namespace mdfem
