#include "mdfem/fem1d.hpp"

#include "mdfem/polylattice.hpp"  // hash_mix

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace mdfem {

namespace {

GaussRule compute_gauss(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess, Newton on P_n
        double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[n - 1 - i] = x;
        r.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

}  // namespace

const GaussRule& gauss_legendre(int points) {
    if (points < 1 || points > 64) throw std::invalid_argument("gauss rule points out of range");
    static std::map<int, GaussRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(points);
    if (it == cache.end()) it = cache.emplace(points, compute_gauss(points)).first;
    return it->second;
}

// ---------------------------------------------------------------- Mesh1D

std::uint64_t Mesh1D::fingerprint() const {
    return hash_mix(static_cast<std::uint64_t>(elements), static_cast<std::uint64_t>(degree));
}

Mesh1D Mesh1D::with_elements(int elements, int degree) {
    if (degree < 1 || degree > 3) throw std::invalid_argument("element degree must be 1..3");
    if (elements < 1) throw std::invalid_argument("need at least one element");
    return {elements, degree};
}

Mesh1D Mesh1D::for_target_width(double h_target, int degree) {
    if (degree < 1 || degree > 3) throw std::invalid_argument("element degree must be 1..3");
    if (!(h_target > 0.0)) throw std::invalid_argument("target width must be positive");
    int k = 0;
    while (1.0 / (std::ldexp(1.0, k) * degree) > h_target) {
        ++k;
        if (k > 26) throw NumericalError("mesh width underflow: target too small");
    }
    return {static_cast<int>(std::ldexp(1.0, k)) * degree, degree};
}

Mesh1D Mesh1D::refined(int extra_halvings) const {
    Mesh1D m = *this;
    for (int i = 0; i < extra_halvings; ++i) m.elements *= 2;
    return m;
}

// -------------------------------------------------------------- BandedSpd

BandedSpd::BandedSpd(int n, int bandwidth)
    : n_(n), bw_(bandwidth), band_(static_cast<std::size_t>(n) * (bandwidth + 1), 0.0) {}

double& BandedSpd::at(int i, int j) {
    if (j < i) std::swap(i, j);
    if (j - i > bw_) throw std::out_of_range("band access outside bandwidth");
    return band_[static_cast<std::size_t>(i) * (bw_ + 1) + (j - i)];
}

double BandedSpd::at(int i, int j) const {
    if (j < i) std::swap(i, j);
    if (j - i > bw_) return 0.0;
    return band_[static_cast<std::size_t>(i) * (bw_ + 1) + (j - i)];
}

std::vector<double> BandedSpd::multiply(const std::vector<double>& x) const {
    std::vector<double> out(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        for (int j = std::max(0, i - bw_); j <= std::min(n_ - 1, i + bw_); ++j)
            out[i] += at(i, j) * x[j];
    }
    return out;
}

void BandedSpd::factorize() {
    // lower-band Cholesky; entry L[i][j] lives where A[j][i] was (j <= i)
    for (int j = 0; j < n_; ++j) {
        double d = at(j, j);
        for (int k = std::max(0, j - bw_); k < j; ++k) {
            const double l = at(k, j);
            d -= l * l;
        }
        if (!(d > 0.0)) throw NumericalError("stiffness matrix not positive definite");
        const double dj = std::sqrt(d);
        at(j, j) = dj;
        for (int i = j + 1; i <= std::min(n_ - 1, j + bw_); ++i) {
            double v = at(j, i);
            for (int k = std::max(0, i - bw_); k < j; ++k) v -= at(k, i) * at(k, j);
            at(j, i) = v / dj;
        }
    }
    factored_ = true;
}

std::vector<double> BandedSpd::solve(std::vector<double> rhs) const {
    if (!factored_) throw std::logic_error("solve before factorize");
    // forward: L y = rhs, L[i][k] stored at band (k, i)
    for (int i = 0; i < n_; ++i) {
        double v = rhs[i];
        for (int k = std::max(0, i - bw_); k < i; ++k) v -= at(k, i) * rhs[k];
        rhs[i] = v / at(i, i);
    }
    // backward: L^T x = y
    for (int i = n_ - 1; i >= 0; --i) {
        double v = rhs[i];
        for (int k = i + 1; k <= std::min(n_ - 1, i + bw_); ++k) v -= at(i, k) * rhs[k];
        rhs[i] = v / at(i, i);
    }
    return rhs;
}

// ------------------------------------------------------------- shape funcs

namespace {

struct ShapeTable {
    int degree;
    int qpoints;
    std::vector<double> qt;  // quadrature nodes mapped to [0,1]
    std::vector<double> qw;  // weights on [0,1]
    std::vector<double> val;   // qpoints x (degree+1)
    std::vector<double> grad;  // qpoints x (degree+1), d/dt on [0,1]
};

ShapeTable make_shape_table(int degree, int qpoints) {
    const GaussRule& gr = gauss_legendre(qpoints);
    ShapeTable t;
    t.degree = degree;
    t.qpoints = qpoints;
    t.qt.resize(qpoints);
    t.qw.resize(qpoints);
    t.val.resize(static_cast<std::size_t>(qpoints) * (degree + 1));
    t.grad.resize(static_cast<std::size_t>(qpoints) * (degree + 1));
    for (int q = 0; q < qpoints; ++q) {
        t.qt[q] = 0.5 * (gr.nodes[q] + 1.0);
        t.qw[q] = 0.5 * gr.weights[q];
        for (int i = 0; i <= degree; ++i) {
            // Lagrange basis at equispaced nodes i/degree
            double v = 1.0, dv = 0.0;
            const double ti = static_cast<double>(i) / degree;
            for (int j = 0; j <= degree; ++j) {
                if (j == i) continue;
                const double tj = static_cast<double>(j) / degree;
                const double denom = ti - tj;
                dv = dv * (t.qt[q] - tj) / denom + v / denom;
                v *= (t.qt[q] - tj) / denom;
            }
            t.val[q * (degree + 1) + i] = v;
            t.grad[q * (degree + 1) + i] = dv;
        }
    }
    return t;
}

const ShapeTable& shape_table(int degree, int qpoints) {
    static std::map<std::pair<int, int>, ShapeTable> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(degree, qpoints);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, make_shape_table(degree, qpoints)).first;
    return it->second;
}

double lagrange_eval(int degree, const std::vector<double>& node_values, int e, double t) {
    double out = 0.0;
    for (int i = 0; i <= degree; ++i) {
        double v = 1.0;
        const double ti = static_cast<double>(i) / degree;
        for (int j = 0; j <= degree; ++j) {
            if (j == i) continue;
            const double tj = static_cast<double>(j) / degree;
            v *= (t - tj) / (ti - tj);
        }
        out += node_values[static_cast<std::size_t>(e) * degree + i] * v;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- assembly

FemSystem assemble(const DiffusionModel& model, const IndexSet& u,
                   std::span<const double> y, const ClosedForm& f, Mesh1D mesh) {
    if (u.size() != y.size()) throw std::invalid_argument("index/value length mismatch");
    for (double v : y)
        if (v < -0.5 || v > 0.5)
            throw std::invalid_argument("parameter values must lie in [-1/2, 1/2]");

    const int deg = mesh.degree;
    const int qpoints = deg + 3;  // exactness 2*deg + 5 >= 2*deg + 4
    const ShapeTable& st = shape_table(deg, qpoints);
    const int n = mesh.interior_dofs();
    FemSystem sys{mesh, BandedSpd(n, deg), std::vector<double>(n, 0.0)};

    const double h = mesh.h();
    std::vector<double> aq(qpoints), fq(qpoints);
    for (int e = 0; e < mesh.elements; ++e) {
        for (int q = 0; q < qpoints; ++q) {
            const double x = (e + st.qt[q]) * h;
            aq[q] = model.a_eval(x, u, y);
            if (!(aq[q] > 0.0)) throw NumericalError("ellipticity violated: a(x,y) <= 0");
            fq[q] = f(x);
        }
        for (int i = 0; i <= deg; ++i) {
            const int gi = e * deg + i - 1;  // interior dof index (-1 = boundary)
            if (gi < 0 || gi >= n) continue;
            double load = 0.0;
            for (int q = 0; q < qpoints; ++q)
                load += st.qw[q] * fq[q] * st.val[q * (deg + 1) + i];
            sys.rhs[gi] += h * load;
            for (int j = i; j <= deg; ++j) {
                const int gj = e * deg + j - 1;
                if (gj < 0 || gj >= n) continue;
                double stiff = 0.0;
                for (int q = 0; q < qpoints; ++q)
                    stiff += st.qw[q] * aq[q] * st.grad[q * (deg + 1) + i] *
                             st.grad[q * (deg + 1) + j];
                sys.matrix.at(gi, gj) += stiff / h;
            }
        }
    }
    return sys;
}

FemSolution assemble_solve(const DiffusionModel& model, const IndexSet& u,
                           std::span<const double> y, const ClosedForm& f, Mesh1D mesh) {
    FemSystem sys = assemble(model, u, y, f, mesh);
    sys.matrix.factorize();
    std::vector<double> interior = sys.matrix.solve(std::move(sys.rhs));

    FemSolution sol;
    sol.mesh = mesh;
    sol.node_values.assign(mesh.node_count(), 0.0);
    for (int i = 0; i < mesh.interior_dofs(); ++i) sol.node_values[i + 1] = interior[i];
    return sol;
}

double FemSolution::eval(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    int e = std::min(mesh.elements - 1, static_cast<int>(x * mesh.elements));
    const double t = x * mesh.elements - e;
    return lagrange_eval(mesh.degree, node_values, e, t);
}

double FemSolution::v_norm() const {
    const int deg = mesh.degree;
    const ShapeTable& st = shape_table(deg, deg + 1);  // u' squared has degree 2 deg - 2
    const double h = mesh.h();
    double acc = 0.0;
    for (int e = 0; e < mesh.elements; ++e) {
        for (int q = 0; q < st.qpoints; ++q) {
            double du = 0.0;
            for (int i = 0; i <= deg; ++i)
                du += node_values[static_cast<std::size_t>(e) * deg + i] *
                      st.grad[q * (deg + 1) + i];
            acc += st.qw[q] * du * du / h;
        }
    }
    return std::sqrt(acc);
}

double apply_functional(const Functional& G, const FemSolution& sol) {
    const int deg = sol.mesh.degree;
    const int gdeg = G.g.poly_degree();
    const int qpoints = gdeg >= 0 ? ((deg + gdeg) / 2 + 1) : (deg + 6);
    const ShapeTable& st = shape_table(deg, qpoints);
    const double h = sol.mesh.h();
    double acc = 0.0;
    for (int e = 0; e < sol.mesh.elements; ++e) {
        for (int q = 0; q < st.qpoints; ++q) {
            double uh = 0.0;
            for (int i = 0; i <= deg; ++i)
                uh += sol.node_values[static_cast<std::size_t>(e) * deg + i] *
                      st.val[q * (deg + 1) + i];
            acc += st.qw[q] * G.g((e + st.qt[q]) * h) * uh;
        }
    }
    return acc * h;
}

// ----------------------------------------------------------- SolveWorkspace

SolveWorkspace::SolveWorkspace(const DiffusionModel& model, IndexSet u, const ClosedForm& f,
                               const Functional& G, Mesh1D mesh)
    : mesh_(mesh), u_(std::move(u)) {
    const int deg = mesh.degree;
    const int gdeg = G.g.poly_degree();
    qpoints_ = std::max(deg + 3, gdeg >= 0 ? (deg + gdeg) / 2 + 1 : deg + 6);
    const ShapeTable& st = shape_table(deg, qpoints_);
    const int card = static_cast<int>(u_.size());
    const std::size_t total = static_cast<std::size_t>(mesh.elements) * qpoints_;
    a0q_.resize(total);
    fq_.resize(total);
    gq_.resize(total);
    phiq_.resize(total * card);
    const double h = mesh.h();
    for (int e = 0; e < mesh.elements; ++e) {
        for (int q = 0; q < qpoints_; ++q) {
            const double x = (e + st.qt[q]) * h;
            const std::size_t idx = static_cast<std::size_t>(e) * qpoints_ + q;
            a0q_[idx] = model.a0(x);
            fq_[idx] = f(x);
            gq_[idx] = G.g(x);
            for (int c = 0; c < card; ++c) phiq_[idx * card + c] = model.phi(u_[c], x);
        }
    }
}

FemSolution SolveWorkspace::solve(std::span<const double> y) const {
    const int card = static_cast<int>(u_.size());
    if (static_cast<int>(y.size()) != card)
        throw std::invalid_argument("workspace solve: value count mismatch");
    const int deg = mesh_.degree;
    const ShapeTable& st = shape_table(deg, qpoints_);
    const int n = mesh_.interior_dofs();
    BandedSpd matrix(n, deg);
    std::vector<double> rhs(n, 0.0);
    const double h = mesh_.h();
    std::vector<double> aq(qpoints_);
    for (int e = 0; e < mesh_.elements; ++e) {
        for (int q = 0; q < qpoints_; ++q) {
            const std::size_t idx = static_cast<std::size_t>(e) * qpoints_ + q;
            double a = a0q_[idx];
            for (int c = 0; c < card; ++c) a += y[c] * phiq_[idx * card + c];
            if (!(a > 0.0)) throw NumericalError("ellipticity violated: a(x,y) <= 0");
            aq[q] = a;
        }
        for (int i = 0; i <= deg; ++i) {
            const int gi = e * deg + i - 1;
            if (gi < 0 || gi >= n) continue;
            double load = 0.0;
            for (int q = 0; q < qpoints_; ++q)
                load += st.qw[q] * fq_[static_cast<std::size_t>(e) * qpoints_ + q] *
                        st.val[q * (deg + 1) + i];
            rhs[gi] += h * load;
            for (int j = i; j <= deg; ++j) {
                const int gj = e * deg + j - 1;
                if (gj < 0 || gj >= n) continue;
                double stiff = 0.0;
                for (int q = 0; q < qpoints_; ++q)
                    stiff += st.qw[q] * aq[q] * st.grad[q * (deg + 1) + i] *
                             st.grad[q * (deg + 1) + j];
                matrix.at(gi, gj) += stiff / h;
            }
        }
    }
    matrix.factorize();
    std::vector<double> interior = matrix.solve(std::move(rhs));
    FemSolution sol;
    sol.mesh = mesh_;
    sol.node_values.assign(mesh_.node_count(), 0.0);
    for (int i = 0; i < n; ++i) sol.node_values[i + 1] = interior[i];
    return sol;
}

double SolveWorkspace::solve_functional(std::span<const double> y) const {
    FemSolution sol = solve(y);
    const int deg = mesh_.degree;
    const ShapeTable& st = shape_table(deg, qpoints_);
    const double h = mesh_.h();
    double acc = 0.0;
    for (int e = 0; e < mesh_.elements; ++e) {
        for (int q = 0; q < qpoints_; ++q) {
            double uh = 0.0;
            for (int i = 0; i <= deg; ++i)
                uh += sol.node_values[static_cast<std::size_t>(e) * deg + i] *
                      st.val[q * (deg + 1) + i];
            acc += st.qw[q] * gq_[static_cast<std::size_t>(e) * qpoints_ + q] * uh;
        }
    }
    return acc * h;
}

EocReport convergence_order(const DiffusionModel& model, const IndexSet& u,
                            std::span<const double> y, const ClosedForm& f,
                            const Functional& G, int degree, int k_min, int k_max) {
    if (k_min > k_max) throw std::invalid_argument("bad refinement range");
    EocReport rep;
    const Mesh1D ref_mesh = Mesh1D::with_elements((1 << (k_max + 3)) * degree, degree);
    const double ref = apply_functional(G, assemble_solve(model, u, y, f, ref_mesh));
    double scale = std::max(1.0, std::abs(ref));
    for (int k = k_min; k <= k_max; ++k) {
        Mesh1D mesh = Mesh1D::with_elements((1 << k) * degree, degree);
        const double val = apply_functional(G, assemble_solve(model, u, y, f, mesh));
        rep.widths.push_back(mesh.h());
        rep.errors.push_back(std::abs(val - ref));
    }
    rep.exact = std::all_of(rep.errors.begin(), rep.errors.end(),
                            [&](double e) { return e <= 1e-12 * scale; });
    for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i) {
        const double denom = rep.errors[i + 1];
        rep.eoc.push_back(denom > 0.0 ? std::log2(rep.errors[i] / denom) : 0.0);
    }
    return rep;
}

}  // namespace mdfem
