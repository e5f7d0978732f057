#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fft.hpp"

namespace dcq {

using cplx = std::complex<double>;

struct RKTableau {
    int m = 1;
    Eigen::MatrixXd A;
    Eigen::VectorXd b, c;
    double r_infinity = 0;
};

inline RKTableau radau_tableau(int m)
{
    RKTableau t;
    t.m = m;
    t.A.resize(m, m);
    t.b.resize(m);
    t.c.resize(m);
    if (m == 1) {
        t.A << 1.0;
        t.c << 1.0;
    } else if (m == 2) {
        t.A << 5.0 / 12, -1.0 / 12, 3.0 / 4, 1.0 / 4;
        t.c << 1.0 / 3, 1.0;
    } else if (m == 3) {
        const double r6 = std::sqrt(6.0);
        t.A << (88 - 7 * r6) / 360, (296 - 169 * r6) / 1800, (-2 + 3 * r6) / 225,
            (296 + 169 * r6) / 1800, (88 + 7 * r6) / 360, (-2 - 3 * r6) / 225,
            (16 - r6) / 36, (16 + r6) / 36, 1.0 / 9;
        t.c << (4 - r6) / 10, (4 + r6) / 10, 1.0;
    } else {
        throw ConfigError("Radau IIA tableau available for m = 1, 2, 3 only");
    }
    t.b = t.A.row(m - 1).transpose();
    t.r_infinity = 1.0 - t.b.dot(t.A.inverse() * Eigen::VectorXd::Ones(m));
    return t;
}

// (A + zeta/(1-zeta) 1 b^T)^{-1}
inline Eigen::MatrixXcd delta_symbol(const RKTableau& tab, cplx zeta)
{
    if (!(std::abs(zeta) < 1)) throw DomainError("delta_symbol: |zeta| must be < 1");
    const int m = tab.m;
    Eigen::MatrixXcd M = tab.A.cast<cplx>()
        + (zeta / (1.0 - zeta)) * (Eigen::VectorXcd::Ones(m) * tab.b.transpose().cast<cplx>());
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(M);
    if (!lu.isInvertible()) {
        std::ostringstream os;
        os << "delta_symbol: singular matrix at zeta = " << zeta;
        throw NumericalError(os.str());
    }
    return lu.inverse();
}

struct CQGrid {
    double tau = 0;
    int N = 0;
    double rho = 0;

    int L() const { return N + 1; }
    double T() const { return N * tau; }

    static double default_rho(int L)
    {
        return std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (2.0 * L));
    }

    // rho <= 0 selects the default eps^(1/(2L))
    static CQGrid make(double T, int N, double rho = 0)
    {
        if (!(T > 0) || N < 1) throw ConfigError("time grid needs T > 0 and N >= 1");
        CQGrid g{T / N, N, rho > 0 ? rho : default_rho(N + 1)};
        if (!(g.rho > 0 && g.rho < 1)) throw ConfigError("contour radius must lie in (0,1)");
        return g;
    }
};

// Entries g^0..g^{count-1}; column n stacks the m stage vectors (stage-major, each of length dim).
struct StageSignal {
    int dim = 0;
    int m = 1;
    Eigen::MatrixXd data;

    StageSignal() = default;
    StageSignal(int dim_, int m_, int count) : dim(dim_), m(m_), data(Eigen::MatrixXd::Zero(dim_ * m_, count)) {}

    int count() const { return static_cast<int>(data.cols()); }

    auto stage(int n, int i) { return data.block(i * dim, n, dim, 1); }
    auto stage(int n, int i) const { return data.block(i * dim, n, dim, 1); }

    // value at t_n: last stage of entry n-1 (zero at n = 0)
    Eigen::VectorXd point_value(int n) const
    {
        if (n == 0) return Eigen::VectorXd::Zero(dim);
        return stage(n - 1, m - 1);
    }

    // f(t) sampled at t_n + c_i tau
    template <class F>
    static StageSignal sample(F&& f, int dim, const RKTableau& tab, double tau, int count)
    {
        StageSignal g(dim, tab.m, count);
        for (int n = 0; n < count; ++n)
            for (int i = 0; i < tab.m; ++i) g.stage(n, i) = f((n + tab.c(i)) * tau);
        return g;
    }
};

struct WeightSequence {
    int m = 1;
    int block_dim = 1;
    std::vector<Eigen::MatrixXd> W; // each (m*block_dim) square, stage-major
};

struct NodeDecomposition {
    cplx zeta;
    Eigen::MatrixXcd Q, Qinv;
    Eigen::VectorXcd lambda;
    double cond = 1;
};

// Delta(zeta)/tau = Q diag(lambda) Q^{-1}
inline NodeDecomposition decompose_node(const RKTableau& tab, cplx zeta, double tau)
{
    NodeDecomposition d;
    d.zeta = zeta;
    Eigen::MatrixXcd D = delta_symbol(tab, zeta) / tau;
    if (tab.m == 1) {
        d.Q = Eigen::MatrixXcd::Identity(1, 1);
        d.Qinv = d.Q;
        d.lambda = D.diagonal();
        return d;
    }
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(D);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of Delta failed");
    d.Q = es.eigenvectors();
    d.lambda = es.eigenvalues();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(d.Q);
    const auto& sv = svd.singularValues();
    d.cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    d.Qinv = d.Q.inverse();
    for (int j = 0; j < tab.m; ++j)
        if (!(d.lambda(j).real() > 0)) throw NumericalError("eigenvalue of Delta/tau with Re <= 0");
    return d;
}

struct PassOptions {
    double cond_limit = 1e8;
    int max_rho_retries = 3;
    bool parallel_nodes = true;
};

struct PassInfo {
    double rho_used = 0;
    int rho_retries = 0;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<NodeDecomposition> decompose_contour(const RKTableau& tab, double tau, double rho, int L,
                                                        int half, double cond_limit, bool& ok)
{
    std::vector<NodeDecomposition> out(half + 1);
    ok = true;
    for (int l = 0; l <= half; ++l) {
        cplx z = std::polar(rho, 2.0 * std::numbers::pi * l / L);
        out[l] = decompose_node(tab, z, tau);
        if (!(out[l].cond < cond_limit)) ok = false;
    }
    return out;
}

inline void check_initial_value(const StageSignal& g, PassInfo* info)
{
    if (!info || g.count() == 0) return;
    double mx = g.data.cwiseAbs().maxCoeff();
    double g0 = g.data.col(0).cwiseAbs().maxCoeff();
    if (mx > 0 && g0 > 1e-8 * mx)
        info->warnings.push_back("input does not vanish at t = 0 (|g^0| > 1e-8 max|g|)");
}

} // namespace detail

// Core of every frequency-domain CQ operation. For each contour node l and each eigenvalue
// lambda_j of Delta(zeta_l)/tau, op(l, j, lambda_j, yhat_j) maps a transformed stage component
// of length g.dim to one of length dim_out. Real input is assumed, so only nodes l <= L/2 are
// visited and the rest follow by conjugation.
template <class Op>
StageSignal frequency_pass(const StageSignal& g, const RKTableau& tab, const CQGrid& grid, int dim_out, Op&& op,
                           const PassOptions& opts = {}, PassInfo* info = nullptr)
{
    const int L = g.count();
    const int m = tab.m;
    const int din = g.dim;
    if (g.m != m) throw ConfigError("stage count of signal and tableau differ");
    if (L < 1) return StageSignal(dim_out, m, 0);
    const int half = L / 2;

    double rho = grid.rho;
    bool ok = false;
    std::vector<NodeDecomposition> nodes;
    int retry = 0;
    for (;; ++retry) {
        nodes = detail::decompose_contour(tab, grid.tau, rho, L, half, opts.cond_limit, ok);
        if (ok) break;
        if (retry >= opts.max_rho_retries)
            throw NumericalError("contour node with ill-conditioned eigenvectors of Delta; rho retries exhausted");
        rho = std::pow(rho, 1.05);
    }
    if (info) {
        info->rho_used = rho;
        info->rho_retries = retry;
        if (retry > 0) info->warnings.push_back("contour radius perturbed to avoid a near-defective Delta");
    }
    detail::check_initial_value(g, info);

    Eigen::MatrixXcd X = g.data.cast<cplx>();
    double rn = 1.0;
    for (int n = 0; n < L; ++n, rn *= rho) X.col(n) *= rn;
    fft::transform_rows(X, +1);

    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim_out) * m, L);
    std::vector<std::exception_ptr> errs(half + 1);

#pragma omp parallel for schedule(dynamic, 1) if (opts.parallel_nodes)
    for (int l = 0; l <= half; ++l) {
        try {
            const NodeDecomposition& d = nodes[l];
            std::vector<Eigen::VectorXcd> outs(m);
            for (int j = 0; j < m; ++j) {
                Eigen::VectorXcd y = Eigen::VectorXcd::Zero(din);
                for (int k = 0; k < m; ++k) y += d.Qinv(j, k) * X.block(k * din, l, din, 1);
                outs[j] = op(l, j, d.lambda(j), y);
                if (outs[j].size() != dim_out) throw ConfigError("frequency operator returned wrong size");
            }
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(dim_out);
                for (int j = 0; j < m; ++j) acc += d.Q(i, j) * outs[j];
                Y.block(static_cast<Eigen::Index>(i) * dim_out, l, dim_out, 1) = acc;
            }
        } catch (...) {
            errs[l] = std::current_exception();
        }
    }
    for (int l = 0; l <= half; ++l) {
        if (!errs[l]) continue;
        try {
            std::rethrow_exception(errs[l]);
        } catch (const NumericalError& e) {
            throw NumericalError("frequency node " + std::to_string(l) + ": " + e.what());
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw NumericalError("frequency node " + std::to_string(l) + ": " + e.what());
        }
    }
    for (int l = half + 1; l < L; ++l) Y.col(l) = Y.col(L - l).conjugate();

    fft::transform_rows(Y, -1);
    StageSignal out(dim_out, m, L);
    double rinv = 1.0 / L;
    for (int n = 0; n < L; ++n, rinv /= rho) out.data.col(n) = (Y.col(n) * rinv).real();
    return out;
}

// K(d_t^tau) g for a symbol acting on vectors: K(s, v) -> K(s) v.
template <class K>
StageSignal apply_symbol(K&& k, const StageSignal& g, const RKTableau& tab, const CQGrid& grid, int dim_out = -1,
                         const PassOptions& opts = {}, PassInfo* info = nullptr)
{
    if (dim_out < 0) dim_out = g.dim;
    return frequency_pass(
        g, tab, grid, dim_out, [&](int, int, cplx s, const Eigen::VectorXcd& v) { return Eigen::VectorXcd(k(s, v)); },
        opts, info);
}

struct NodeStat {
    int node = 0;
    int stage = 0;
    cplx s;
    double seconds = 0;
    double residual = 0;
};

// A(d_t^tau)^{-1} g. factory(s) returns a callable solving A(s) x = r.
template <class Factory>
StageSignal solve_convolution_equation(Factory&& factory, const StageSignal& g, const RKTableau& tab,
                                       const CQGrid& grid, const PassOptions& opts = {}, PassInfo* info = nullptr,
                                       std::vector<NodeStat>* stats = nullptr)
{
    const int half = g.count() / 2;
    std::vector<NodeStat> local(static_cast<size_t>(half + 1) * tab.m);
    auto op = [&](int l, int j, cplx s, const Eigen::VectorXcd& r) -> Eigen::VectorXcd {
        auto t0 = std::chrono::steady_clock::now();
        auto solver = factory(s);
        Eigen::VectorXcd x = solver(r);
        NodeStat& st = local[static_cast<size_t>(l) * tab.m + j];
        st.node = l;
        st.stage = j;
        st.s = s;
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return x;
    };
    StageSignal out = frequency_pass(g, tab, grid, g.dim, op, opts, info);
    if (stats) *stats = std::move(local);
    return out;
}

struct WeightOptions {
    int oversample = 4;
    double cond_limit = 1e8;
};

// Weights of a block symbol K(s) (block_dim square) from an oversampled contour of length
// L_w = oversample*(N+1). The radius eps^(1/(L_w+N+1)) balances aliasing rho^{L_w} against the
// round-off amplification rho^{-N}; for L_w = N+1 it is the usual eps^(1/(2L)).
template <class K>
WeightSequence cq_weights(K&& k, int block_dim, const RKTableau& tab, double tau, int N,
                          const WeightOptions& opts = {})
{
    if (!(tau > 0) || N < 0) throw ConfigError("cq_weights: need tau > 0, N >= 0");
    const int m = tab.m;
    const int md = m * block_dim;
    const int Lw = std::max(2, opts.oversample * (N + 1));
    const int half = Lw / 2;
    double rho = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (Lw + N + 1));
    bool ok = false;
    std::vector<NodeDecomposition> nodes;
    for (int retry = 0;; ++retry) {
        nodes = detail::decompose_contour(tab, tau, rho, Lw, half, opts.cond_limit, ok);
        if (ok) break;
        if (retry >= 3) throw NumericalError("cq_weights: ill-conditioned contour");
        rho = std::pow(rho, 1.05);
    }
    Eigen::MatrixXcd data = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(md) * md, Lw);
    for (int l = 0; l <= half; ++l) {
        const auto& d = nodes[l];
        Eigen::MatrixXcd Kl = Eigen::MatrixXcd::Zero(md, md);
        for (int j = 0; j < m; ++j) {
            Eigen::MatrixXcd kj;
            try {
                kj = k(d.lambda(j));
            } catch (const std::exception& e) {
                throw NumericalError("cq_weights: symbol evaluation failed at node " + std::to_string(l) + ": " +
                                     e.what());
            }
            if (kj.rows() != block_dim || kj.cols() != block_dim)
                throw ConfigError("cq_weights: symbol returned wrong block size");
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b)
                    Kl.block(a * block_dim, b * block_dim, block_dim, block_dim) += d.Q(a, j) * d.Qinv(j, b) * kj;
        }
        data.col(l) = Eigen::Map<Eigen::VectorXcd>(Kl.data(), static_cast<Eigen::Index>(md) * md);
    }
    for (int l = half + 1; l < Lw; ++l) data.col(l) = data.col(Lw - l).conjugate();
    fft::transform_rows(data, -1);
    WeightSequence ws;
    ws.m = m;
    ws.block_dim = block_dim;
    ws.W.resize(N + 1);
    double scale = 1.0 / Lw;
    for (int n = 0; n <= N; ++n, scale /= rho) {
        Eigen::VectorXd col = (data.col(n) * scale).real();
        ws.W[n] = Eigen::Map<Eigen::MatrixXd>(col.data(), md, md);
    }
    return ws;
}

template <class K>
WeightSequence cq_weights_scalar(K&& k, const RKTableau& tab, double tau, int N, const WeightOptions& opts = {})
{
    return cq_weights([&](cplx s) { return Eigen::MatrixXcd::Constant(1, 1, k(s)); }, 1, tab, tau, N, opts);
}

// (K(d_t^tau) g)^n = sum_{j<=n} W_{n-j} g^j
inline StageSignal discrete_convolution(const WeightSequence& w, const StageSignal& g)
{
    if (w.m != g.m || w.block_dim != g.dim) throw ConfigError("discrete_convolution: dimension mismatch");
    if (static_cast<int>(w.W.size()) < g.count()) throw ConfigError("discrete_convolution: too few weights");
    StageSignal out(g.dim, g.m, g.count());
    for (int n = 0; n < g.count(); ++n) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.data.rows());
        for (int j = 0; j <= n; ++j) acc.noalias() += w.W[n - j] * g.data.col(j);
        out.data.col(n) = acc;
    }
    return out;
}

// Reference O(N^2) time-marching solve with the weights of A:
// phi^n = W_0^{-1} (g^n - sum_{j<n} W_{n-j} phi^j)
inline StageSignal solve_by_marching(const WeightSequence& wa, const StageSignal& g)
{
    if (wa.m != g.m || wa.block_dim != g.dim) throw ConfigError("solve_by_marching: dimension mismatch");
    if (static_cast<int>(wa.W.size()) < g.count()) throw ConfigError("solve_by_marching: too few weights");
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(wa.W[0]);
    StageSignal out(g.dim, g.m, g.count());
    for (int n = 0; n < g.count(); ++n) {
        Eigen::VectorXd r = g.data.col(n);
        for (int j = 0; j < n; ++j) r.noalias() -= wa.W[n - j] * out.data.col(j);
        out.data.col(n) = lu.solve(r);
    }
    return out;
}

} // namespace dcq
