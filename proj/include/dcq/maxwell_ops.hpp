#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "errors.hpp"
#include "linalg.hpp"
#include "material_laws.hpp"
#include "quadrature.hpp"
#include "rt_space.hpp"

namespace dcq {

inline constexpr double kInv4Pi = 0.25 / std::numbers::pi;

// e^{-kappa |x|} / (4 pi |x|)
inline cplx helmholtz_kernel(cplx kappa, const Vec3& x)
{
    double r = x.norm();
    if (!(r > 0)) throw DomainError("helmholtz_kernel: singular point x = 0");
    return std::exp(-kappa * r) * (kInv4Pi / r);
}

struct AssemblyOptions {
    int singular_order = 4;  // Gauss points per direction in the Sauter-Schwab rules
    int near_order = 4;      // collapsed Gauss order for close, non-touching pairs
    double near_ratio = 1.5; // centroid distance / max diameter below which the near rule is used
    double mid_ratio = 4.0;  // below: 6-point Dunavant, above: 3-point
    double cutoff = 40.0;    // pairs with Re(kappa) * gap above this are dropped
    bool use_symmetry = true;

    void validate() const
    {
        if (singular_order < 2) throw ConfigError("quadrature.singular_order must be >= 2");
        if (near_order < 2) throw ConfigError("quadrature.near_order must be >= 2");
        if (!(near_ratio > 0) || !(mid_ratio >= near_ratio)) throw ConfigError("quadrature ratios must satisfy 0 < near <= mid");
        if (!(cutoff > 0)) throw ConfigError("quadrature.cutoff must be positive");
    }
};

// Galerkin matrices for one wavenumber:
//   V_ij = [phi_i, V phi_j] = -kappa int int G phi_i.phi_j - kappa^-1 int int G div phi_i div phi_j
//   K_ij = [phi_i, K phi_j] = int int grad_x G(x-y) . (phi_j(y) x phi_i(x))
// Both are complex symmetric.
struct LayerMatrices {
    cplx kappa;
    CMat V, K;
};

namespace detail {

struct TriPoints {
    std::vector<Vec3> x;
    std::vector<double> w;                 // includes the area element
    std::vector<std::array<Vec3, 3>> f;    // basis values
};

inline TriPoints tri_points(const RTSpace& sp, int t, const quad::TriangleRule& r)
{
    TriPoints p;
    const double a2 = 2.0 * sp.mesh->areas[t];
    for (size_t q = 0; q < r.w.size(); ++q) {
        Vec3 x = sp.point(t, r.p[q][0], r.p[q][1]);
        p.x.push_back(x);
        p.w.push_back(r.w[q] * a2);
        p.f.push_back(sp.basis(t, x));
    }
    return p;
}

struct LocalBlock {
    cplx g[3][3]{}; // int int G f_a . f_b
    cplx s{};       // int int G
    cplx k[3][3]{}; // int int grad G . (f_b x f_a)
};

inline void accumulate(LocalBlock& lb, cplx kappa, const Vec3& x, const Vec3& y, const std::array<Vec3, 3>& fx,
                       const std::array<Vec3, 3>& fy, double w, bool with_k)
{
    Vec3 d = x - y;
    double r = d.norm();
    cplx e = std::exp(-kappa * r) * (kInv4Pi / r);
    cplx ge = w * e;
    lb.s += ge;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) lb.g[a][b] += ge * fx[a].dot(fy[b]);
    if (with_k) {
        // grad_x G = -(1 + kappa r) G / r^2 (x - y)
        cplx gk = -ge * (1.0 + kappa * r) / (r * r);
        for (int b = 0; b < 3; ++b) {
            Vec3 c = d.cross(fy[b]); // d . (f_b x f_a) = f_a . (d x f_b)
            for (int a = 0; a < 3; ++a) lb.k[a][b] += gk * fx[a].dot(c);
        }
    }
}

inline int shared_vertices(const SurfaceMesh& m, int a, int b, std::array<int, 3>& pa, std::array<int, 3>& pb)
{
    // returns the number of shared vertices and orders both triangles with the shared ones first
    int n = 0;
    std::array<bool, 3> usedA{}, usedB{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (m.triangles[a][i] == m.triangles[b][j]) {
                pa[n] = i;
                pb[n] = j;
                usedA[i] = usedB[j] = true;
                ++n;
            }
    int ka = n, kb = n;
    for (int i = 0; i < 3; ++i) {
        if (!usedA[i]) pa[ka++] = i;
        if (!usedB[i]) pb[kb++] = i;
    }
    return n;
}

inline double gap_estimate(const SurfaceMesh& m, int a, int b)
{
    double d = (m.centroid(a) - m.centroid(b)).norm();
    return d - 0.5 * (m.diameter(a) + m.diameter(b));
}

} // namespace detail

// Assembles V and K for several wavenumbers at once (geometry shared).
inline std::vector<LayerMatrices> assemble_layer_matrices(const RTSpace& sp, const std::vector<cplx>& kappas,
                                                          const AssemblyOptions& opt = {}, bool with_k = true)
{
    opt.validate();
    const auto& m = *sp.mesh;
    const int n = sp.ndof();
    const int nk = static_cast<int>(kappas.size());
    for (cplx k : kappas)
        if (!(k.real() > 0)) throw NumericalError("assembly needs Re kappa > 0 (material audit failed)");

    const auto r3 = quad::dunavant(3), r6 = quad::dunavant(6), rn = quad::collapsed_gauss(opt.near_order);
    std::vector<detail::TriPoints> p3(m.nt()), p6(m.nt()), pn(m.nt());
    for (int t = 0; t < m.nt(); ++t) {
        p3[t] = detail::tri_points(sp, t, r3);
        p6[t] = detail::tri_points(sp, t, r6);
        pn[t] = detail::tri_points(sp, t, rn);
    }
    const auto& ss_id = quad::cached_sauter_schwab(quad::SingularCase::identical, opt.singular_order);
    const auto& ss_e = quad::cached_sauter_schwab(quad::SingularCase::common_edge, opt.singular_order);
    const auto& ss_v = quad::cached_sauter_schwab(quad::SingularCase::common_vertex, opt.singular_order);
    double min_re = kappas.empty() ? 0 : kappas[0].real();
    for (cplx k : kappas) min_re = std::min(min_re, k.real());

    std::vector<CMat> uv(nk, CMat::Zero(n, n)), uk(nk, CMat::Zero(n, n));

    auto pair_block = [&](int tx, int ty, int kidx, detail::LocalBlock& lb) {
        const cplx kappa = kappas[kidx];
        std::array<int, 3> ox{}, oy{};
        int ns = detail::shared_vertices(m, tx, ty, ox, oy);
        if (ns > 0) {
            if (ns == 3) {
                // identical: use the triangle's own ordering for both
                ox = {0, 1, 2};
                oy = ox;
            }
            const quad::PairRule& rule = ns == 3 ? ss_id : (ns == 2 ? ss_e : ss_v);
            Vec3 X0 = m.vertex(tx, ox[0]), X1 = m.vertex(tx, ox[1]), X2 = m.vertex(tx, ox[2]);
            Vec3 Y0 = m.vertex(ty, oy[0]), Y1 = m.vertex(ty, oy[1]), Y2 = m.vertex(ty, oy[2]);
            double jac = 4.0 * m.areas[tx] * m.areas[ty];
            for (size_t q = 0; q < rule.w.size(); ++q) {
                const auto& p = rule.p[q];
                Vec3 x = X0 + p[0] * (X1 - X0) + p[1] * (X2 - X1);
                Vec3 y = Y0 + p[2] * (Y1 - Y0) + p[3] * (Y2 - Y1);
                // flat identical panels: (x - y), f_a, f_b coplanar, so the K integrand vanishes
                detail::accumulate(lb, kappa, x, y, sp.basis(tx, x), sp.basis(ty, y), rule.w[q] * jac,
                                   with_k && ns != 3);
            }
            return;
        }
        double hmax = std::max(m.diameter(tx), m.diameter(ty));
        double ratio = (m.centroid(tx) - m.centroid(ty)).norm() / hmax;
        const detail::TriPoints* a;
        const detail::TriPoints* b;
        if (ratio < opt.near_ratio) {
            a = &pn[tx];
            b = &pn[ty];
        } else if (ratio < opt.mid_ratio) {
            a = &p6[tx];
            b = &p6[ty];
        } else {
            a = &p3[tx];
            b = &p3[ty];
        }
        for (size_t i = 0; i < a->x.size(); ++i)
            for (size_t j = 0; j < b->x.size(); ++j)
                detail::accumulate(lb, kappa, a->x[i], b->x[j], a->f[i], b->f[j], a->w[i] * b->w[j], with_k);
    };

    auto scatter = [&](int tx, int ty, int kidx, const detail::LocalBlock& lb, double factor) {
        const cplx kappa = kappas[kidx];
        auto dx = sp.divergence(tx), dy = sp.divergence(ty);
        for (int a = 0; a < 3; ++a) {
            int i = m.tri_edges[tx][a];
            for (int b = 0; b < 3; ++b) {
                int j = m.tri_edges[ty][b];
                uv[kidx](i, j) += factor * (-kappa * lb.g[a][b] - lb.s * dx[a] * dy[b] / kappa);
                uk[kidx](i, j) += factor * lb.k[a][b];
            }
        }
    };

    if (opt.use_symmetry) {
        auto colors = color_triangles(m);
        for (const auto& cls : colors) {
            const int nc = static_cast<int>(cls.size());
#pragma omp parallel for schedule(dynamic, 4)
            for (int ci = 0; ci < nc; ++ci) {
                const int tx = cls[ci];
                for (int ty = tx; ty < m.nt(); ++ty) {
                    if (ty != tx && min_re * detail::gap_estimate(m, tx, ty) > opt.cutoff) continue;
                    for (int kidx = 0; kidx < nk; ++kidx) {
                        detail::LocalBlock lb;
                        pair_block(tx, ty, kidx, lb);
                        scatter(tx, ty, kidx, lb, ty == tx ? 0.5 : 1.0);
                    }
                }
            }
        }
        std::vector<LayerMatrices> out(nk);
        for (int k = 0; k < nk; ++k) {
            out[k].kappa = kappas[k];
            out[k].V = uv[k] + uv[k].transpose();
            out[k].K = with_k ? CMat(uk[k] + uk[k].transpose()) : CMat();
        }
        return out;
    }
    // all ordered pairs; used to check the symmetry of the discrete forms
#pragma omp parallel for schedule(dynamic, 4)
    for (int tx = 0; tx < m.nt(); ++tx)
        for (int ty = 0; ty < m.nt(); ++ty) {
            if (ty != tx && min_re * detail::gap_estimate(m, tx, ty) > opt.cutoff) continue;
            for (int kidx = 0; kidx < nk; ++kidx) {
                detail::LocalBlock lb;
                pair_block(tx, ty, kidx, lb);
#pragma omp critical(dcq_scatter)
                scatter(tx, ty, kidx, lb, 1.0);
            }
        }
    std::vector<LayerMatrices> out(nk);
    for (int k = 0; k < nk; ++k) {
        out[k].kappa = kappas[k];
        out[k].V = uv[k];
        out[k].K = with_k ? uk[k] : CMat();
    }
    return out;
}

inline CMat assemble_V(cplx s, const MaterialPair& pair, const RTSpace& sp, const AssemblyOptions& opt = {})
{
    return assemble_layer_matrices(sp, {wavenumber(pair, s)}, opt, false)[0].V;
}

inline CMat assemble_K(cplx s, const MaterialPair& pair, const RTSpace& sp, const AssemblyOptions& opt = {})
{
    return assemble_layer_matrices(sp, {wavenumber(pair, s)}, opt, true)[0].K;
}

// Calderon blocks [[-zeta V, K], [-K, -V/zeta]], zeta = sqrt(mu)/sqrt(eps).
struct CalderonBlocks {
    cplx s, kappa, zeta;
    CMat V, K;

    int n() const { return static_cast<int>(V.rows()); }

    CMat dense() const
    {
        const int d = n();
        CMat c(2 * d, 2 * d);
        c.topLeftCorner(d, d) = -zeta * V;
        c.topRightCorner(d, d) = K;
        c.bottomLeftCorner(d, d) = -K;
        c.bottomRightCorner(d, d) = -V / zeta;
        return c;
    }
};

inline CalderonBlocks make_calderon(cplx s, const MaterialPair& pair, const LayerMatrices& lm)
{
    return {s, lm.kappa, impedance_ratio(pair, s), lm.V, lm.K};
}

inline CalderonBlocks assemble_calderon(cplx s, const MaterialPair& pair, const RTSpace& sp,
                                        const AssemblyOptions& opt = {})
{
    auto lm = assemble_layer_matrices(sp, {wavenumber(pair, s)}, opt, true);
    return make_calderon(s, pair, lm[0]);
}

// A(s) = [[C_ext, J], [-J, C_int]] with J = 1/2 [[0, -Id], [Id, 0]] tested through the pairing.
// Unknown layout: [phi+, psi+, phi-, psi-], each of length ndof.
struct FrequencyOperatorSet {
    cplx s;
    CalderonBlocks ext, in;
    SparseD B;

    int ndof() const { return ext.n(); }

    CMat dense() const
    {
        const int d = ndof();
        CMat a = CMat::Zero(4 * d, 4 * d);
        a.topLeftCorner(2 * d, 2 * d) = ext.dense();
        a.bottomRightCorner(2 * d, 2 * d) = in.dense();
        Eigen::MatrixXd hb = 0.5 * Eigen::MatrixXd(B);
        a.block(0, 3 * d, d, d) = -hb.cast<cplx>();
        a.block(d, 2 * d, d, d) = hb.cast<cplx>();
        a.block(2 * d, d, d, d) = hb.cast<cplx>();
        a.block(3 * d, 0, d, d) = -hb.cast<cplx>();
        return a;
    }

    // the coupling part only, for the skew-cancellation check
    CMat coupling() const
    {
        const int d = ndof();
        CMat a = CMat::Zero(4 * d, 4 * d);
        Eigen::MatrixXd hb = 0.5 * Eigen::MatrixXd(B);
        a.block(0, 3 * d, d, d) = -hb.cast<cplx>();
        a.block(d, 2 * d, d, d) = hb.cast<cplx>();
        a.block(2 * d, d, d, d) = hb.cast<cplx>();
        a.block(3 * d, 0, d, d) = -hb.cast<cplx>();
        return a;
    }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const
    {
        const int d = ndof();
        Eigen::VectorXcd y(4 * d);
        auto p1 = x.segment(0, d), q1 = x.segment(d, d), p2 = x.segment(2 * d, d), q2 = x.segment(3 * d, d);
        Eigen::VectorXcd bp1 = (B * p1.real()).cast<cplx>() + cplx(0, 1) * (B * p1.imag()).cast<cplx>();
        Eigen::VectorXcd bq1 = (B * q1.real()).cast<cplx>() + cplx(0, 1) * (B * q1.imag()).cast<cplx>();
        Eigen::VectorXcd bp2 = (B * p2.real()).cast<cplx>() + cplx(0, 1) * (B * p2.imag()).cast<cplx>();
        Eigen::VectorXcd bq2 = (B * q2.real()).cast<cplx>() + cplx(0, 1) * (B * q2.imag()).cast<cplx>();
        y.segment(0, d) = -ext.zeta * (ext.V * p1) + ext.K * q1 - 0.5 * bq2;
        y.segment(d, d) = -(ext.K * p1) - (ext.V * q1) / ext.zeta + 0.5 * bp2;
        y.segment(2 * d, d) = -in.zeta * (in.V * p2) + in.K * q2 + 0.5 * bq1;
        y.segment(3 * d, d) = -(in.K * p2) - (in.V * q2) / in.zeta - 0.5 * bp1;
        return y;
    }
};

inline FrequencyOperatorSet assemble_A(cplx s, const MaterialPair& interior, const MaterialPair& exterior,
                                       const RTSpace& sp, const SparseD& pairing, const AssemblyOptions& opt = {})
{
    cplx ke = wavenumber(exterior, s), ki = wavenumber(interior, s);
    std::vector<LayerMatrices> lm;
    if (ke == ki) {
        lm = assemble_layer_matrices(sp, {ke}, opt, true);
        lm.push_back(lm[0]);
    } else {
        lm = assemble_layer_matrices(sp, {ke, ki}, opt, true);
    }
    return {s, make_calderon(s, exterior, lm[0]), make_calderon(s, interior, lm[1]), pairing};
}

// Smallest eigenvalue of (M + M^H)/2.
inline double min_hermitian_eigenvalue(const CMat& mm)
{
    CMat h = 0.5 * (mm + mm.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Cheap positive-definiteness certificate: Cholesky of the Hermitian part succeeds.
inline bool hermitian_part_positive(const CMat& mm)
{
    CMat h = 0.5 * (mm + mm.adjoint());
    Eigen::LLT<CMat> llt(h);
    return llt.info() == Eigen::Success;
}

enum class CoercivityCheck { off, sample, full };

struct SolveOptions {
    std::string method = "auto"; // auto | lu | gmres
    int lu_max_dim = 8000;       // auto switches to GMRES above this size; at 8000 A and its LU take 2 GB
    double gmres_tol = 1e-10;
    int gmres_max_iter = 2000;
    int gmres_restart = 200;
    CoercivityCheck coercivity = CoercivityCheck::sample;
    int coercivity_samples = 4;
};

struct FrequencySolveInfo {
    std::string method;
    int iterations = 0;
    double residual = 0;
    double min_rayleigh = 0; // min Re(x^H A x)/|x|^2 over the checked vectors
};

// Solves A(s) x = b and runs the online coercivity assertion.
inline Eigen::VectorXcd solve_frequency(const FrequencyOperatorSet& fs, const Eigen::VectorXcd& b,
                                        const SolveOptions& so = {}, FrequencySolveInfo* info = nullptr)
{
    CMat a = fs.dense();
    const int n = static_cast<int>(a.rows());
    FrequencySolveInfo fi;
    Eigen::VectorXcd x;
    std::string method = so.method;
    if (method == "auto") method = n <= so.lu_max_dim ? "lu" : "gmres";
    if (method == "lu") {
        DenseLU lu(a);
        x = lu.solve(b);
        fi.method = std::string("lu/") + DenseLU::backend();
    } else if (method == "gmres") {
        IterativeInfo ii;
        x = gmres_solve(a, b, so.gmres_tol, so.gmres_max_iter, so.gmres_restart, &ii);
        fi.method = "gmres";
        fi.iterations = ii.iterations;
    } else {
        throw ConfigError("unknown solver method '" + so.method + "'");
    }
    double bn = b.norm();
    fi.residual = bn > 0 ? (a * x - b).norm() / bn : (a * x).norm();
    if (so.coercivity == CoercivityCheck::full) {
        fi.min_rayleigh = min_hermitian_eigenvalue(a);
        if (!(fi.min_rayleigh > 0))
            throw NumericalError("coercivity violated: Hermitian part of A(s) not positive definite");
    } else if (so.coercivity == CoercivityCheck::sample) {
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> nd;
        double mr = 1e300;
        auto rq = [&](const Eigen::VectorXcd& v) {
            double nv = v.squaredNorm();
            if (nv > 0) mr = std::min(mr, (v.dot(a * v)).real() / nv);
        };
        rq(x);
        for (int k = 0; k < so.coercivity_samples; ++k) {
            Eigen::VectorXcd v(n);
            for (auto& c : v) c = cplx(nd(rng), nd(rng));
            rq(v);
        }
        fi.min_rayleigh = mr;
        if (!(mr > 0)) throw NumericalError("coercivity violated: Re(x^H A(s) x) <= 0 for a checked vector");
    }
    if (info) *info = fi;
    return x;
}

// ---------------------------------------------------------------------------------------------
// Potentials

struct PotentialOptions {
    double near_ratio = 1.0; // subdivide while diameter > near_ratio * distance
    int max_depth = 12;
    int leaf_points = 7;
    double cutoff = 40.0;
    double warn_fraction = 0.25; // warn when distance < warn_fraction * local diameter
};

struct PotentialTarget {
    std::vector<Vec3> points;
    std::vector<Side> sides;
    std::vector<double> distance; // to Gamma
};

inline double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    // closest point by region tests (Ericson, Real-Time Collision Detection 5.1.5)
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return ap.norm();
    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return bp.norm();
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + d1 / (d1 - d3) * ab)).norm();
    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return cp.norm();
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + d2 / (d2 - d6) * ac)).norm();
    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return (p - (b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b))).norm();
    double den = 1.0 / (va + vb + vc);
    return (p - (a + ab * (vb * den) + ac * (vc * den))).norm();
}

inline double distance_to_mesh(const SurfaceMesh& m, const Vec3& p, int* closest = nullptr)
{
    double best = 1e300;
    for (int t = 0; t < m.nt(); ++t) {
        double d = point_triangle_distance(p, m.vertex(t, 0), m.vertex(t, 1), m.vertex(t, 2));
        if (d < best) {
            best = d;
            if (closest) *closest = t;
        }
    }
    return best;
}

// Generalized winding number of a closed outward surface; ~1 inside, ~0 outside.
inline double winding_number(const SurfaceMesh& m, const Vec3& p)
{
    double w = 0;
    for (int t = 0; t < m.nt(); ++t) {
        Vec3 a = m.vertex(t, 0) - p, b = m.vertex(t, 1) - p, c = m.vertex(t, 2) - p;
        double la = a.norm(), lb = b.norm(), lc = c.norm();
        double num = a.dot(b.cross(c));
        double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        w += 2.0 * std::atan2(num, den);
    }
    return w / (4.0 * std::numbers::pi);
}

inline PotentialTarget make_targets(const SurfaceMesh& m, const std::vector<Vec3>& pts)
{
    PotentialTarget t;
    for (const auto& p : pts) {
        double d = distance_to_mesh(m, p);
        if (!(d > 0)) throw ConfigError("potential target lies on the surface");
        t.points.push_back(p);
        t.distance.push_back(d);
        t.sides.push_back(winding_number(m, p) > 0.5 ? Side::interior : Side::exterior);
    }
    return t;
}

// Matrices mapping RT coefficients to field values at targets (3 rows per target):
//   S: S(kappa) phi(x) = -kappa int G phi + kappa^-1 grad int G div phi
//   D: D(kappa) psi(x) = curl int G psi = int grad_x G x psi
struct PotentialMatrices {
    cplx kappa;
    CMat S, D;
    int near_warnings = 0;
};

namespace detail {

inline void potential_leaf(const RTSpace& sp, int t, const Vec3& x, cplx kappa, const Vec3& a, const Vec3& b,
                           const Vec3& c, const quad::TriangleRule& rule, std::array<Vec3c, 3>& gf, Vec3c& grad,
                           std::array<Vec3c, 3>& gc)
{
    double jac = (b - a).cross(c - a).norm();
    for (size_t q = 0; q < rule.w.size(); ++q) {
        Vec3 y = a + rule.p[q][0] * (b - a) + rule.p[q][1] * (c - a);
        Vec3 d = x - y;
        double r = d.norm();
        cplx gv = rule.w[q] * jac * std::exp(-kappa * r) * (kInv4Pi / r);
        cplx gk = -gv * (1.0 + kappa * r) / (r * r);
        Vec3c gradv = gk * d.cast<cplx>();
        grad += gradv;
        auto f = sp.basis(t, y);
        for (int k = 0; k < 3; ++k) {
            gf[k] += gv * f[k].cast<cplx>();
            gc[k] += gk * d.cross(f[k]).cast<cplx>();
        }
    }
}

inline void potential_adaptive(const RTSpace& sp, int t, const Vec3& x, cplx kappa, const Vec3& a, const Vec3& b,
                               const Vec3& c, const quad::TriangleRule& rule, const PotentialOptions& o, int depth,
                               std::array<Vec3c, 3>& gf, Vec3c& grad, std::array<Vec3c, 3>& gc)
{
    double diam = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    double dist = point_triangle_distance(x, a, b, c);
    if (depth >= o.max_depth || diam <= o.near_ratio * dist) {
        potential_leaf(sp, t, x, kappa, a, b, c, rule, gf, grad, gc);
        return;
    }
    Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    potential_adaptive(sp, t, x, kappa, a, ab, ca, rule, o, depth + 1, gf, grad, gc);
    potential_adaptive(sp, t, x, kappa, ab, b, bc, rule, o, depth + 1, gf, grad, gc);
    potential_adaptive(sp, t, x, kappa, ca, bc, c, rule, o, depth + 1, gf, grad, gc);
    potential_adaptive(sp, t, x, kappa, ab, bc, ca, rule, o, depth + 1, gf, grad, gc);
}

} // namespace detail

inline PotentialMatrices potential_matrices(const RTSpace& sp, const std::vector<Vec3>& targets, cplx kappa,
                                            const PotentialOptions& o = {})
{
    if (!(kappa.real() > 0)) throw NumericalError("potential evaluation needs Re kappa > 0");
    const auto& m = *sp.mesh;
    const int nt = static_cast<int>(targets.size());
    PotentialMatrices pm;
    pm.kappa = kappa;
    pm.S = CMat::Zero(3 * nt, sp.ndof());
    pm.D = CMat::Zero(3 * nt, sp.ndof());
    const auto rule = quad::dunavant(o.leaf_points);
    int warnings = 0;
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : warnings)
    for (int i = 0; i < nt; ++i) {
        const Vec3& x = targets[i];
        for (int t = 0; t < m.nt(); ++t) {
            Vec3 a = m.vertex(t, 0), b = m.vertex(t, 1), c = m.vertex(t, 2);
            double dist = point_triangle_distance(x, a, b, c);
            if (kappa.real() * dist > o.cutoff) continue;
            if (dist < o.warn_fraction * m.diameter(t)) ++warnings;
            std::array<Vec3c, 3> gf{Vec3c::Zero(), Vec3c::Zero(), Vec3c::Zero()}, gc = gf;
            Vec3c grad = Vec3c::Zero();
            detail::potential_adaptive(sp, t, x, kappa, a, b, c, rule, o, 0, gf, grad, gc);
            auto dv = sp.divergence(t);
            for (int k = 0; k < 3; ++k) {
                int e = m.tri_edges[t][k];
                pm.S.block(3 * i, e, 3, 1) += -kappa * gf[k] + (dv[k] / kappa) * grad;
                pm.D.block(3 * i, e, 3, 1) += gc[k];
            }
        }
    }
    pm.near_warnings = warnings;
    return pm;
}

inline Eigen::VectorXcd eval_single_layer(cplx s, const MaterialPair& pair, const RTSpace& sp,
                                          const Eigen::VectorXcd& density, const std::vector<Vec3>& targets,
                                          const PotentialOptions& o = {})
{
    return potential_matrices(sp, targets, wavenumber(pair, s), o).S * density;
}

inline Eigen::VectorXcd eval_double_layer(cplx s, const MaterialPair& pair, const RTSpace& sp,
                                          const Eigen::VectorXcd& density, const std::vector<Vec3>& targets,
                                          const PotentialOptions& o = {})
{
    return potential_matrices(sp, targets, wavenumber(pair, s), o).D * density;
}

// Binary triplet dump (int64 row, int64 col, double re, double im per nonzero) plus a CSV header.
inline void dump_matrix(const std::string& path, const CMat& a, const std::string& label)
{
    std::ofstream bin(path + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("cannot write " + path + ".bin");
    std::int64_t nnz = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (a(i, j) == cplx(0)) continue;
            std::int64_t ij[2] = {i, j};
            double v[2] = {a(i, j).real(), a(i, j).imag()};
            bin.write(reinterpret_cast<const char*>(ij), sizeof ij);
            bin.write(reinterpret_cast<const char*>(v), sizeof v);
            ++nnz;
        }
    std::ofstream csv(path + ".csv");
    csv << "label,rows,cols,nnz,record,file\n"
        << label << ',' << a.rows() << ',' << a.cols() << ',' << nnz << ",i64 i64 f64 f64," << path << ".bin\n";
}

} // namespace dcq
