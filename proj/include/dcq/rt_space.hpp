#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "quadrature.hpp"
#include "surface_mesh.hpp"

namespace dcq {

using cplx = std::complex<double>;
using Vec3c = Eigen::Vector3cd;
using CVec = Eigen::VectorXcd;

// Bilinear cross product. Eigen's cross() conjugates the result for complex scalars.
inline Vec3c cross(const Vec3c& a, const Vec3c& b)
{
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Lowest-order Raviart-Thomas (RWG) space, one DOF per edge. On triangle t the function of its
// local edge k is sign * l_k / (2 A_t) * (x - v_k), v_k the opposite vertex; it carries unit flux
// out of the plus triangle through the edge.
struct RTSpace {
    const SurfaceMesh* mesh = nullptr;
    int order = 0;

    explicit RTSpace(const SurfaceMesh& m, int k = 0) : mesh(&m), order(k)
    {
        if (k != 0) throw ConfigError("only the lowest-order Raviart-Thomas space is available");
    }

    int ndof() const { return mesh->ne(); }

    // Three local basis values at x (x on the plane of t), with signs applied.
    std::array<Vec3, 3> basis(int t, const Vec3& x) const
    {
        std::array<Vec3, 3> f;
        const double a2 = 2.0 * mesh->areas[t];
        for (int k = 0; k < 3; ++k) {
            double l = mesh->edge_length(mesh->tri_edges[t][k]);
            f[k] = mesh->tri_signs[t][k] * l / a2 * (x - mesh->vertex(t, k));
        }
        return f;
    }

    std::array<double, 3> divergence(int t) const
    {
        std::array<double, 3> d;
        for (int k = 0; k < 3; ++k)
            d[k] = mesh->tri_signs[t][k] * mesh->edge_length(mesh->tri_edges[t][k]) / mesh->areas[t];
        return d;
    }

    Vec3 point(int t, double u, double v) const
    {
        Vec3 a = mesh->vertex(t, 0);
        return a + u * (mesh->vertex(t, 1) - a) + v * (mesh->vertex(t, 2) - a);
    }

    Vec3c evaluate(const CVec& c, int t, const Vec3& x) const
    {
        auto f = basis(t, x);
        Vec3c r = Vec3c::Zero();
        for (int k = 0; k < 3; ++k) r += c[mesh->tri_edges[t][k]] * f[k].cast<cplx>();
        return r;
    }

    cplx evaluate_div(const CVec& c, int t) const
    {
        auto d = divergence(t);
        cplx r = 0;
        for (int k = 0; k < 3; ++k) r += c[mesh->tri_edges[t][k]] * d[k];
        return r;
    }
};

using SparseD = Eigen::SparseMatrix<double>;

// B_ij = int (phi_i x nu) . phi_j ; exactly antisymmetric by construction.
inline SparseD assemble_pairing(const RTSpace& sp)
{
    const auto& m = *sp.mesh;
    auto rule = quad::dunavant(3);
    std::vector<Eigen::Triplet<double>> trip;
    for (int t = 0; t < m.nt(); ++t) {
        double loc[3][3] = {};
        for (size_t q = 0; q < rule.w.size(); ++q) {
            Vec3 x = sp.point(t, rule.p[q][0], rule.p[q][1]);
            auto f = sp.basis(t, x);
            double w = rule.w[q] * 2.0 * m.areas[t];
            for (int i = 0; i < 3; ++i)
                for (int j = i + 1; j < 3; ++j) loc[i][j] += w * f[i].cross(m.normals[t]).dot(f[j]);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                int gi = m.tri_edges[t][i], gj = m.tri_edges[t][j];
                trip.emplace_back(gi, gj, loc[i][j]);
                trip.emplace_back(gj, gi, -loc[i][j]);
            }
    }
    SparseD b(sp.ndof(), sp.ndof());
    b.setFromTriplets(trip.begin(), trip.end());
    return b;
}

// Gram matrix of the basis in L2(Gamma); with div_weight > 0 adds div_weight * int div phi_i div phi_j.
inline SparseD assemble_mass(const RTSpace& sp, double div_weight = 0.0)
{
    const auto& m = *sp.mesh;
    auto rule = quad::dunavant(3);
    std::vector<Eigen::Triplet<double>> trip;
    for (int t = 0; t < m.nt(); ++t) {
        auto d = sp.divergence(t);
        for (size_t q = 0; q < rule.w.size(); ++q) {
            Vec3 x = sp.point(t, rule.p[q][0], rule.p[q][1]);
            auto f = sp.basis(t, x);
            double w = rule.w[q] * 2.0 * m.areas[t];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    trip.emplace_back(m.tri_edges[t][i], m.tri_edges[t][j],
                                      w * (f[i].dot(f[j]) + div_weight * d[i] * d[j]));
        }
    }
    SparseD mm(sp.ndof(), sp.ndof());
    mm.setFromTriplets(trip.begin(), trip.end());
    return mm;
}

// Tangential field evaluated at a point of a given triangle.
using TangentialField = std::function<Vec3c(const Vec3& x, int tri)>;

// Edge-moment interpolant: coefficient = mean flux of the field through the edge, averaged over the
// two adjacent triangles (the field may be discontinuous across edges on a polyhedral surface).
inline CVec rt_interpolate(const RTSpace& sp, const TangentialField& field, int gauss_points = 4)
{
    const auto& m = *sp.mesh;
    auto g = quad::gauss_legendre(gauss_points);
    CVec c(sp.ndof());
    for (int e = 0; e < m.ne(); ++e) {
        const auto& ed = m.edges[e];
        Vec3 a = m.vertices[ed.v0], b = m.vertices[ed.v1];
        cplx acc = 0;
        for (int side = 0; side < 2; ++side) {
            int t = ed.tri[side];
            // outward in-plane normal of the edge as seen from t
            Vec3 nout = (b - a).cross(m.normals[t]).normalized();
            if (nout.dot(a - m.vertex(t, ed.local[side])) < 0) nout = -nout;
            double sgn = side == 0 ? 1.0 : -1.0;
            for (size_t q = 0; q < g.x.size(); ++q) {
                Vec3 x = a + g.x[q] * (b - a);
                acc += 0.5 * sgn * g.w[q] * nout.cast<cplx>().dot(field(x, t));
            }
        }
        c[e] = acc;
    }
    return c;
}

// Discrete L2(Gamma) norm of an RT function.
inline double l2_norm(const RTSpace& sp, const CVec& c, const SparseD& mass)
{
    return std::sqrt(std::max(0.0, c.dot(mass * c).real()));
}

// || u_h - u ||_{L2(Gamma)} against a field given per triangle point.
inline double l2_error(const RTSpace& sp, const CVec& c, const TangentialField& field, int dunavant_points = 7)
{
    const auto& m = *sp.mesh;
    auto rule = quad::dunavant(dunavant_points);
    double acc = 0;
    for (int t = 0; t < m.nt(); ++t)
        for (size_t q = 0; q < rule.w.size(); ++q) {
            Vec3 x = sp.point(t, rule.p[q][0], rule.p[q][1]);
            acc += rule.w[q] * 2.0 * m.areas[t] * (sp.evaluate(c, t, x) - field(x, t)).squaredNorm();
        }
    return std::sqrt(acc);
}

} // namespace dcq
