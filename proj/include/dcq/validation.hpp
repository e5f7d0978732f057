#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "maxwell_ops.hpp"
#include "sphere_oracle.hpp"

// Comparisons of the discrete operators with the unit-sphere reference formulas.
namespace dcq::validation {

enum class Zonal { phi, psi };

inline const char* to_string(Zonal z) { return z == Zonal::phi ? "phi" : "psi"; }

inline Vec3c zonal_field(Zonal kind, int l, const Vec3& x)
{
    return (kind == Zonal::phi ? sphere::zonal_phi(l, x) : sphere::zonal_psi(l, x)).cast<cplx>();
}

inline TangentialField zonal_density(Zonal kind, int l)
{
    return [kind, l](const Vec3& x, int) { return zonal_field(kind, l, x); };
}

struct PotentialValues {
    Vec3c S, D;
};

// S(kappa) w and D(kappa) w at x off the unit sphere for w = Phi_l or Psi_l (zonal).
inline PotentialValues exact_potentials(Zonal kind, int l, cplx kappa, const Vec3& x)
{
    double r = x.norm();
    bool outside = r > 1;
    auto b1 = sphere::radial(l, kappa);
    auto bt = sphere::modified_bessel(l, kappa * r);
    cplx z = kappa * r;
    cplx f_i = bt.i[l], f_k = bt.k[l];
    cplx P_i = z * bt.i[l - 1] - double(l) * bt.i[l], P_k = -z * bt.k[l - 1] - double(l) * bt.k[l];
    Vec3 xh = x / r;
    Vec3c phi = sphere::zonal_phi(l, xh).cast<cplx>(), psi = sphere::zonal_psi(l, xh).cast<cplx>();
    double Y = std::legendre(l, xh.z());
    Vec3c rh = xh.cast<cplx>();
    double ll = double(l) * (l + 1);
    auto M = [&](cplx f) -> Vec3c { return -f * phi; };
    auto N = [&](cplx f, cplx P) -> Vec3c { return (P / z) * psi + (ll * f / z * Y) * rh; };
    if (kind == Zonal::phi) {
        // A = kappa rho(r) Phi, rho = k_l(kappa) i_l(kappa r) inside, i_l(kappa) k_l(kappa r) outside
        cplx c = outside ? b1.i : b1.k;
        cplx f = outside ? f_k : f_i, P = outside ? P_k : P_i;
        return {kappa * kappa * c * M(f), -kappa * kappa * c * N(f, P)};
    }
    cplx c = outside ? kappa * b1.Pi : kappa * b1.Pk;
    cplx f = outside ? f_k : f_i, P = outside ? P_k : P_i;
    return {c * N(f, P), c * M(f)};
}

// V w and K w on the unit sphere.
inline PotentialValues exact_boundary_action(Zonal kind, int l, cplx kappa, const Vec3& x)
{
    auto e = sphere::layer_eigenvalues(l, kappa);
    Vec3 xh = x.normalized();
    Vec3c phi = sphere::zonal_phi(l, xh).cast<cplx>(), psi = sphere::zonal_psi(l, xh).cast<cplx>();
    if (kind == Zonal::phi) return {e.v_phi * psi, e.k_phi * phi};
    return {e.v_psi * phi, -e.k_phi * psi};
}

// Load vector y_i = [phi_i, u] = int (phi_i x nu) . u over the mesh.
inline Eigen::VectorXcd tested_load(const RTSpace& sp, const TangentialField& u, int points = 7)
{
    const auto& m = *sp.mesh;
    auto rule = quad::dunavant(points);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(sp.ndof());
    for (int t = 0; t < m.nt(); ++t)
        for (size_t q = 0; q < rule.w.size(); ++q) {
            Vec3 x = sp.point(t, rule.p[q][0], rule.p[q][1]);
            auto f = sp.basis(t, x);
            Vec3c ux = u(x, t);
            double w = rule.w[q] * 2 * m.areas[t];
            for (int k = 0; k < 3; ++k) y[m.tri_edges[t][k]] += w * f[k].cross(m.normals[t]).cast<cplx>().dot(ux);
        }
    return y;
}

// ||M^-1 (a - b)||_M / ||M^-1 b||_M, the L2(Gamma) distance of the Riesz representers.
class DualNorm {
public:
    explicit DualNorm(const RTSpace& sp) : mass_(assemble_mass(sp))
    {
        chol_.compute(mass_);
        if (chol_.info() != Eigen::Success) throw NumericalError("mass matrix factorisation failed");
    }

    double norm(const Eigen::VectorXcd& y) const
    {
        Eigen::VectorXd re = chol_.solve(y.real()), im = chol_.solve(y.imag());
        return std::sqrt(std::max(0.0, y.real().dot(re) + y.imag().dot(im)));
    }

    double relative(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) const { return norm(a - b) / norm(b); }

private:
    SparseD mass_;
    Eigen::SimplicialLDLT<SparseD> chol_;
};

struct OperatorCheckRow {
    std::string op;
    Zonal kind;
    int l;
    double error;
};

struct OperatorCheck {
    int level = 0;
    int ndof = 0;
    std::vector<OperatorCheckRow> rows;

    double max_error() const
    {
        double e = 0;
        for (const auto& r : rows) e = std::max(e, r.error);
        return e;
    }
};

// Galerkin V(kappa), K(kappa) applied to interpolated zonal densities against the exact actions.
inline OperatorCheck sphere_operator_check(int level, cplx kappa, const std::vector<int>& degrees,
                                           const AssemblyOptions& opt = {})
{
    auto mesh = icosphere(level);
    RTSpace sp(mesh);
    auto lm = assemble_layer_matrices(sp, {kappa}, opt)[0];
    DualNorm dn(sp);
    OperatorCheck out;
    out.level = level;
    out.ndof = sp.ndof();
    for (int l : degrees)
        for (Zonal kind : {Zonal::phi, Zonal::psi}) {
            CVec c = rt_interpolate(sp, zonal_density(kind, l));
            auto yv = tested_load(sp, [&](const Vec3& x, int) { return exact_boundary_action(kind, l, kappa, x).S; });
            auto yk = tested_load(sp, [&](const Vec3& x, int) { return exact_boundary_action(kind, l, kappa, x).D; });
            out.rows.push_back({"V", kind, l, dn.relative(lm.V * c, yv)});
            out.rows.push_back({"K", kind, l, dn.relative(lm.K * c, yk)});
        }
    return out;
}

} // namespace dcq::validation
