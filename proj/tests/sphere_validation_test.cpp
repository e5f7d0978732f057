#include <gtest/gtest.h>

#include <dcq/scattering.hpp>
#include <dcq/validation.hpp>

using namespace dcq;
using namespace dcq::validation;

namespace {

struct MieSetup {
    SurfaceMesh mesh;
    RTSpace sp;
    sphere::ModalSolution sol;
    explicit MieSetup(int level, cplx s)
        : mesh(icosphere(level)), sp(mesh), sol(sphere::mie_solve(s, fractional_interior(), MaterialPair::vacuum(),
                                                                    sphere::PlaneWave{}, 20))
    {
    }

    // (-b_E/2, -b_H/2, b_E/2, b_H/2) with b_i = int phi_i . u_inc
    Eigen::VectorXcd rhs() const
    {
        auto be = tested_load(sp, [&](const Vec3& x, int) { return sol.traces(x).E_inc; });
        auto bh = tested_load(sp, [&](const Vec3& x, int) { return sol.traces(x).H_inc; });
        const int n = sp.ndof();
        Eigen::VectorXcd b(4 * n);
        b << -0.5 * be, -0.5 * bh, 0.5 * be, 0.5 * bh;
        return b;
    }

    Eigen::VectorXcd interpolated_densities() const
    {
        const int n = sp.ndof();
        Eigen::VectorXcd x(4 * n);
        for (int k = 0; k < 4; ++k)
            x.segment(k * n, n) = rt_interpolate(sp, [&](const Vec3& y, int) { return exact_densities(sol, y)[k]; });
        return x;
    }
};

} // namespace

TEST(SphereOperators, GalerkinActionsImproveUnderRefinement)
{
    auto c1 = sphere_operator_check(1, 1.0, {1, 2});
    auto c2 = sphere_operator_check(2, 1.0, {1, 2});
    ASSERT_EQ(c1.rows.size(), c2.rows.size());
    for (size_t i = 0; i < c1.rows.size(); ++i) {
        const auto& r = c2.rows[i];
        EXPECT_LT(r.error, c1.rows[i].error) << r.op << " " << to_string(r.kind) << " l=" << r.l;
        if (r.op == "V") EXPECT_LT(r.error, 0.05) << to_string(r.kind) << " l=" << r.l;
    }
}

TEST(SphereOperators, PotentialsOfZonalDensities)
{
    // errors relative to max(|S w|, |D w|) at the target; RT0 interpolation on the flat mesh gives O(h^2)
    const cplx kappa = 1.0;
    std::vector<Vec3> pts{Vec3(2, 0, 0), Vec3(0, 1.2, 1.6), Vec3(0.3, 0.2, 0.3), Vec3(0, 0, -0.5)};
    std::vector<std::vector<double>> err;
    for (int level : {2, 3}) {
        auto mesh = icosphere(level);
        RTSpace sp(mesh);
        auto pm = potential_matrices(sp, pts, kappa);
        std::vector<double> e(pts.size(), 0.0);
        for (int l : {1, 2})
            for (Zonal kind : {Zonal::phi, Zonal::psi}) {
                CVec c = rt_interpolate(sp, zonal_density(kind, l));
                Eigen::VectorXcd S = pm.S * c, D = pm.D * c;
                for (size_t i = 0; i < pts.size(); ++i) {
                    auto ex = exact_potentials(kind, l, kappa, pts[i]);
                    double scale = std::max(ex.S.norm(), ex.D.norm());
                    e[i] = std::max({e[i], (S.segment<3>(3 * i) - ex.S).norm() / scale,
                                     (D.segment<3>(3 * i) - ex.D).norm() / scale});
                }
            }
        err.push_back(e);
    }
    for (size_t i = 0; i < pts.size(); ++i) {
        EXPECT_GT(err[0][i] / err[1][i], 3.0) << "pt " << i;
        EXPECT_LT(err[1][i], 0.02) << "pt " << i;
        if (pts[i].norm() < 1) EXPECT_LT(err[0][i], 0.02) << "pt " << i;
    }
}

TEST(SphereScattering, ExactDensitiesSatisfyTheDiscreteSystem)
{
    const cplx s = 1.0;
    std::vector<double> res;
    for (int level : {0, 1, 2}) {
        MieSetup m(level, s);
        SparseD B = assemble_pairing(m.sp);
        auto fs = assemble_A(s, fractional_interior(), MaterialPair::vacuum(), m.sp, B);
        Eigen::VectorXcd b = m.rhs(), r = fs.apply(m.interpolated_densities()) - b;
        DualNorm dn(m.sp);
        const int n = m.sp.ndof();
        double num = 0, den = 0;
        for (int k = 0; k < 4; ++k) {
            num += std::pow(dn.norm(r.segment(k * n, n)), 2);
            den += std::pow(dn.norm(b.segment(k * n, n)), 2);
        }
        res.push_back(std::sqrt(num / den));
    }
    EXPECT_LT(res[1], res[0]);
    EXPECT_LT(res[2], res[1]);
    EXPECT_LT(res[2], 0.05);
}

TEST(SphereScattering, SolvedDensitiesAndFieldsApproachMie)
{
    const cplx s(1.0, 0.5);
    std::vector<Vec3> pts{Vec3(-std::numbers::sqrt2, 0, std::numbers::sqrt2), Vec3(0, 2, 0), Vec3(0.2, 0.1, -0.3)};
    std::vector<double> dens, field;
    for (int level : {1, 2}) {
        MieSetup m(level, s);
        auto in = fractional_interior();
        auto ex = MaterialPair::vacuum();
        SparseD B = assemble_pairing(m.sp);
        auto fs = assemble_A(s, in, ex, m.sp, B);
        Eigen::VectorXcd x = solve_frequency(fs, m.rhs());
        const int n = m.sp.ndof();
        double num = 0, den = 0;
        for (int k = 0; k < 4; ++k) {
            auto f = [&](const Vec3& y, int) { return exact_densities(m.sol, y)[k]; };
            num += std::pow(l2_error(m.sp, x.segment(k * n, n), f), 2);
            den += std::pow(l2_error(m.sp, CVec::Zero(n), f), 2);
        }
        dens.push_back(std::sqrt(num / den));

        auto ts = make_target_set(m.mesh, pts);
        auto pots = dcq::detail::side_potentials(m.sp, ts, s, in, ex, {});
        Eigen::VectorXcd u = dcq::detail::represent(pots, ts, s, in, ex, x, n);
        double e = 0;
        for (size_t i = 0; i < pts.size(); ++i) {
            auto ref = m.sol.field(pts[i], ts.side[i] == Side::exterior ? 1 : 2);
            double sc = ref.E.norm() + ref.H.norm();
            e = std::max(e, ((u.segment<3>(6 * i) - ref.E).norm() + (u.segment<3>(6 * i + 3) - ref.H).norm()) / sc);
        }
        field.push_back(e);
    }
    EXPECT_LT(dens[1], dens[0]);
    EXPECT_LT(field[1], field[0]);
    EXPECT_LT(field[1], 0.05);
}
