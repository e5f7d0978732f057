#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include <dcq/maxwell_ops.hpp>

using namespace dcq;

namespace {

const double kPi = std::numbers::pi;

MaterialPair vac() { return MaterialPair::vacuum(); }

double rel(const CMat& a, const CMat& b) { return (a - b).norm() / b.norm(); }

Eigen::VectorXcd random_coeffs(int n, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd v(n);
    for (auto& c : v) c = cplx(nd(rng), nd(rng));
    return v;
}

// mean relative tangential jump error at face centroids, offset delta along the normal
struct JumpErrors {
    double single_layer, double_layer;
};

JumpErrors jump_errors(int level, double delta_over_h)
{
    auto m = icosphere(level);
    RTSpace sp(m);
    auto c = random_coeffs(sp.ndof(), 7);
    std::vector<int> faces;
    for (int t = 0; t < m.nt(); t += std::max(1, m.nt() / 12)) faces.push_back(t);
    std::vector<Vec3> pts;
    for (int t : faces) {
        double d = delta_over_h * m.diameter(t);
        pts.push_back(m.centroid(t) + d * m.normals[t]);
        pts.push_back(m.centroid(t) - d * m.normals[t]);
    }
    PotentialOptions po;
    po.max_depth = 16;
    auto pm = potential_matrices(sp, pts, cplx(1.0), po);
    Eigen::VectorXcd s = pm.S * c, d = pm.D * c;
    double es = 0, ed = 0, ref = 0;
    for (size_t k = 0; k < faces.size(); ++k) {
        int t = faces[k];
        Vec3c nu = m.normals[t].cast<cplx>();
        Vec3c phi = sp.evaluate(c, t, m.centroid(t));
        Vec3c js = dcq::cross(s.segment<3>(6 * k) - s.segment<3>(6 * k + 3), nu);
        Vec3c jd = dcq::cross(d.segment<3>(6 * k) - d.segment<3>(6 * k + 3), nu);
        es += js.norm();
        ed += (jd + phi).norm();
        ref += phi.norm();
    }
    return {es / ref, ed / ref};
}

} // namespace

TEST(Kernel, ClosedFormValues)
{
    Vec3 x(0, 0, 1);
    EXPECT_NEAR(std::abs(helmholtz_kernel(0.0, x) - 1 / (4 * kPi)), 0, 1e-15);
    EXPECT_NEAR(std::abs(helmholtz_kernel(1.0, x) - std::exp(-1.0) / (4 * kPi)), 0, 1e-15);
    EXPECT_NEAR(std::abs(helmholtz_kernel(cplx(1, kPi), x) + std::exp(-1.0) / (4 * kPi)), 0, 1e-15);
    EXPECT_NEAR(helmholtz_kernel(1.0, x).real(), 0.0292749, 1e-7);
}

TEST(Kernel, ConjugateSymmetryAndSingularPoint)
{
    Vec3 x(0.3, -0.2, 0.7);
    for (cplx s : {cplx(1, 2), cplx(0.5, -3), cplx(2, 0.1)})
        EXPECT_NEAR(std::abs(helmholtz_kernel(std::conj(s), x) - std::conj(helmholtz_kernel(s, x))), 0, 1e-16);
    EXPECT_THROW(helmholtz_kernel(1.0, Vec3::Zero()), DomainError);
}

TEST(Potentials, ZeroDensityGivesZeroField)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(sp.ndof());
    std::vector<Vec3> pts{{0, 0, 2}, {0.1, 0.2, 0.1}};
    EXPECT_EQ(eval_single_layer(1.0, vac(), sp, z, pts).norm(), 0.0);
    EXPECT_EQ(eval_double_layer(1.0, vac(), sp, z, pts).norm(), 0.0);
}

TEST(Potentials, FarFieldDecay)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto c = random_coeffs(sp.ndof(), 3);
    Vec3 dir = Vec3(1, 2, 2).normalized();
    std::vector<Vec3> pts{5.0 * dir, 10.0 * dir, 1000.0 * dir};
    auto s = eval_single_layer(1.0, vac(), sp, c, pts);
    auto d = eval_double_layer(1.0, vac(), sp, c, pts);
    for (const auto& u : {s, d}) {
        double r = u.segment<3>(3).norm() / u.segment<3>(0).norm();
        // e^{-5} with algebraic factors between (4/9)^2 and 6/4
        EXPECT_GT(r, std::exp(-5.0) * 0.15);
        EXPECT_LT(r, std::exp(-5.0) * 1.6);
        EXPECT_LE(u.segment<3>(6).norm(), std::exp(-999.0) * c.norm());
    }
}

TEST(Potentials, JumpRelationsUnderRefinement)
{
    auto coarse = jump_errors(1, 0.02);
    auto fine = jump_errors(2, 0.005);
    EXPECT_LT(fine.single_layer, coarse.single_layer);
    EXPECT_LT(fine.double_layer, coarse.double_layer);
    EXPECT_LT(fine.double_layer, 0.05);
    EXPECT_LT(fine.single_layer, 0.05);
}

TEST(Potentials, TargetsClassifiedBySide)
{
    auto m = icosphere(2);
    auto tg = make_targets(m, {{0, 0, 0.5}, {0, 0, 1.5}});
    EXPECT_EQ(tg.sides[0], Side::interior);
    EXPECT_EQ(tg.sides[1], Side::exterior);
    EXPECT_GT(tg.distance[0], 0.4);
    EXPECT_THROW(make_targets(m, {m.vertices[0]}), ConfigError);
}

TEST(Assembly, SymmetricStructureAtRealFrequency)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    AssemblyOptions full;
    full.use_symmetry = false;
    auto lm = assemble_layer_matrices(sp, {cplx(1.0)}, full)[0];
    EXPECT_LT(rel(lm.V.transpose(), lm.V), 1e-6);
    auto sym = assemble_layer_matrices(sp, {cplx(1.0)})[0];
    EXPECT_LT(rel(sym.V, lm.V), 1e-6);
    // K has a stronger kernel; its asymmetry is pure quadrature error and drops with the order
    double k4 = rel(lm.K.transpose(), lm.K);
    EXPECT_LT(k4, 1e-4);
    full.singular_order = 6;
    auto l6 = assemble_layer_matrices(sp, {cplx(1.0)}, full)[0];
    EXPECT_LT(rel(l6.K.transpose(), l6.K), 1e-6);
    EXPECT_LT(rel(l6.K.transpose(), l6.K), 0.1 * k4);
}

TEST(Assembly, QuadratureSelfConvergence)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    AssemblyOptions q4, q6;
    q6.singular_order = 6;
    q6.near_order = 6;
    auto a = assemble_layer_matrices(sp, {cplx(1.0)}, q4)[0];
    auto b = assemble_layer_matrices(sp, {cplx(1.0)}, q6)[0];
    EXPECT_LT(rel(a.V, b.V), 1e-4);
    EXPECT_LT(rel(a.K, b.K), 1e-4);
    AssemblyOptions bad;
    bad.singular_order = 1;
    EXPECT_THROW(assemble_layer_matrices(sp, {cplx(1.0)}, bad), ConfigError);
}

TEST(Assembly, MultiWavenumberMatchesSingle)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto two = assemble_layer_matrices(sp, {cplx(1.0), cplx(1, 2)});
    auto one = assemble_layer_matrices(sp, {cplx(1, 2)});
    EXPECT_LT(rel(two[1].V, one[0].V), 1e-14);
    EXPECT_LT(rel(two[1].K, one[0].K), 1e-14);
    EXPECT_THROW(assemble_layer_matrices(sp, {cplx(-1.0)}), NumericalError);
}

TEST(Calderon, PositiveTypeAndBlockPattern)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto c = assemble_calderon(1.0, vac(), sp);
    EXPECT_GT(min_hermitian_eigenvalue(c.dense()), 0.0);
    for (cplx s : {cplx(1, 2), cplx(1, -2)}) {
        auto ci = assemble_calderon(s, fractional_interior(), sp);
        EXPECT_GT(min_hermitian_eigenvalue(ci.dense()), 0.0) << s;
    }
    CMat d = c.dense();
    const int n = c.n();
    EXPECT_EQ((d.topRightCorner(n, n) + d.bottomLeftCorner(n, n)).norm(), 0.0);
}

TEST(CoupledOperator, SkewCouplingCancels)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto fs = assemble_A(1.0, fractional_interior(), vac(), sp, assemble_pairing(sp));
    CMat j = fs.coupling();
    std::mt19937 rng(1);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd x(j.rows());
        for (auto& v : x) v = nd(rng);
        Eigen::VectorXcd xc = x.cast<cplx>();
        EXPECT_LT(std::abs(xc.dot(j * xc).real()), 1e-12 * x.squaredNorm());
    }
    auto z = random_coeffs(static_cast<int>(j.rows()), 2);
    EXPECT_LT(std::abs(z.dot(j * z).real()), 1e-12 * z.squaredNorm());
}

TEST(CoupledOperator, CoercivityAtSampleFrequencies)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto b = assemble_pairing(sp);
    for (cplx s : {cplx(1), cplx(1, 2), cplx(1, -2), cplx(3)}) {
        auto fs = assemble_A(s, fractional_interior(), vac(), sp, b);
        EXPECT_GT(min_hermitian_eigenvalue(fs.dense()), 0.0) << s;
    }
}

TEST(CoupledOperator, ApplyMatchesDense)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto fs = assemble_A(cplx(1, 1), fractional_interior(), vac(), sp, assemble_pairing(sp));
    auto x = random_coeffs(4 * sp.ndof(), 5);
    EXPECT_LT((fs.apply(x) - fs.dense() * x).norm(), 1e-12 * (fs.dense() * x).norm());
}

TEST(CoupledOperator, TwoSolverPathsAgree)
{
    auto m = icosphere(1);
    RTSpace sp(m);
    auto fs = assemble_A(1.0, vac(), vac(), sp, assemble_pairing(sp));
    auto x = random_coeffs(4 * sp.ndof(), 9);
    Eigen::VectorXcd rhs = fs.dense() * x;
    SolveOptions lu;
    lu.method = "lu";
    FrequencySolveInfo info;
    auto x1 = solve_frequency(fs, rhs, lu, &info);
    EXPECT_GT(info.min_rayleigh, 0.0);
    Eigen::VectorXcd x2 = fs.dense().fullPivLu().solve(rhs);
    EXPECT_LT((x1 - x2).norm() / x2.norm(), 1e-10);
    EXPECT_LT((x1 - x).norm() / x.norm(), 1e-10);
    SolveOptions gm;
    gm.method = "gmres";
    gm.gmres_tol = 1e-13;
    auto x3 = solve_frequency(fs, rhs, gm, &info);
    EXPECT_LT((x3 - x).norm() / x.norm(), 1e-10);
    EXPECT_GT(info.iterations, 0);
    gm.method = "cholesky";
    EXPECT_THROW(solve_frequency(fs, rhs, gm), ConfigError);
}

TEST(CoupledOperator, MatrixDump)
{
    CMat a = CMat::Zero(3, 3);
    a(0, 1) = cplx(1, 2);
    a(2, 2) = 3;
    std::string base = testing::TempDir() + "dcq_dump";
    dump_matrix(base, a, "A");
    std::ifstream csv(base + ".csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    EXPECT_EQ(row.rfind("A,3,3,2,", 0), 0u) << row;
    std::ifstream bin(base + ".bin", std::ios::binary | std::ios::ate);
    EXPECT_EQ(static_cast<int>(bin.tellg()), 2 * 32);
}
