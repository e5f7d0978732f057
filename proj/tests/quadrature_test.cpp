#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Dense>

#include <dcq/quadrature.hpp>

using namespace dcq::quad;
using V3 = Eigen::Vector3d;

namespace {

double sum(const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 0.0); }

// int_{simplex} u^a v^b = a! b! / (a+b+2)!
double monomial_simplex(int a, int b) { return std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 3.0); }

struct Tri {
    V3 p0, p1, p2;
    V3 map(double x1, double x2) const { return p0 + x1 * (p1 - p0) + x2 * (p2 - p1); }
    double jac() const { return (p1 - p0).cross(p2 - p0).norm(); }
};

// Analytic potential of a flat triangle with unit density: int_T 1/|x-y| dy (Wilton et al. formula).
double triangle_potential(const Tri& t, const V3& x)
{
    V3 n = (t.p1 - t.p0).cross(t.p2 - t.p0).normalized();
    double w = (x - t.p0).dot(n);
    V3 rho = x - w * n;
    std::array<V3, 3> p{t.p0, t.p1, t.p2};
    double r = 0;
    for (int i = 0; i < 3; ++i) {
        V3 a = p[i], b = p[(i + 1) % 3];
        V3 tv = (b - a).normalized();
        V3 u = tv.cross(n); // outward in-plane normal for counter-clockwise vertices
        double lp = (b - rho).dot(tv), lm = (a - rho).dot(tv);
        double p0 = (a - rho).dot(u);
        double rp = (b - x).norm(), rm = (a - x).norm();
        double r0sq = p0 * p0 + w * w;
        if (std::abs(p0) > 1e-14) {
            double lg = std::log((rp + lp) / (rm + lm));
            r += p0 * lg;
            double aw = std::abs(w);
            r -= aw * (std::atan(p0 * lp / (r0sq + aw * rp)) - std::atan(p0 * lm / (r0sq + aw * rm)));
        }
    }
    return r;
}

// Reference for int_Tx int_Ty 1/|x-y|: outer high-order collapsed Gauss, inner analytic.
// The outer integrand has log-type edge singularities, so this is only good to about 1e-7.
double reference_pair(const Tri& tx, const Tri& ty)
{
    auto rule = collapsed_gauss(60);
    double r = 0, ax = 0.5 * tx.jac();
    for (size_t q = 0; q < rule.w.size(); ++q) {
        auto [u, v] = rule.p[q];
        V3 x = tx.p0 + u * (tx.p1 - tx.p0) + v * (tx.p2 - tx.p0);
        r += rule.w[q] * 2 * ax * triangle_potential(ty, x);
    }
    return r;
}

double ss_pair(SingularCase c, int n, const Tri& tx, const Tri& ty,
               const std::function<double(const V3&, const V3&)>& k)
{
    auto rule = sauter_schwab(c, n);
    double r = 0;
    for (size_t q = 0; q < rule.w.size(); ++q) {
        auto& p = rule.p[q];
        r += rule.w[q] * k(tx.map(p[0], p[1]), ty.map(p[2], p[3]));
    }
    return r * tx.jac() * ty.jac();
}

double tensor_pair(int n, const Tri& tx, const Tri& ty, const std::function<double(const V3&, const V3&)>& k)
{
    auto rule = collapsed_gauss(n);
    double r = 0;
    for (size_t i = 0; i < rule.w.size(); ++i)
        for (size_t j = 0; j < rule.w.size(); ++j) {
            auto [u, v] = rule.p[i];
            auto [s, t] = rule.p[j];
            V3 x = tx.p0 + u * (tx.p1 - tx.p0) + v * (tx.p2 - tx.p0);
            V3 y = ty.p0 + s * (ty.p1 - ty.p0) + t * (ty.p2 - ty.p0);
            r += rule.w[i] * rule.w[j] * k(x, y);
        }
    return r * tx.jac() * ty.jac();
}

const Tri kT{{0, 0, 0}, {1, 0, 0}, {0.3, 0.8, 0}};
const Tri kEdgeNb{{0, 0, 0}, {1, 0, 0}, {0.4, -0.5, 0.6}};
const Tri kVertexNb{{0, 0, 0}, {-0.7, 0.2, 0.1}, {-0.3, -0.9, -0.2}};

} // namespace

TEST(GaussLegendre, ExactForPolynomials)
{
    for (int n : {1, 2, 5, 10, 20}) {
        auto g = gauss_legendre(n);
        EXPECT_NEAR(sum(g.w), 1.0, 1e-15);
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += g.w[i] * std::pow(g.x[i], p);
            EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << "n=" << n << " p=" << p;
        }
    }
    EXPECT_THROW(gauss_legendre(0), dcq::ConfigError);
}

TEST(TriangleRules, Dunavant)
{
    const std::vector<std::pair<int, int>> deg{{1, 1}, {3, 2}, {6, 4}, {7, 5}};
    for (auto [npts, d] : deg) {
        auto r = dunavant(npts);
        ASSERT_EQ(r.w.size(), static_cast<size_t>(npts));
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b) {
                double s = 0;
                for (size_t q = 0; q < r.w.size(); ++q) s += r.w[q] * std::pow(r.p[q][0], a) * std::pow(r.p[q][1], b);
                EXPECT_NEAR(s, monomial_simplex(a, b), 1e-12) << npts << " points, u^" << a << " v^" << b;
            }
    }
    EXPECT_THROW(dunavant(4), dcq::ConfigError);
}

TEST(TriangleRules, CollapsedGauss)
{
    for (int n : {2, 4, 8}) {
        auto r = collapsed_gauss(n);
        int d = 2 * n - 2;
        for (int a = 0; a <= d; ++a)
            for (int b = 0; a + b <= d; ++b) {
                double s = 0;
                for (size_t q = 0; q < r.w.size(); ++q) s += r.w[q] * std::pow(r.p[q][0], a) * std::pow(r.p[q][1], b);
                EXPECT_NEAR(s, monomial_simplex(a, b), 1e-14);
            }
    }
}

TEST(SauterSchwab, ReferenceMeasure)
{
    for (auto c : {SingularCase::identical, SingularCase::common_edge, SingularCase::common_vertex})
        for (int n : {2, 3, 5}) {
            auto r = sauter_schwab(c, n);
            EXPECT_NEAR(sum(r.w), 0.25, 1e-14);
            for (auto& p : r.p) {
                ASSERT_LE(p[1], p[0] + 1e-15);
                ASSERT_LE(p[3], p[2] + 1e-15);
                ASSERT_GE(p[1], -1e-15);
                ASSERT_GE(p[3], -1e-15);
                ASSERT_LE(p[0], 1 + 1e-15);
                ASSERT_LE(p[2], 1 + 1e-15);
            }
        }
}

TEST(SauterSchwab, PolynomialKernelsMatchTensorRule)
{
    auto k = [](const V3& x, const V3& y) {
        return std::pow(x.x() + 2 * x.y() - y.z(), 2) * std::pow(y.x() - y.y(), 3) + x.x() * y.y() + 0.5;
    };
    struct Case {
        SingularCase c;
        Tri ty;
    };
    for (auto cs : {Case{SingularCase::identical, kT}, Case{SingularCase::common_edge, kEdgeNb},
                    Case{SingularCase::common_vertex, kVertexNb}}) {
        double ref = tensor_pair(6, kT, cs.ty, k);
        double ss = ss_pair(cs.c, 6, kT, cs.ty, k);
        EXPECT_NEAR(ss, ref, 1e-12 * std::abs(ref)) << static_cast<int>(cs.c);
    }
}

TEST(SauterSchwab, InverseDistanceAgainstAnalyticPotential)
{
    auto k = [](const V3& x, const V3& y) { return 1.0 / (x - y).norm(); };
    struct Case {
        SingularCase c;
        Tri ty;
    };
    for (auto cs : {Case{SingularCase::identical, kT}, Case{SingularCase::common_edge, kEdgeNb},
                    Case{SingularCase::common_vertex, kVertexNb}}) {
        double ref = reference_pair(kT, cs.ty);
        double e3 = std::abs(ss_pair(cs.c, 3, kT, cs.ty, k) - ref);
        double i10 = ss_pair(cs.c, 10, kT, cs.ty, k);
        double i12 = ss_pair(cs.c, 12, kT, cs.ty, k);
        EXPECT_LT(std::abs(i10 - ref), 1e-6 * std::abs(ref)) << static_cast<int>(cs.c);
        EXPECT_LT(std::abs(i10 - ref), e3);
        // self-convergence is much tighter than the reference
        EXPECT_LT(std::abs(i12 - i10), 1e-10 * std::abs(ref));
    }
}

TEST(SauterSchwab, CacheReturnsSameRule)
{
    const auto& a = cached_sauter_schwab(SingularCase::common_edge, 4);
    const auto& b = cached_sauter_schwab(SingularCase::common_edge, 4);
    EXPECT_EQ(&a, &b);
    EXPECT_EQ(a.w.size(), 5u * 256u);
}
