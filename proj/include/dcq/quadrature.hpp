#pragma once

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace dcq::quad {

struct Rule1D {
    std::vector<double> x, w; // on [0,1]
};

// Gauss-Legendre on [0,1] by Newton iteration on P_n.
inline Rule1D gauss_legendre(int n)
{
    if (n < 1) throw ConfigError("Gauss-Legendre rule needs at least one point");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    auto legendre = [n](double z, double& p, double& dp) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        p = p1;
        dp = n * (z * p1 - p0) / (z * z - 1);
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double p = 0, dp = 1;
        for (int it = 0; it < 100; ++it) {
            legendre(z, p, dp);
            double dz = p / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        legendre(z, p, dp);
        double w = 2.0 / ((1 - z * z) * dp * dp);
        r.x[i] = 0.5 * (1 - z);
        r.x[n - 1 - i] = 0.5 * (1 + z);
        r.w[i] = r.w[n - 1 - i] = 0.5 * w;
    }
    return r;
}

// Points (u,v) on the unit simplex {u,v >= 0, u+v <= 1}; weights sum to 1/2.
struct TriangleRule {
    std::vector<std::array<double, 2>> p;
    std::vector<double> w;
};

inline TriangleRule dunavant(int npts)
{
    TriangleRule r;
    auto sym3 = [&](double a, double w) {
        double b = 1 - 2 * a;
        r.p.push_back({a, a});
        r.p.push_back({b, a});
        r.p.push_back({a, b});
        for (int i = 0; i < 3; ++i) r.w.push_back(0.5 * w);
    };
    switch (npts) {
    case 1:
        r.p.push_back({1.0 / 3, 1.0 / 3});
        r.w.push_back(0.5);
        break;
    case 3:
        sym3(1.0 / 6, 1.0 / 3);
        break;
    case 6:
        sym3(0.445948490915965, 0.223381589678011);
        sym3(0.091576213509771, 0.109951743655322);
        break;
    case 7:
        r.p.push_back({1.0 / 3, 1.0 / 3});
        r.w.push_back(0.5 * 0.225);
        sym3(0.470142064105115, 0.132394152788506);
        sym3(0.101286507323456, 0.125939180544827);
        break;
    default:
        throw ConfigError("Dunavant rule available with 1, 3, 6 or 7 points");
    }
    return r;
}

// n x n Gauss points collapsed onto the simplex (Duffy); exact to degree 2n-2.
inline TriangleRule collapsed_gauss(int n)
{
    Rule1D g = gauss_legendre(n);
    TriangleRule r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double u = g.x[i];
            r.p.push_back({u * (1 - g.x[j]), u * g.x[j]});
            r.w.push_back(g.w[i] * g.w[j] * u);
        }
    return r;
}

// Sauter-Schwab rules on the reference triangle {0 <= x2 <= x1 <= 1} (area 1/2). Each point holds
// (x1, x2, y1, y2); the shared entities sit at the front of the vertex lists as described in
// SingularCase. Mapped by chi(x) = P0 + x1 (P1 - P0) + x2 (P2 - P1), Jacobian 2*area.
struct PairRule {
    std::vector<std::array<double, 4>> p;
    std::vector<double> w;
};

enum class SingularCase { identical, common_edge, common_vertex };

inline PairRule sauter_schwab(SingularCase c, int n)
{
    if (n < 1) throw ConfigError("singular quadrature order must be >= 1");
    Rule1D g = gauss_legendre(n);
    PairRule r;
    auto add = [&](double w, double a, double b, double cc, double d) {
        r.p.push_back({a, b, cc, d});
        r.w.push_back(w);
    };
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int i3 = 0; i3 < n; ++i3) {
                    const double xi = g.x[i0], e1 = g.x[i1], e2 = g.x[i2], e3 = g.x[i3];
                    const double w = g.w[i0] * g.w[i1] * g.w[i2] * g.w[i3];
                    const double x3 = xi * xi * xi;
                    if (c == SingularCase::identical) {
                        const double wt = w * x3 * e1 * e1 * e2;
                        double a1 = xi, a2 = xi * (1 - e1 + e1 * e2);
                        double b1 = xi * (1 - e1 * e2 * e3), b2 = xi * (1 - e1);
                        add(wt, a1, a2, b1, b2);
                        add(wt, b1, b2, a1, a2);
                        a1 = xi, a2 = xi * e1 * (1 - e2 + e2 * e3);
                        b1 = xi * (1 - e1 * e2), b2 = xi * e1 * (1 - e2);
                        add(wt, a1, a2, b1, b2);
                        add(wt, b1, b2, a1, a2);
                        a1 = xi * (1 - e1 * e2 * e3), a2 = xi * e1 * (1 - e2 * e3);
                        b1 = xi, b2 = xi * e1 * (1 - e2);
                        add(wt, a1, a2, b1, b2);
                        add(wt, b1, b2, a1, a2);
                    } else if (c == SingularCase::common_edge) {
                        const double w1 = w * x3 * e1 * e1;
                        const double w2 = w1 * e2;
                        add(w1, xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2));
                        add(w2, xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3));
                        add(w2, xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3);
                        add(w2, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1);
                        add(w2, xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2);
                    } else {
                        const double wt = w * x3 * e2;
                        add(wt, xi, xi * e1, xi * e2, xi * e2 * e3);
                        add(wt, xi * e2, xi * e2 * e3, xi, xi * e1);
                    }
                }
    return r;
}

// Process-wide cache; rules are immutable once built.
inline const PairRule& cached_sauter_schwab(SingularCase c, int n)
{
    static std::mutex mu;
    static std::map<std::pair<int, int>, PairRule> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto key = std::make_pair(static_cast<int>(c), n);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, sauter_schwab(c, n)).first;
    return it->second;
}

} // namespace dcq::quad
