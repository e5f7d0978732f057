#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "material_laws.hpp"
#include "quadrature.hpp"
#include "rt_space.hpp"

// Reference solutions on the unit sphere: modified spherical Bessel functions, vector spherical
// harmonics, Mie transmission coefficients, eigenvalues of V and K, and a scalar fractional
// integral reference.
namespace dcq::sphere {

// i_l(z) = sqrt(pi/(2z)) I_{l+1/2}(z), k_l(z) = sqrt(2/(pi z)) K_{l+1/2}(z); k_0 = e^{-z}/z.
struct BesselTable {
    std::vector<cplx> i, k; // degrees 0..lmax
};

// k by upward recurrence (dominant), i from continued-fraction ratios plus the Wronskian
// i_l k_{l+1} + i_{l+1} k_l = 1/z^2, so no normalisation against sinh is needed.
inline BesselTable modified_bessel(int lmax, cplx z)
{
    if (lmax < 0) throw ConfigError("modified_bessel: lmax must be >= 0");
    if (!(z.real() > 0)) throw DomainError("modified_bessel: Re z must be positive");
    BesselTable t;
    t.k.resize(lmax + 2);
    t.i.resize(lmax + 1);
    cplx e = std::exp(-z);
    t.k[0] = e / z;
    t.k[1] = e * (1.0 + z) / (z * z);
    for (int l = 1; l <= lmax; ++l) t.k[l + 1] = t.k[l - 1] + (2.0 * l + 1.0) / z * t.k[l];
    if (!std::isfinite(std::abs(t.k[lmax + 1]))) throw NumericalError("modified_bessel: k_l overflow");

    // r_l = i_l / i_{l-1}
    int start = lmax + 40 + static_cast<int>(2 * std::abs(z));
    std::vector<cplx> r(lmax + 2);
    cplx rr = 0;
    for (int l = start; l >= 1; --l) {
        rr = 1.0 / ((2.0 * l + 1.0) / z + rr);
        if (l <= lmax + 1) r[l] = rr;
    }
    for (int l = 0; l <= lmax; ++l) t.i[l] = 1.0 / (z * z * (t.k[l + 1] + r[l + 1] * t.k[l]));
    t.k.resize(lmax + 1);
    return t;
}

// f_l(z) together with d/dr (r f_l(z r)) at r = 1.
struct RadialValues {
    cplx i, k, Pi, Pk;
};

inline RadialValues radial(int l, cplx z)
{
    if (l < 1) throw ConfigError("radial: degree must be >= 1");
    auto t = modified_bessel(l, z);
    return {t.i[l], t.k[l], z * t.i[l - 1] - double(l) * t.i[l], -z * t.k[l - 1] - double(l) * t.k[l]};
}

// ---------------------------------------------------------------------------------------------
// Spherical harmonics (orthonormal, Condon-Shortley phase) and their surface gradients.

struct HarmonicTable {
    int lmax = 0;
    std::vector<cplx> Y, dtheta; // index l*l + l + m
    double theta = 0, phi = 0;

    static int idx(int l, int m) { return l * l + l + m; }
    cplx y(int l, int m) const { return Y[idx(l, m)]; }
};

inline HarmonicTable harmonics(int lmax, const Vec3& xhat)
{
    HarmonicTable h;
    h.lmax = lmax;
    double ct = std::clamp(xhat.z() / xhat.norm(), -1.0, 1.0);
    double th = std::acos(ct);
    // keep off the poles, where the tangential frame is undefined
    th = std::clamp(th, 1e-13, std::numbers::pi - 1e-13);
    ct = std::cos(th);
    double st = std::sin(th);
    double ph = std::atan2(xhat.y(), xhat.x());
    h.theta = th;
    h.phi = ph;
    const int n = (lmax + 2) * (lmax + 2);
    std::vector<double> P(n, 0.0); // normalised associated Legendre, m >= 0, index l*l+l+m
    auto id = HarmonicTable::idx;
    P[0] = std::sqrt(0.25 / std::numbers::pi);
    for (int m = 1; m <= lmax + 1; ++m) P[id(m, m)] = -std::sqrt((2.0 * m + 1) / (2.0 * m)) * st * P[id(m - 1, m - 1)];
    for (int m = 0; m <= lmax; ++m) {
        P[id(m + 1, m)] = std::sqrt(2.0 * m + 3) * ct * P[id(m, m)];
        for (int l = m + 2; l <= lmax + 1; ++l) {
            double a = std::sqrt((4.0 * l * l - 1) / (double(l) * l - double(m) * m));
            double b = std::sqrt(((l - 1.0) * (l - 1.0) - double(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1));
            P[id(l, m)] = a * (ct * P[id(l - 1, m)] - b * P[id(l - 2, m)]);
        }
    }
    h.Y.assign((lmax + 1) * (lmax + 1), 0.0);
    h.dtheta.assign((lmax + 1) * (lmax + 1), 0.0);
    const double cot = ct / st;
    for (int l = 0; l <= lmax; ++l)
        for (int m = 0; m <= l; ++m) {
            cplx e = std::polar(1.0, m * ph);
            cplx y = P[id(l, m)] * e;
            cplx y1 = m + 1 <= l ? P[id(l, m + 1)] * std::polar(1.0, (m + 1) * ph) : cplx(0);
            cplx dy = double(m) * cot * y + std::sqrt(double(l - m) * (l + m + 1)) * std::polar(1.0, -ph) * y1;
            h.Y[id(l, m)] = y;
            h.dtheta[id(l, m)] = dy;
            if (m > 0) {
                double sg = (m % 2) ? -1.0 : 1.0;
                h.Y[id(l, -m)] = sg * std::conj(y);
                h.dtheta[id(l, -m)] = sg * std::conj(dy);
            }
        }
    return h;
}

struct SphericalFrame {
    Vec3 rhat, that, phat;
};

inline SphericalFrame frame(double th, double ph)
{
    return {{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)},
            {std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th)},
            {-std::sin(ph), std::cos(ph), 0.0}};
}

// Psi = grad_Gamma Y, Phi = xhat x Psi.
inline void vsh(const HarmonicTable& h, int l, int m, const SphericalFrame& f, Vec3c& psi, Vec3c& phi)
{
    cplx dt = h.dtheta[HarmonicTable::idx(l, m)];
    cplx dp = cplx(0, m) * h.Y[HarmonicTable::idx(l, m)] / std::sin(h.theta);
    psi = dt * f.that.cast<cplx>() + dp * f.phat.cast<cplx>();
    phi = dt * f.phat.cast<cplx>() - dp * f.that.cast<cplx>();
}

// Zonal fields used for operator checks: Psi_l = grad_Gamma P_l(z), Phi_l = xhat x Psi_l.
inline double legendre_derivative(int l, double z)
{
    double p0 = 1, p1 = z, d0 = 0, d1 = 1;
    if (l == 0) return 0;
    for (int k = 1; k < l; ++k) {
        double p2 = ((2.0 * k + 1) * z * p1 - k * p0) / (k + 1);
        double d2 = d0 + (2.0 * k + 1) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    return d1;
}

inline Vec3 zonal_psi(int l, const Vec3& x)
{
    Vec3 xh = x.normalized();
    return legendre_derivative(l, xh.z()) * (Vec3::UnitZ() - xh.z() * xh);
}

inline Vec3 zonal_phi(int l, const Vec3& x) { return x.normalized().cross(zonal_psi(l, x)); }

// ---------------------------------------------------------------------------------------------
// Eigenvalues of the boundary operators on the unit sphere for wavenumber kappa:
//   V Phi_l = v_phi Psi_l,  V Psi_l = v_psi Phi_l,  K Phi_l = k_phi Phi_l,  K Psi_l = -k_phi Psi_l.
struct LayerEigen {
    cplx v_phi, v_psi, k_phi;
};

inline LayerEigen layer_eigenvalues(int l, cplx kappa)
{
    auto r = radial(l, kappa);
    return {-kappa * kappa * r.i * r.k, -r.Pi * r.Pk, 0.5 * kappa * (r.i * r.Pk + r.k * r.Pi)};
}

// ---------------------------------------------------------------------------------------------
// Mie transmission problem.

enum class Pol { TE = 0, TM = 1 };

struct MieCoefficient {
    cplx a; // scattered / incident
    cplx b; // interior / incident (TM: in units of the field scaled by the impedance)
};

inline MieCoefficient mie_coefficient(int l, cplx s, const MaterialPair& interior, const MaterialPair& exterior, Pol pol)
{
    cplx kin = wavenumber(interior, s), kout = wavenumber(exterior, s);
    cplx w_in = pol == Pol::TE ? eval_epsilon(interior.mu, s) : eval_epsilon(interior.epsilon, s);
    cplx w_out = pol == Pol::TE ? eval_epsilon(exterior.mu, s) : eval_epsilon(exterior.epsilon, s);
    auto ri = radial(l, kin), ro = radial(l, kout);
    cplx R = ri.Pi / (w_in * ri.i);
    cplx a = (ro.Pi / w_out - ro.i * R) / (ro.k * R - ro.Pk / w_out);
    cplx b = (ro.i + a * ro.k) / ri.i;
    if (!std::isfinite(std::abs(a)) || !std::isfinite(std::abs(b))) throw NumericalError("Mie coefficient overflow");
    return {a, b};
}

// Laplace-domain plane wave E = amplitude p e^{kappa d.x}, H = zeta^-1 (p x d) e^{kappa d.x}
// (travelling along -d, the frequency-domain image of p f(d.x + t - t0)).
struct PlaneWave {
    Vec3 p{-1 / std::numbers::sqrt2, 0, -1 / std::numbers::sqrt2};
    Vec3 d{-1 / std::numbers::sqrt2, 0, 1 / std::numbers::sqrt2};
    cplx amplitude = 1.0;
};

struct FieldPair {
    Vec3c E, H;
};

struct ModalSolution {
    cplx s;
    int lmax = 0;
    cplx kappa_in, kappa_out, zeta_in, zeta_out;
    std::vector<cplx> alpha, beta; // incident TE / TM coefficients, index l*l+l+m
    std::vector<std::array<MieCoefficient, 2>> coeff; // per l (TE, TM)
    std::vector<double> modal_norm; // per l: |a_l| times incident modal amplitude, both polarisations
    double tail = 0;                // modal_norm[lmax] / max_l modal_norm[l]

    // which: 0 incident, 1 scattered, 2 interior (r may be any positive radius)
    FieldPair field(const Vec3& x, int which) const
    {
        double r = x.norm();
        if (!(r > 0)) throw DomainError("modal field at the origin");
        Vec3 xh = x / r;
        auto h = harmonics(lmax, xh);
        auto fr = frame(h.theta, h.phi);
        cplx kap = which == 2 ? kappa_in : kappa_out;
        cplx zeta = which == 2 ? zeta_in : zeta_out;
        cplx z = kap * r;
        auto bt = modified_bessel(lmax, z);
        FieldPair out{Vec3c::Zero(), Vec3c::Zero()};
        for (int l = 1; l <= lmax; ++l) {
            cplx f = which == 1 ? bt.k[l] : bt.i[l];
            cplx P = which == 1 ? -z * bt.k[l - 1] - double(l) * bt.k[l] : z * bt.i[l - 1] - double(l) * bt.i[l];
            cplx ca = 1.0, cb = 1.0;
            if (which == 1) {
                ca = coeff[l][0].a;
                cb = coeff[l][1].a;
            } else if (which == 2) {
                ca = coeff[l][0].b;
                cb = coeff[l][1].b * zeta_in / zeta_out;
            }
            for (int m = -l; m <= l; ++m) {
                int id = HarmonicTable::idx(l, m);
                cplx al = ca * alpha[id], be = cb * beta[id];
                if (al == 0.0 && be == 0.0) continue;
                Vec3c psi, phi;
                vsh(h, l, m, fr, psi, phi);
                Vec3c M = -f * phi;
                Vec3c N = (P / z) * psi + (double(l) * (l + 1) * f / z * h.Y[id]) * fr.rhat.cast<cplx>();
                out.E += al * M + be * N;
                out.H += (be * M - al * N) / zeta;
            }
        }
        return out;
    }

    // Tangential traces u x nu on the unit sphere; E/H_ext are scattered fields.
    struct Traces {
        Vec3c E_ext, H_ext, E_int, H_int, E_inc, H_inc;
    };

    Traces traces(const Vec3& x) const
    {
        Vec3 xh = x.normalized();
        Vec3c nu = xh.cast<cplx>();
        auto inc = field(xh, 0), sc = field(xh, 1), in = field(xh, 2);
        return {cross(sc.E, nu), cross(sc.H, nu), cross(in.E, nu), cross(in.H, nu), cross(inc.E, nu), cross(inc.H, nu)};
    }
};

// Projects the plane wave onto TE/TM modes on the unit sphere and applies the Mie coefficients.
inline ModalSolution mie_solve(cplx s, const MaterialPair& interior, const MaterialPair& exterior, const PlaneWave& w,
                               int lmax)
{
    if (lmax < 1 || lmax > 60) throw ConfigError("mie: lmax must lie in [1, 60]");
    if (std::abs(w.p.dot(w.d)) > 1e-12 || std::abs(w.d.norm() - 1) > 1e-12)
        throw ConfigError("plane wave needs |d| = 1 and p.d = 0");
    ModalSolution sol;
    sol.s = s;
    sol.lmax = lmax;
    sol.kappa_in = wavenumber(interior, s);
    sol.kappa_out = wavenumber(exterior, s);
    sol.zeta_in = impedance_ratio(interior, s);
    sol.zeta_out = impedance_ratio(exterior, s);
    const cplx mu_out = eval_epsilon(exterior.mu, s);
    const cplx kap = sol.kappa_out;
    const Vec3 pxd = w.p.cross(w.d);

    // x.E and x.H on the unit sphere, projected on Y_lm by Gauss-Legendre x trapezoid
    const int nth = lmax + 40 + static_cast<int>(2 * std::abs(kap));
    const int nph = 2 * nth + 1;
    auto gl = quad::gauss_legendre(nth);
    const int nlm = (lmax + 1) * (lmax + 1);
    std::vector<cplx> xe(nlm, 0.0), xh(nlm, 0.0);
    for (int i = 0; i < nth; ++i) {
        double ct = 2 * gl.x[i] - 1, wt = 2 * gl.w[i];
        double th = std::acos(ct);
        // Fourier coefficients in phi
        std::vector<cplx> fe(2 * lmax + 1, 0.0), fh(2 * lmax + 1, 0.0);
        for (int j = 0; j < nph; ++j) {
            double ph = 2 * std::numbers::pi * j / nph;
            Vec3 x = frame(th, ph).rhat;
            cplx e = w.amplitude * std::exp(kap * w.d.dot(x));
            cplx re = x.dot(w.p) * e, rh = x.dot(pxd) * e / sol.zeta_out;
            for (int m = -lmax; m <= lmax; ++m) {
                cplx em = std::polar(2 * std::numbers::pi / nph, -m * ph);
                fe[m + lmax] += re * em;
                fh[m + lmax] += rh * em;
            }
        }
        auto h = harmonics(lmax, frame(th, 0.0).rhat);
        for (int l = 0; l <= lmax; ++l)
            for (int m = -l; m <= l; ++m) {
                double ylm = std::real(h.Y[HarmonicTable::idx(l, m)]); // phi = 0: real theta part
                xe[HarmonicTable::idx(l, m)] += wt * ylm * fe[m + lmax];
                xh[HarmonicTable::idx(l, m)] += wt * ylm * fh[m + lmax];
            }
    }
    auto bt = modified_bessel(lmax, kap);
    sol.alpha.assign(nlm, 0.0);
    sol.beta.assign(nlm, 0.0);
    sol.coeff.resize(lmax + 1);
    sol.modal_norm.assign(lmax + 1, 0.0);
    for (int l = 1; l <= lmax; ++l) {
        double ll = double(l) * (l + 1);
        sol.coeff[l] = {mie_coefficient(l, s, interior, exterior, Pol::TE),
                        mie_coefficient(l, s, interior, exterior, Pol::TM)};
        double na = 0, nb = 0;
        for (int m = -l; m <= l; ++m) {
            int id = HarmonicTable::idx(l, m);
            // x.curl E = -s mu x.H ; x.N = l(l+1) f / kappa
            sol.alpha[id] = -s * mu_out * xh[id] / (ll * bt.i[l]);
            sol.beta[id] = kap * xe[id] / (ll * bt.i[l]);
            na += std::norm(sol.alpha[id]);
            nb += std::norm(sol.beta[id]);
        }
        sol.modal_norm[l] = std::abs(sol.coeff[l][0].a) * std::sqrt(na) + std::abs(sol.coeff[l][1].a) * std::sqrt(nb);
    }
    double mx = *std::max_element(sol.modal_norm.begin(), sol.modal_norm.end());
    sol.tail = mx > 0 ? sol.modal_norm[lmax] / mx : 0.0;
    return sol;
}

// Exact boundary densities (phi+, psi+, phi-, psi-) = (gT H+, -gT E+, -gT H-, gT E-) at x.
inline std::array<Vec3c, 4> exact_densities(const ModalSolution& sol, const Vec3& x)
{
    auto t = sol.traces(x);
    return {t.H_ext, -t.E_ext, -t.H_int, t.E_int};
}

// Re int_Gamma (E x conj H) . nu for the interior field (unit sphere, tensor quadrature).
inline double interior_poynting_flux(const ModalSolution& sol, int n = 24)
{
    auto gl = quad::gauss_legendre(n);
    double acc = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 2 * n; ++j) {
            double th = std::acos(2 * gl.x[i] - 1), ph = std::numbers::pi * j / n;
            Vec3 x = frame(th, ph).rhat;
            auto f = sol.field(x, 2);
            acc += 2 * gl.w[i] * (std::numbers::pi / n) * cross(f.E, f.H.conjugate()).dot(x.cast<cplx>()).real();
        }
    return acc;
}

// -int_ball Re(conj(eps s)) |E|^2 + Re(mu s) |H|^2, which the flux above must equal.
inline double interior_dissipation(const ModalSolution& sol, const MaterialPair& interior, int n = 16)
{
    cplx es = eval_epsilon(interior.epsilon, sol.s) * sol.s, ms = eval_epsilon(interior.mu, sol.s) * sol.s;
    auto gl = quad::gauss_legendre(n);
    double acc = 0;
    for (int q = 0; q < n; ++q) {
        double r = gl.x[q];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 2 * n; ++j) {
                double th = std::acos(2 * gl.x[i] - 1), ph = std::numbers::pi * j / n;
                auto f = sol.field(r * frame(th, ph).rhat, 2);
                double w = gl.w[q] * r * r * 2 * gl.w[i] * (std::numbers::pi / n);
                acc += w * (es.real() * f.E.squaredNorm() + ms.real() * f.H.squaredNorm());
            }
    }
    return -acc;
}

// ---------------------------------------------------------------------------------------------
// Riemann-Liouville integral (I^alpha g)(t) = 1/Gamma(alpha) int_0^t (t-u)^{alpha-1} g(u) du.
inline std::vector<double> fractional_integral_oracle(const std::function<double(double)>& g, double alpha,
                                                      const std::vector<double>& ts)
{
    if (!(alpha > 0) || alpha > 1) throw ConfigError("fractional order must lie in (0, 1]");
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double ga = boost::math::tgamma(alpha);
    std::vector<double> out;
    out.reserve(ts.size());
    for (double t : ts) {
        if (t <= 0) {
            out.push_back(0.0);
            continue;
        }
        // substitute v = t - u so the weak singularity sits at v = 0
        auto f = [&](double v) { return v <= 0 ? (alpha == 1 ? g(t) : 0.0) : std::pow(v, alpha - 1) * g(t - v); };
        double r = integrator.integrate(f, 0.0, t);
        out.push_back(r / ga);
    }
    return out;
}

} // namespace dcq::sphere
