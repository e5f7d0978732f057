#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace dcq {

using cplx = std::complex<double>;

enum class LawKind { vacuum, debye, shifted_heaviside, drude, lorentz, fractional, rational_custom };

inline const char* to_string(LawKind k)
{
    switch (k) {
    case LawKind::vacuum: return "vacuum";
    case LawKind::debye: return "debye";
    case LawKind::shifted_heaviside: return "shifted_heaviside";
    case LawKind::drude: return "drude";
    case LawKind::lorentz: return "lorentz";
    case LawKind::fractional: return "fractional";
    case LawKind::rational_custom: return "rational_custom";
    }
    return "?";
}

inline LawKind law_kind_from_string(const std::string& s)
{
    for (LawKind k : {LawKind::vacuum, LawKind::debye, LawKind::shifted_heaviside, LawKind::drude,
                      LawKind::lorentz, LawKind::fractional, LawKind::rational_custom})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown material kind '" + s + "'");
}

// Laplace-domain law eps(s) = base * (1 + chi(s)). The same type is used for mu.
struct MaterialSymbol {
    LawKind kind = LawKind::vacuum;
    double base = 1.0;

    std::vector<std::pair<double, double>> debye_terms; // (beta, lambda)
    double alpha1 = 0, alpha2 = 0, t_star = 0;
    double omega_d = 0, gamma_d = 0;
    double beta_l = 0, alpha_l = 0, omega_l = 0;
    double beta = 0, gamma = 0, eta = 0;
    std::vector<double> numerator, denominator; // ascending powers of s

    // true when the parameters fall in the range where strong passivity is known
    bool passive_by_theory = true;

    static MaterialSymbol vacuum(double base = 1.0)
    {
        check_base(base);
        MaterialSymbol m;
        m.base = base;
        return m;
    }

    static MaterialSymbol debye(double beta, double lambda, double base = 1.0)
    {
        return debye_sum({{beta, lambda}}, base);
    }

    static MaterialSymbol debye_sum(std::vector<std::pair<double, double>> terms, double base = 1.0)
    {
        check_base(base);
        if (terms.empty()) throw ConfigError("debye: at least one term required");
        for (auto [b, l] : terms)
            if (!(b > 0) || !(l > 0)) throw ConfigError("debye: beta and lambda must be positive");
        MaterialSymbol m;
        m.kind = LawKind::debye;
        m.base = base;
        m.debye_terms = std::move(terms);
        return m;
    }

    // alpha2 > alpha1 is accepted only with allow_nonpassive; the margin is then audited, not assumed.
    static MaterialSymbol shifted_heaviside(double a1, double a2, double ts, double base = 1.0,
                                            bool allow_nonpassive = false)
    {
        check_base(base);
        if (!(a1 > 0) || !(a2 > 0) || !(ts > 0))
            throw ConfigError("shifted_heaviside: alpha1, alpha2, t_star must be positive");
        if (a2 > a1 && !allow_nonpassive)
            throw ConfigError("shifted_heaviside: alpha2 > alpha1 is outside the passive range");
        MaterialSymbol m;
        m.kind = LawKind::shifted_heaviside;
        m.base = base;
        m.alpha1 = a1;
        m.alpha2 = a2;
        m.t_star = ts;
        m.passive_by_theory = a2 <= a1;
        return m;
    }

    static MaterialSymbol drude(double omega, double gamma_, double base = 1.0)
    {
        check_base(base);
        if (!(omega > 0) || !(gamma_ > 0)) throw ConfigError("drude: omega_d and gamma_d must be positive");
        MaterialSymbol m;
        m.kind = LawKind::drude;
        m.base = base;
        m.omega_d = omega;
        m.gamma_d = gamma_;
        return m;
    }

    static MaterialSymbol lorentz(double beta_, double alpha, double omega, double base = 1.0)
    {
        check_base(base);
        if (!(beta_ > 0)) throw ConfigError("lorentz: beta_l must be positive");
        if (!(alpha > 0) || !(alpha < 4 * omega * omega))
            throw ConfigError("lorentz: need 0 < alpha_l < 4 omega_l^2");
        MaterialSymbol m;
        m.kind = LawKind::lorentz;
        m.base = base;
        m.beta_l = beta_;
        m.alpha_l = alpha;
        m.omega_l = omega;
        return m;
    }

    // chi(s) = gamma / (1 + beta s^eta)
    static MaterialSymbol fractional(double beta_, double gamma_, double eta_, double base = 1.0)
    {
        check_base(base);
        if (!(beta_ > 0) || !(gamma_ > 0)) throw ConfigError("fractional: beta and gamma must be positive");
        if (!(eta_ > 0) || !(eta_ < 2)) throw ConfigError("fractional: need 0 < eta < 2");
        MaterialSymbol m;
        m.kind = LawKind::fractional;
        m.base = base;
        m.beta = beta_;
        m.gamma = gamma_;
        m.eta = eta_;
        return m;
    }

    static MaterialSymbol rational(std::vector<double> num, std::vector<double> den, double base = 1.0)
    {
        check_base(base);
        if (num.empty() || den.empty()) throw ConfigError("rational_custom: empty coefficient list");
        bool nz = false;
        for (double d : den) nz = nz || d != 0.0;
        if (!nz) throw ConfigError("rational_custom: zero denominator");
        MaterialSymbol m;
        m.kind = LawKind::rational_custom;
        m.base = base;
        m.numerator = std::move(num);
        m.denominator = std::move(den);
        m.passive_by_theory = false;
        return m;
    }

private:
    static void check_base(double b)
    {
        if (!(b > 0) || !std::isfinite(b)) throw ConfigError("base constant must be positive");
    }
};

enum class Side { interior, exterior };

struct MaterialPair {
    MaterialSymbol epsilon;
    MaterialSymbol mu;
    Side side = Side::exterior;

    static MaterialPair vacuum(Side sd = Side::exterior)
    {
        return {MaterialSymbol::vacuum(), MaterialSymbol::vacuum(), sd};
    }
};

// eps(s) = 1/2 + 1/(1 + s^(1/2)), mu = 1/2: the interior medium of the scattering experiments.
inline MaterialPair fractional_interior()
{
    return {MaterialSymbol::fractional(1.0, 2.0, 0.5, 0.5), MaterialSymbol::vacuum(0.5), Side::interior};
}

// Admissible parameter sets covering every passive family; used by the audits.
inline std::vector<MaterialSymbol> documented_laws()
{
    return {MaterialSymbol::vacuum(),
            MaterialSymbol::debye(1.0, 1.0),
            MaterialSymbol::debye_sum({{0.5, 0.1}, {2.0, 3.0}}),
            MaterialSymbol::shifted_heaviside(1.0, 1.0, 1.0),
            MaterialSymbol::shifted_heaviside(2.0, 0.5, 0.3),
            MaterialSymbol::drude(1.0, 1.0),
            MaterialSymbol::drude(3.0, 0.2),
            MaterialSymbol::lorentz(1.0, 0.5, 2.0),
            MaterialSymbol::fractional(1.0, 2.0, 0.5, 0.5),
            MaterialSymbol::fractional(0.3, 1.0, 1.5)};
}

namespace detail {
inline void require_right_half_plane(cplx s)
{
    if (!(s.real() > 0)) throw DomainError("frequency must satisfy Re s > 0");
}

inline cplx polyval(const std::vector<double>& c, cplx s)
{
    cplx r = 0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * s + *it;
    return r;
}
} // namespace detail

inline cplx eval_chi(const MaterialSymbol& m, cplx s)
{
    detail::require_right_half_plane(s);
    switch (m.kind) {
    case LawKind::vacuum:
        return 0.0;
    case LawKind::debye: {
        cplx r = 0;
        for (auto [b, l] : m.debye_terms) r += b / (s + l);
        return r;
    }
    case LawKind::shifted_heaviside:
        return (m.alpha1 + m.alpha2 * std::exp(-m.t_star * s)) / s;
    case LawKind::drude:
        return m.omega_d * m.omega_d / (s * (s + m.gamma_d));
    case LawKind::lorentz:
        return m.beta_l / (s * s + m.alpha_l * s + m.omega_l * m.omega_l);
    case LawKind::fractional:
        return m.gamma / (1.0 + m.beta * std::pow(s, m.eta));
    case LawKind::rational_custom: {
        cplx d = detail::polyval(m.denominator, s);
        if (d == 0.0) throw NumericalError("rational_custom: denominator vanishes");
        return detail::polyval(m.numerator, s) / d;
    }
    }
    return 0.0;
}

inline cplx eval_epsilon(const MaterialSymbol& m, cplx s) { return m.base * (1.0 + eval_chi(m, s)); }

// Re(eps(s) s) - eps0 Re s; nonnegative means strongly passive at s.
inline double passivity_margin(const MaterialSymbol& m, cplx s)
{
    return (eval_epsilon(m, s) * s).real() - m.base * s.real();
}

// s sqrt(eps mu), as the product of the two principal roots.
inline cplx wavenumber(const MaterialPair& p, cplx s)
{
    cplx a = std::sqrt(eval_epsilon(p.epsilon, s) * s);
    cplx b = std::sqrt(eval_epsilon(p.mu, s) * s);
    if (!(a.real() > 0) || !(b.real() > 0))
        throw NumericalError("passivity violation: eps(s)s or mu(s)s has nonpositive real part");
    return a * b;
}

// sqrt(mu s)/sqrt(eps s); the reciprocal is 1/impedance_ratio.
inline cplx impedance_ratio(const MaterialPair& p, cplx s)
{
    cplx a = std::sqrt(eval_epsilon(p.epsilon, s) * s);
    cplx b = std::sqrt(eval_epsilon(p.mu, s) * s);
    if (!(a.real() > 0) || !(b.real() > 0))
        throw NumericalError("passivity violation: eps(s)s or mu(s)s has nonpositive real part");
    return b / a;
}

inline double m_eps_mu(const MaterialPair& in, const MaterialPair& ex, cplx s)
{
    double r = 0;
    for (const MaterialSymbol* m : {&in.epsilon, &in.mu, &ex.epsilon, &ex.mu}) {
        cplx w = eval_epsilon(*m, s) * s;
        r = std::max(r, (std::norm(w) + 1.0) / w.real());
    }
    return r;
}

// Log-spaced audit grid: 40 values of Re s in [0.1, 10], Im s in {0, +-10^[-2,2]} (25 per sign).
inline std::vector<cplx> passivity_audit_grid(int n_re = 40, int n_im = 25)
{
    std::vector<cplx> g;
    std::vector<double> im{0.0};
    for (int j = 0; j < n_im; ++j) {
        double v = std::pow(10.0, -2.0 + 4.0 * j / (n_im - 1));
        im.push_back(v);
        im.push_back(-v);
    }
    for (int i = 0; i < n_re; ++i) {
        double re = std::pow(10.0, -1.0 + 2.0 * i / (n_re - 1));
        for (double y : im) g.emplace_back(re, y);
    }
    return g;
}

} // namespace dcq
