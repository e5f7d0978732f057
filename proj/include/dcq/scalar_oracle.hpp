#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rk_cq.hpp"

// Closed-form scalar references for the convolution quadrature.
namespace dcq::oracle {

// g(t) = t^4 e^{-t} (vanishes to fourth order at 0) and G(t) = int_0^t g
inline double g4(double t) { return t * t * t * t * std::exp(-t); }

inline double G4(double t)
{
    return 24.0 * (1.0 - std::exp(-t) * (1 + t + t * t / 2 + t * t * t / 6 + t * t * t * t / 24));
}

inline StageSignal sample_g4(const RKTableau& tab, double tau, int count)
{
    return StageSignal::sample([](double t) { return Eigen::VectorXd::Constant(1, g4(t)); }, 1, tab, tau, count);
}

struct OrderRow {
    int N = 0;
    double tau = 0;
    double error = 0;
};

// |(1/s)(d_t^tau) g (T) - G(T)| for each N
inline std::vector<OrderRow> integral_order_study(int m, const std::vector<int>& Ns, double T = 2.0)
{
    auto tab = radau_tableau(m);
    std::vector<OrderRow> rows;
    for (int N : Ns) {
        double tau = T / N;
        auto g = sample_g4(tab, tau, N + 1);
        auto w = cq_weights_scalar([](cplx s) { return 1.0 / s; }, tab, tau, N);
        auto r = discrete_convolution(w, g);
        rows.push_back({N, tau, std::abs(r.point_value(N)(0) - G4(T))});
    }
    return rows;
}

// max |s^{1/2}(d) s^{1/2}(d) g - s(d) g| / max |g| over all stages
inline double composition_defect(int m, int N, double T = 4.0)
{
    auto tab = radau_tableau(m);
    double tau = T / N;
    auto g = sample_g4(tab, tau, N + 1);
    auto wh = cq_weights_scalar([](cplx s) { return std::sqrt(s); }, tab, tau, N);
    auto w1 = cq_weights_scalar([](cplx s) { return s; }, tab, tau, N);
    auto a = discrete_convolution(wh, discrete_convolution(wh, g));
    auto b = discrete_convolution(w1, g);
    return (a.data - b.data).cwiseAbs().maxCoeff() / g.data.cwiseAbs().maxCoeff();
}

// Scalar symbols by name: inv (1/s), s, sqrt, invsqrt, exp (e^{-s}), frac:<a> (s^{-a}).
inline std::function<cplx(cplx)> scalar_symbol(const std::string& name)
{
    if (name == "inv") return [](cplx s) { return 1.0 / s; };
    if (name == "s") return [](cplx s) { return s; };
    if (name == "sqrt") return [](cplx s) { return std::sqrt(s); };
    if (name == "invsqrt") return [](cplx s) { return 1.0 / std::sqrt(s); };
    if (name == "exp") return [](cplx s) { return std::exp(-s); };
    if (name.rfind("frac:", 0) == 0) {
        double a = 0;
        try {
            a = std::stod(name.substr(5));
        } catch (const std::exception&) {
            throw ConfigError("symbol " + name + ": bad exponent");
        }
        return [a](cplx s) { return std::pow(s, -a); };
    }
    throw ConfigError("unknown symbol '" + name + "' (inv, s, sqrt, invsqrt, exp, frac:<a>)");
}

} // namespace dcq::oracle
