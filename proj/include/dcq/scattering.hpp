#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "maxwell_ops.hpp"
#include "quadrature.hpp"
#include "rk_cq.hpp"

namespace dcq {

// E_inc(x,t) = amplitude p f(d.x + t - t0), H_inc = amplitude (p x d) f, f(u) = exp(-c u^2).
// H follows from eps dE/dt = curl H, mu dH/dt = -curl E with unit exterior constants.
struct IncidentWave {
    Vec3 p{-1 / std::numbers::sqrt2, 0, -1 / std::numbers::sqrt2};
    Vec3 d{-1 / std::numbers::sqrt2, 0, 1 / std::numbers::sqrt2};
    double c = 10;
    double t0 = 4;
    double amplitude = 1;

    void validate() const
    {
        if (std::abs(d.norm() - 1) > 1e-12) throw ConfigError("incident: direction d must have unit length");
        if (std::abs(p.dot(d)) > 1e-12 * std::max(1.0, p.norm()))
            throw ConfigError("incident: polarization p must be orthogonal to d");
        if (!(c > 0)) throw ConfigError("incident: envelope sharpness c must be positive");
    }

    double envelope(double u) const { return amplitude * std::exp(-c * u * u); }
    Vec3 magnetic_direction() const { return p.cross(d); }
    Vec3 E(const Vec3& x, double t) const { return p * envelope(d.dot(x) + t - t0); }
    Vec3 H(const Vec3& x, double t) const { return magnetic_direction() * envelope(d.dot(x) + t - t0); }
};

// Tested incident traces b_E(t)_i = int phi_i . E_inc(t), b_H likewise; the time dependence
// enters only through the scalar envelope at the quadrature points.
class IncidentLoad {
public:
    IncidentLoad(const RTSpace& sp, const IncidentWave& w, int points = 7) : wave_(w)
    {
        w.validate();
        const auto& m = *sp.mesh;
        auto rule = quad::dunavant(points);
        const int nq = m.nt() * static_cast<int>(rule.w.size());
        proj_.resize(nq);
        std::vector<Eigen::Triplet<double>> te, th;
        Vec3 q = w.magnetic_direction();
        int k = 0;
        for (int t = 0; t < m.nt(); ++t)
            for (size_t j = 0; j < rule.w.size(); ++j, ++k) {
                Vec3 x = sp.point(t, rule.p[j][0], rule.p[j][1]);
                proj_[k] = w.d.dot(x);
                auto f = sp.basis(t, x);
                double wt = rule.w[j] * 2 * m.areas[t];
                for (int a = 0; a < 3; ++a) {
                    te.emplace_back(m.tri_edges[t][a], k, wt * f[a].dot(w.p));
                    th.emplace_back(m.tri_edges[t][a], k, wt * f[a].dot(q));
                }
            }
        pe_.resize(sp.ndof(), nq);
        ph_.resize(sp.ndof(), nq);
        pe_.setFromTriplets(te.begin(), te.end());
        ph_.setFromTriplets(th.begin(), th.end());
    }

    // (b_E, b_H) at time t
    std::pair<Eigen::VectorXd, Eigen::VectorXd> at(double t) const
    {
        Eigen::VectorXd f(proj_.size());
        for (Eigen::Index k = 0; k < f.size(); ++k) f[k] = wave_.envelope(proj_[k] + t - wave_.t0);
        return {pe_ * f, ph_ * f};
    }

    // max_Gamma |f| at t relative to the amplitude
    double relative_envelope(double t) const
    {
        double mx = 0;
        for (double u : proj_) mx = std::max(mx, std::exp(-wave_.c * (u + t - wave_.t0) * (u + t - wave_.t0)));
        return mx;
    }

private:
    IncidentWave wave_;
    std::vector<double> proj_;
    SparseD pe_, ph_;
};

// Right-hand side of the transmission system, (-g, g) with g = 1/2 (b_E, b_H), sampled at the
// stage times of entries 0..count-1. Layout [phi+, psi+, phi-, psi-] rows.
inline StageSignal incident_trace(const IncidentWave& w, const RTSpace& sp, const RKTableau& tab, const CQGrid& grid,
                                  int count = -1)
{
    IncidentLoad load(sp, w);
    const int n = sp.ndof();
    if (count < 0) count = grid.L();
    return StageSignal::sample(
        [&](double t) {
            auto [be, bh] = load.at(t);
            Eigen::VectorXd g(4 * n);
            g << -0.5 * be, -0.5 * bh, 0.5 * be, 0.5 * bh;
            return g;
        },
        4 * n, tab, grid.tau, count);
}

// Target points with side tags, split for the two wavenumbers.
struct TargetSet {
    std::vector<Vec3> points;
    std::vector<Side> side;
    std::vector<double> distance;
    std::vector<int> ext, in;
    std::vector<Vec3> ext_pts, in_pts;

    int size() const { return static_cast<int>(points.size()); }
};

inline TargetSet make_target_set(const SurfaceMesh& m, const std::vector<Vec3>& pts)
{
    auto pt = make_targets(m, pts);
    TargetSet ts;
    ts.points = pts;
    ts.side = pt.sides;
    ts.distance = pt.distance;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        if (ts.side[i] == Side::exterior) {
            ts.ext.push_back(i);
            ts.ext_pts.push_back(pts[i]);
        } else {
            ts.in.push_back(i);
            ts.in_pts.push_back(pts[i]);
        }
    }
    return ts;
}

struct FrequencyRecord {
    int node = 0;
    int stage = 0;
    cplx s;
    bool skipped = false;
    double rhs_norm = 0;
    double assemble_seconds = 0;
    double solve_seconds = 0;
    double potential_seconds = 0;
    std::string method;
    int iterations = 0;
    double residual = 0;
    double min_rayleigh = 0;
};

struct ScatterRun {
    const RTSpace* space = nullptr;
    MaterialPair interior = fractional_interior();
    MaterialPair exterior = MaterialPair::vacuum();
    RKTableau tableau = radau_tableau(2);
    CQGrid grid;
    IncidentWave wave;
    std::vector<Vec3> targets;
    AssemblyOptions assembly;
    SolveOptions solve;
    PotentialOptions potential;
    PassOptions pass;
    // nodes whose transformed right-hand side is below skip_tol times sum_n rho^n |g^n| are set to 0
    double skip_tol = 0;

    void validate() const
    {
        if (!space) throw ConfigError("scatter run without a boundary element space");
        wave.validate();
        assembly.validate();
        if (grid.N < 1 || !(grid.tau > 0)) throw ConfigError("scatter run needs a time grid");
        if (skip_tol < 0) throw ConfigError("skip_tol must be >= 0");
    }
};

// Densities: StageSignal over 4 ndof, blocks [phi+, psi+, phi-, psi-] =
// (gT H+, -gT E+, -gT H-, gT E-) with exterior traces of the scattered field.
// Fields: 6 rows per target (E then H), scattered field outside and total field inside.
struct ScatterResult {
    int ndof = 0;
    StageSignal density;
    StageSignal fields;
    TargetSet targets;
    std::vector<FrequencyRecord> records;
    PassInfo pass;
    std::vector<std::string> warnings;
    double seconds = 0;

    Eigen::VectorXd density_at(int n) const { return density.point_value(n); }
    Eigen::VectorXd block_at(int n, int block) const { return density.point_value(n).segment(block * ndof, ndof); }

    Vec3 E(int n, int target) const { return fields.point_value(n).segment<3>(6 * target); }
    Vec3 H(int n, int target) const { return fields.point_value(n).segment<3>(6 * target + 3); }
};

namespace detail {

struct SidePotentials {
    PotentialMatrices ext, in;
    bool has_ext = false, has_in = false;
};

inline SidePotentials side_potentials(const RTSpace& sp, const TargetSet& ts, cplx s, const MaterialPair& interior,
                                      const MaterialPair& exterior, const PotentialOptions& o)
{
    SidePotentials p;
    if (!ts.ext.empty()) {
        p.ext = potential_matrices(sp, ts.ext_pts, wavenumber(exterior, s), o);
        p.has_ext = true;
    }
    if (!ts.in.empty()) {
        p.in = potential_matrices(sp, ts.in_pts, wavenumber(interior, s), o);
        p.has_in = true;
    }
    return p;
}

// E = -zeta S phi + D psi, H = -D phi - S psi / zeta with the densities of the target's side.
inline Eigen::VectorXcd represent(const SidePotentials& p, const TargetSet& ts, cplx s, const MaterialPair& interior,
                                  const MaterialPair& exterior, const Eigen::VectorXcd& x, int n)
{
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(6 * ts.size());
    auto side = [&](const PotentialMatrices& pm, const std::vector<int>& idx, cplx zeta, int off) {
        Eigen::VectorXcd phi = x.segment(off, n), psi = x.segment(off + n, n);
        Eigen::VectorXcd sphi = pm.S * phi, dphi = pm.D * phi, spsi = pm.S * psi, dpsi = pm.D * psi;
        for (size_t k = 0; k < idx.size(); ++k) {
            int i = idx[k];
            out.segment<3>(6 * i) = -zeta * sphi.segment<3>(3 * k) + dpsi.segment<3>(3 * k);
            out.segment<3>(6 * i + 3) = -dphi.segment<3>(3 * k) - spsi.segment<3>(3 * k) / zeta;
        }
    };
    if (p.has_ext) side(p.ext, ts.ext, impedance_ratio(exterior, s), 0);
    if (p.has_in) side(p.in, ts.in, impedance_ratio(interior, s), 2 * n);
    return out;
}

inline double damped_sum(const StageSignal& g, double rho)
{
    double acc = 0, r = 1;
    for (int n = 0; n < g.count(); ++n, r *= rho) acc += r * g.data.col(n).norm();
    return acc;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// Solves A(d_t^tau) phi = g and, in the same frequency pass, evaluates the representation
// formulas at the run's targets (fields of a composed CQ operator share the nodes of the solve).
inline ScatterResult simulate(const ScatterRun& run, const StageSignal* rhs = nullptr)
{
    run.validate();
    auto t_start = std::chrono::steady_clock::now();
    const RTSpace& sp = *run.space;
    const int n = sp.ndof();
    const int m = run.tableau.m;
    ScatterResult res;
    res.ndof = n;
    res.targets = make_target_set(*sp.mesh, run.targets);
    const int nt = res.targets.size();

    StageSignal g = rhs ? *rhs : incident_trace(run.wave, sp, run.tableau, run.grid);
    if (g.dim != 4 * n) throw ConfigError("right-hand side has the wrong dimension");
    if (!rhs) {
        IncidentLoad probe(sp, run.wave);
        if (probe.relative_envelope(0.0) > 1e-8)
            res.warnings.push_back("incident wave does not vanish at t = 0 on the boundary (envelope tail > 1e-8)");
    }
    SparseD B = assemble_pairing(sp);
    const double ref = detail::damped_sum(g, run.grid.rho);
    const int half = g.count() / 2;
    std::vector<FrequencyRecord> rec(static_cast<size_t>(half + 1) * m);
    int near_warn = 0;

    auto op = [&](int l, int j, cplx s, const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
        FrequencyRecord& r = rec[static_cast<size_t>(l) * m + j];
        r.node = l;
        r.stage = j;
        r.s = s;
        r.rhs_norm = y.norm();
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(4 * n + 6 * nt);
        if (r.rhs_norm == 0 || r.rhs_norm <= run.skip_tol * ref) {
            r.skipped = true;
            r.method = "skipped";
            return out;
        }
        auto t0 = std::chrono::steady_clock::now();
        auto fs = assemble_A(s, run.interior, run.exterior, sp, B, run.assembly);
        r.assemble_seconds = detail::seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        FrequencySolveInfo fi;
        Eigen::VectorXcd x = solve_frequency(fs, y, run.solve, &fi);
        r.solve_seconds = detail::seconds_since(t0);
        r.method = fi.method;
        r.iterations = fi.iterations;
        r.residual = fi.residual;
        r.min_rayleigh = fi.min_rayleigh;
        out.head(4 * n) = x;
        if (nt > 0) {
            t0 = std::chrono::steady_clock::now();
            auto pots = detail::side_potentials(sp, res.targets, s, run.interior, run.exterior, run.potential);
#pragma omp atomic
            near_warn += pots.ext.near_warnings + pots.in.near_warnings;
            out.tail(6 * nt) = detail::represent(pots, res.targets, s, run.interior, run.exterior, x, n);
            r.potential_seconds = detail::seconds_since(t0);
        }
        return out;
    };
    StageSignal all = frequency_pass(g, run.tableau, run.grid, 4 * n + 6 * nt, op, run.pass, &res.pass);
    res.density = StageSignal(4 * n, m, all.count());
    res.fields = StageSignal(6 * nt, m, all.count());
    for (int i = 0; i < m; ++i) {
        res.density.data.middleRows(i * 4 * n, 4 * n) = all.data.middleRows(i * (4 * n + 6 * nt), 4 * n);
        if (nt > 0)
            res.fields.data.middleRows(i * 6 * nt, 6 * nt) = all.data.middleRows(i * (4 * n + 6 * nt) + 4 * n, 6 * nt);
    }
    res.records = std::move(rec);
    for (const auto& w : res.pass.warnings) res.warnings.push_back(w);
    if (near_warn > 0)
        res.warnings.push_back("targets within a quarter element diameter of the boundary (" +
                               std::to_string(near_warn) + " target-triangle pairs over all nodes)");
    res.seconds = detail::seconds_since(t_start);
    return res;
}

inline ScatterResult solve_scattering(ScatterRun run)
{
    run.targets.clear();
    return simulate(run);
}

// Fields from a stored density history: one CQ pass of the potential operators.
inline StageSignal reconstruct_fields(const StageSignal& history, const RTSpace& sp, const std::vector<Vec3>& targets,
                                      const MaterialPair& interior, const MaterialPair& exterior,
                                      const RKTableau& tab, const CQGrid& grid, const PotentialOptions& o = {},
                                      const PassOptions& po = {})
{
    const int n = sp.ndof();
    if (history.dim != 4 * n) throw ConfigError("density history does not match the space");
    auto ts = make_target_set(*sp.mesh, targets);
    return frequency_pass(
        history, tab, grid, 6 * ts.size(),
        [&](int, int, cplx s, const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
            if (x.norm() == 0) return Eigen::VectorXcd::Zero(6 * ts.size());
            auto pots = detail::side_potentials(sp, ts, s, interior, exterior, o);
            return detail::represent(pots, ts, s, interior, exterior, x, n);
        },
        po);
}

// ---------------------------------------------------------------------------------------------
// Output

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// t,x,y,z,Ex_re,Ey_re,Ez_re,Hx_re,Hy_re,Hz_re for t_0..t_N
inline void write_fields_csv(const std::string& path, const ScatterResult& r, const CQGrid& grid)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "t,x,y,z,Ex_re,Ey_re,Ez_re,Hx_re,Hy_re,Hz_re\n";
    for (int step = 0; step <= grid.N; ++step) {
        Eigen::VectorXd v = r.fields.point_value(step);
        for (int i = 0; i < r.targets.size(); ++i) {
            const Vec3& x = r.targets.points[i];
            out << format_double(step * grid.tau);
            for (int k = 0; k < 3; ++k) out << ',' << format_double(x[k]);
            for (int k = 0; k < 6; ++k) out << ',' << format_double(v[6 * i + k]);
            out << '\n';
        }
    }
}

// <prefix>.bin: per step t_0..t_N, 4 ndof float64 values (blocks phi+, psi+, phi-, psi-).
// <prefix>.csv: one index row per step.
inline void write_density_dump(const std::string& prefix, const ScatterResult& r, const CQGrid& grid)
{
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("cannot write " + prefix + ".bin");
    std::ofstream csv(prefix + ".csv");
    if (!csv) throw ConfigError("cannot write " + prefix + ".csv");
    csv << "step,t,offset,count,ndof,blocks,file\n";
    std::int64_t offset = 0;
    std::string file = prefix.substr(prefix.find_last_of('/') + 1) + ".bin";
    for (int step = 0; step <= grid.N; ++step) {
        Eigen::VectorXd v = r.density.point_value(step);
        bin.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        csv << step << ',' << format_double(step * grid.tau) << ',' << offset << ',' << v.size() << ',' << r.ndof
            << ",phi_ext;psi_ext;phi_int;psi_int," << file << '\n';
        offset += static_cast<std::int64_t>(v.size() * sizeof(double));
    }
}

} // namespace dcq
