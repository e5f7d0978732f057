#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "scattering.hpp"
#include "surface_mesh.hpp"

namespace dcq {

using json = nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Configuration

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T get_or(const json& j, const char* key, const std::string& where, T fallback)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <class T>
T get_req(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    return get_or<T>(j, key, where, T{});
}

inline Vec3 get_vec3(const json& j, const char* key, const std::string& where, const Vec3& fallback)
{
    if (!j.contains(key)) return fallback;
    auto v = get_or<std::vector<double>>(j, key, where, {});
    if (v.size() != 3) throw ConfigError(where + "." + key + ": expected 3 numbers");
    return {v[0], v[1], v[2]};
}

inline json vec3_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

} // namespace detail

inline MaterialSymbol law_from_json(const json& j, const std::string& where)
{
    using detail::get_or;
    using detail::get_req;
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::string kind;
    try {
        kind = get_req<std::string>(j, "kind", where);
        LawKind k = law_kind_from_string(kind);
        double base = get_or<double>(j, "base", where, 1.0);
        switch (k) {
        case LawKind::vacuum:
            detail::check_keys(j, where, {"kind", "base"});
            return MaterialSymbol::vacuum(base);
        case LawKind::debye: {
            detail::check_keys(j, where, {"kind", "base", "terms"});
            auto terms = get_req<std::vector<std::vector<double>>>(j, "terms", where);
            std::vector<std::pair<double, double>> t;
            for (const auto& x : terms) {
                if (x.size() != 2) throw ConfigError(where + ".terms: each term is [beta, lambda]");
                t.emplace_back(x[0], x[1]);
            }
            return MaterialSymbol::debye_sum(t, base);
        }
        case LawKind::shifted_heaviside:
            detail::check_keys(j, where, {"kind", "base", "alpha1", "alpha2", "t_star", "allow_nonpassive"});
            return MaterialSymbol::shifted_heaviside(get_req<double>(j, "alpha1", where),
                                                     get_req<double>(j, "alpha2", where),
                                                     get_req<double>(j, "t_star", where), base,
                                                     get_or<bool>(j, "allow_nonpassive", where, false));
        case LawKind::drude:
            detail::check_keys(j, where, {"kind", "base", "omega_d", "gamma_d"});
            return MaterialSymbol::drude(get_req<double>(j, "omega_d", where), get_req<double>(j, "gamma_d", where),
                                         base);
        case LawKind::lorentz:
            detail::check_keys(j, where, {"kind", "base", "beta_l", "alpha_l", "omega_l"});
            return MaterialSymbol::lorentz(get_req<double>(j, "beta_l", where), get_req<double>(j, "alpha_l", where),
                                           get_req<double>(j, "omega_l", where), base);
        case LawKind::fractional:
            detail::check_keys(j, where, {"kind", "base", "beta", "gamma", "eta"});
            return MaterialSymbol::fractional(get_req<double>(j, "beta", where), get_req<double>(j, "gamma", where),
                                              get_req<double>(j, "eta", where), base);
        case LawKind::rational_custom:
            detail::check_keys(j, where, {"kind", "base", "numerator", "denominator"});
            return MaterialSymbol::rational(get_req<std::vector<double>>(j, "numerator", where),
                                            get_req<std::vector<double>>(j, "denominator", where), base);
        }
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        if (msg.rfind(where, 0) == 0) throw;
        throw ConfigError(where + ": " + msg);
    }
    throw ConfigError(where + ": unhandled kind");
}

inline json law_to_json(const MaterialSymbol& m)
{
    json j{{"kind", to_string(m.kind)}, {"base", m.base}};
    switch (m.kind) {
    case LawKind::vacuum:
        break;
    case LawKind::debye: {
        json t = json::array();
        for (auto [b, l] : m.debye_terms) t.push_back({b, l});
        j["terms"] = t;
        break;
    }
    case LawKind::shifted_heaviside:
        j["alpha1"] = m.alpha1;
        j["alpha2"] = m.alpha2;
        j["t_star"] = m.t_star;
        j["allow_nonpassive"] = !m.passive_by_theory;
        break;
    case LawKind::drude:
        j["omega_d"] = m.omega_d;
        j["gamma_d"] = m.gamma_d;
        break;
    case LawKind::lorentz:
        j["beta_l"] = m.beta_l;
        j["alpha_l"] = m.alpha_l;
        j["omega_l"] = m.omega_l;
        break;
    case LawKind::fractional:
        j["beta"] = m.beta;
        j["gamma"] = m.gamma;
        j["eta"] = m.eta;
        break;
    case LawKind::rational_custom:
        j["numerator"] = m.numerator;
        j["denominator"] = m.denominator;
        break;
    }
    return j;
}

struct GeometryConfig {
    std::string kind = "sphere"; // sphere | two_cubes | mesh
    int level = 2;
    double radius = 1;
    double gap = 0.5;
    int divisions = 2;
    std::string path;
    std::string format;
};

struct PlaneConfig {
    bool enabled = false;
    Vec3 origin{-2.5, 0.5, -2.5};
    Vec3 u{5, 0, 0};
    Vec3 v{0, 0, 5};
    int nu = 41, nv = 41;
    double min_distance = 0.05; // grid points closer to the boundary are dropped
};

struct RunConfig {
    GeometryConfig geometry;
    MaterialPair interior = fractional_interior();
    MaterialPair exterior = MaterialPair::vacuum();
    int stages = 2;
    double T = 8;
    int N = 64;
    double rho = 0;      // 0: default eps^(1/(2(N+1)))
    double skip_tol = 0; // see ScatterRun
    IncidentWave incident;
    std::vector<Vec3> points{Vec3(-std::numbers::sqrt2, 0, std::numbers::sqrt2)};
    PlaneConfig plane;
    AssemblyOptions assembly;
    SolveOptions solve;
    std::string out_dir = "out";
    std::string fields_file = "fields.csv";
    std::string density_prefix = "density";
    std::string manifest_file = "manifest.json";
    bool write_density = true;
    std::uint64_t seed = 1;
    int threads = 0; // 0: leave the OpenMP default

    json to_json() const
    {
        json g{{"kind", geometry.kind}};
        if (geometry.kind == "sphere") {
            g["level"] = geometry.level;
            g["radius"] = geometry.radius;
        } else if (geometry.kind == "two_cubes") {
            g["gap"] = geometry.gap;
            g["divisions"] = geometry.divisions;
        } else {
            g["path"] = geometry.path;
            g["format"] = geometry.format;
        }
        json pts = json::array();
        for (const auto& p : points) pts.push_back(detail::vec3_json(p));
        json targets{{"points", pts}};
        if (plane.enabled)
            targets["plane"] = {{"origin", detail::vec3_json(plane.origin)}, {"u", detail::vec3_json(plane.u)},
                                {"v", detail::vec3_json(plane.v)},           {"nu", plane.nu},
                                {"nv", plane.nv},                            {"min_distance", plane.min_distance}};
        const char* coer = solve.coercivity == CoercivityCheck::off      ? "off"
                           : solve.coercivity == CoercivityCheck::sample ? "sample"
                                                                         : "full";
        return json{
            {"geometry", g},
            {"materials",
             {{"interior", {{"epsilon", law_to_json(interior.epsilon)}, {"mu", law_to_json(interior.mu)}}},
              {"exterior", {{"epsilon", law_to_json(exterior.epsilon)}, {"mu", law_to_json(exterior.mu)}}}}},
            {"rk", {{"stages", stages}}},
            {"time", {{"T", T}, {"N", N}}},
            {"contour", {{"rho", rho}, {"skip_tol", skip_tol}}},
            {"incident",
             {{"p", detail::vec3_json(incident.p)},
              {"d", detail::vec3_json(incident.d)},
              {"c", incident.c},
              {"t0", incident.t0},
              {"amplitude", incident.amplitude}}},
            {"targets", targets},
            {"assembly",
             {{"singular_order", assembly.singular_order},
              {"near_order", assembly.near_order},
              {"near_ratio", assembly.near_ratio},
              {"mid_ratio", assembly.mid_ratio},
              {"cutoff", assembly.cutoff}}},
            {"solver",
             {{"method", solve.method},
              {"lu_max_dim", solve.lu_max_dim},
              {"gmres_tol", solve.gmres_tol},
              {"gmres_max_iter", solve.gmres_max_iter},
              {"gmres_restart", solve.gmres_restart},
              {"coercivity", coer},
              {"coercivity_samples", solve.coercivity_samples}}},
            {"outputs",
             {{"dir", out_dir},
              {"fields", fields_file},
              {"density", density_prefix},
              {"manifest", manifest_file},
              {"write_density", write_density}}},
            {"seed", seed},
            {"threads", threads}};
    }

    // sorted keys, no whitespace; defines the config hash
    std::string canonical() const { return to_json().dump(); }

    std::string hash() const
    {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        return os.str();
    }

    static RunConfig from_json(const json& j)
    {
        using detail::get_or;
        RunConfig c;
        const json& src = j.contains("config") && j.contains("config_hash") ? j.at("config") : j;
        detail::check_keys(src, "config",
                           {"geometry", "materials", "rk", "time", "contour", "incident", "targets", "assembly",
                            "solver", "outputs", "seed", "threads"});
        if (src.contains("geometry")) {
            const json& g = src["geometry"];
            detail::check_keys(g, "geometry", {"kind", "level", "radius", "gap", "divisions", "path", "format"});
            c.geometry.kind = get_or<std::string>(g, "kind", "geometry", "sphere");
            c.geometry.level = get_or<int>(g, "level", "geometry", c.geometry.level);
            c.geometry.radius = get_or<double>(g, "radius", "geometry", 1.0);
            c.geometry.gap = get_or<double>(g, "gap", "geometry", c.geometry.gap);
            c.geometry.divisions = get_or<int>(g, "divisions", "geometry", c.geometry.divisions);
            c.geometry.path = get_or<std::string>(g, "path", "geometry", "");
            c.geometry.format = get_or<std::string>(g, "format", "geometry", "");
            if (c.geometry.kind != "sphere" && c.geometry.kind != "two_cubes" && c.geometry.kind != "mesh")
                throw ConfigError("geometry.kind: unknown value '" + c.geometry.kind + "'");
        }
        if (src.contains("materials")) {
            const json& m = src["materials"];
            detail::check_keys(m, "materials", {"interior", "exterior"});
            auto side = [&](const char* name, MaterialPair& p) {
                if (!m.contains(name)) return;
                const json& s = m[name];
                std::string w = std::string("materials.") + name;
                detail::check_keys(s, w, {"epsilon", "mu"});
                if (s.contains("epsilon")) p.epsilon = law_from_json(s["epsilon"], w + ".epsilon");
                if (s.contains("mu")) p.mu = law_from_json(s["mu"], w + ".mu");
            };
            side("interior", c.interior);
            side("exterior", c.exterior);
        }
        if (src.contains("rk")) {
            detail::check_keys(src["rk"], "rk", {"stages"});
            c.stages = get_or<int>(src["rk"], "stages", "rk", c.stages);
        }
        if (src.contains("time")) {
            detail::check_keys(src["time"], "time", {"T", "N"});
            c.T = get_or<double>(src["time"], "T", "time", c.T);
            c.N = get_or<int>(src["time"], "N", "time", c.N);
        }
        if (src.contains("contour")) {
            detail::check_keys(src["contour"], "contour", {"rho", "skip_tol"});
            c.rho = get_or<double>(src["contour"], "rho", "contour", c.rho);
            c.skip_tol = get_or<double>(src["contour"], "skip_tol", "contour", c.skip_tol);
        }
        if (src.contains("incident")) {
            const json& w = src["incident"];
            detail::check_keys(w, "incident", {"p", "d", "c", "t0", "amplitude"});
            c.incident.p = detail::get_vec3(w, "p", "incident", c.incident.p);
            c.incident.d = detail::get_vec3(w, "d", "incident", c.incident.d);
            c.incident.c = get_or<double>(w, "c", "incident", c.incident.c);
            c.incident.t0 = get_or<double>(w, "t0", "incident", c.incident.t0);
            c.incident.amplitude = get_or<double>(w, "amplitude", "incident", c.incident.amplitude);
        }
        if (src.contains("targets")) {
            const json& t = src["targets"];
            detail::check_keys(t, "targets", {"points", "plane"});
            if (t.contains("points")) {
                c.points.clear();
                for (const auto& p : get_or<std::vector<std::vector<double>>>(t, "points", "targets", {})) {
                    if (p.size() != 3) throw ConfigError("targets.points: each point needs 3 coordinates");
                    c.points.emplace_back(p[0], p[1], p[2]);
                }
            }
            if (t.contains("plane")) {
                const json& p = t["plane"];
                detail::check_keys(p, "targets.plane", {"origin", "u", "v", "nu", "nv", "min_distance"});
                c.plane.enabled = true;
                c.plane.origin = detail::get_vec3(p, "origin", "targets.plane", c.plane.origin);
                c.plane.u = detail::get_vec3(p, "u", "targets.plane", c.plane.u);
                c.plane.v = detail::get_vec3(p, "v", "targets.plane", c.plane.v);
                c.plane.nu = get_or<int>(p, "nu", "targets.plane", c.plane.nu);
                c.plane.nv = get_or<int>(p, "nv", "targets.plane", c.plane.nv);
                c.plane.min_distance = get_or<double>(p, "min_distance", "targets.plane", c.plane.min_distance);
            }
        }
        if (src.contains("assembly")) {
            const json& a = src["assembly"];
            detail::check_keys(a, "assembly", {"singular_order", "near_order", "near_ratio", "mid_ratio", "cutoff"});
            c.assembly.singular_order = get_or<int>(a, "singular_order", "assembly", c.assembly.singular_order);
            c.assembly.near_order = get_or<int>(a, "near_order", "assembly", c.assembly.near_order);
            c.assembly.near_ratio = get_or<double>(a, "near_ratio", "assembly", c.assembly.near_ratio);
            c.assembly.mid_ratio = get_or<double>(a, "mid_ratio", "assembly", c.assembly.mid_ratio);
            c.assembly.cutoff = get_or<double>(a, "cutoff", "assembly", c.assembly.cutoff);
        }
        if (src.contains("solver")) {
            const json& s = src["solver"];
            detail::check_keys(s, "solver",
                               {"method", "lu_max_dim", "gmres_tol", "gmres_max_iter", "gmres_restart", "coercivity",
                                "coercivity_samples"});
            c.solve.method = get_or<std::string>(s, "method", "solver", c.solve.method);
            c.solve.lu_max_dim = get_or<int>(s, "lu_max_dim", "solver", c.solve.lu_max_dim);
            c.solve.gmres_tol = get_or<double>(s, "gmres_tol", "solver", c.solve.gmres_tol);
            c.solve.gmres_max_iter = get_or<int>(s, "gmres_max_iter", "solver", c.solve.gmres_max_iter);
            c.solve.gmres_restart = get_or<int>(s, "gmres_restart", "solver", c.solve.gmres_restart);
            std::string co = get_or<std::string>(s, "coercivity", "solver", "sample");
            if (co == "off")
                c.solve.coercivity = CoercivityCheck::off;
            else if (co == "sample")
                c.solve.coercivity = CoercivityCheck::sample;
            else if (co == "full")
                c.solve.coercivity = CoercivityCheck::full;
            else
                throw ConfigError("solver.coercivity: unknown value '" + co + "'");
            c.solve.coercivity_samples =
                get_or<int>(s, "coercivity_samples", "solver", c.solve.coercivity_samples);
        }
        if (src.contains("outputs")) {
            const json& o = src["outputs"];
            detail::check_keys(o, "outputs", {"dir", "fields", "density", "manifest", "write_density"});
            c.out_dir = get_or<std::string>(o, "dir", "outputs", c.out_dir);
            c.fields_file = get_or<std::string>(o, "fields", "outputs", c.fields_file);
            c.density_prefix = get_or<std::string>(o, "density", "outputs", c.density_prefix);
            c.manifest_file = get_or<std::string>(o, "manifest", "outputs", c.manifest_file);
            c.write_density = get_or<bool>(o, "write_density", "outputs", c.write_density);
        }
        c.seed = get_or<std::uint64_t>(src, "seed", "config", c.seed);
        c.threads = get_or<int>(src, "threads", "config", c.threads);
        c.validate();
        return c;
    }

    void validate() const
    {
        if (stages < 1 || stages > 3) throw ConfigError("rk.stages must be 1, 2 or 3");
        if (!(T > 0) || N < 1) throw ConfigError("time: need T > 0 and N >= 1");
        if (rho < 0 || rho >= 1) throw ConfigError("contour.rho must lie in [0, 1)");
        if (skip_tol < 0) throw ConfigError("contour.skip_tol must be >= 0");
        if (plane.enabled && (plane.nu < 1 || plane.nv < 1)) throw ConfigError("targets.plane: nu, nv must be >= 1");
        if (threads < 0) throw ConfigError("threads must be >= 0");
        incident.validate();
        assembly.validate();
        if (solve.method != "auto" && solve.method != "lu" && solve.method != "gmres")
            throw ConfigError("solver.method: unknown value '" + solve.method + "'");
    }
};

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return RunConfig::from_json(j);
}

inline SurfaceMesh make_mesh(const GeometryConfig& g)
{
    if (g.kind == "sphere") return icosphere(g.level, g.radius);
    if (g.kind == "two_cubes") return two_cubes(g.gap, g.divisions);
    return load_mesh(g.path, g.format);
}

// Regular grid origin + i/(nu-1) u + j/(nv-1) v, without points within min_distance of Gamma.
inline std::vector<Vec3> plane_points(const PlaneConfig& p, const SurfaceMesh& m)
{
    std::vector<Vec3> pts;
    for (int j = 0; j < p.nv; ++j)
        for (int i = 0; i < p.nu; ++i) {
            double a = p.nu > 1 ? double(i) / (p.nu - 1) : 0.0, b = p.nv > 1 ? double(j) / (p.nv - 1) : 0.0;
            Vec3 x = p.origin + a * p.u + b * p.v;
            if (distance_to_mesh(m, x) >= p.min_distance) pts.push_back(x);
        }
    return pts;
}

inline CQGrid make_grid(const RunConfig& c)
{
    return CQGrid::make(c.T, c.N, c.rho);
}

inline void apply_threads(const RunConfig& c)
{
#ifdef _OPENMP
    if (c.threads > 0) omp_set_num_threads(c.threads);
#else
    (void)c;
#endif
}

// ---------------------------------------------------------------------------------------------
// Runs

struct RunOutcome {
    SurfaceMesh mesh;
    ScatterResult result;
    CQGrid grid;
    json manifest;
};

inline json records_json(const std::vector<FrequencyRecord>& recs)
{
    json a = json::array();
    for (const auto& r : recs)
        a.push_back({{"node", r.node},
                     {"stage", r.stage},
                     {"s_re", r.s.real()},
                     {"s_im", r.s.imag()},
                     {"skipped", r.skipped},
                     {"rhs_norm", r.rhs_norm},
                     {"method", r.method},
                     {"iterations", r.iterations},
                     {"residual", r.residual},
                     {"min_rayleigh", r.min_rayleigh},
                     {"assemble_s", r.assemble_seconds},
                     {"solve_s", r.solve_seconds},
                     {"potential_s", r.potential_seconds}});
    return a;
}

// Runs the configured simulation in memory (no files); targets are the points or the plane grid.
inline RunOutcome simulate_config(const RunConfig& c, bool use_plane = false)
{
    c.validate();
    apply_threads(c);
    RunOutcome out;
    auto t0 = std::chrono::steady_clock::now();
    out.mesh = make_mesh(c.geometry);
    RTSpace sp(out.mesh);
    double t_mesh = detail::seconds_since(t0);
    out.grid = make_grid(c);
    ScatterRun run;
    run.space = &sp;
    run.interior = c.interior;
    run.interior.side = Side::interior;
    run.exterior = c.exterior;
    run.exterior.side = Side::exterior;
    run.tableau = radau_tableau(c.stages);
    run.grid = out.grid;
    run.wave = c.incident;
    run.targets = use_plane ? plane_points(c.plane, out.mesh) : c.points;
    run.assembly = c.assembly;
    run.solve = c.solve;
    run.skip_tol = c.skip_tol;
    out.result = simulate(run);
    out.manifest = {{"config", c.to_json()},
                    {"config_hash", c.hash()},
                    {"mesh", {{"vertices", out.mesh.nv()}, {"edges", out.mesh.ne()}, {"triangles", out.mesh.nt()},
                              {"h", out.mesh.h}}},
                    {"grid", {{"tau", out.grid.tau}, {"N", out.grid.N}, {"rho", out.grid.rho},
                              {"rho_used", out.result.pass.rho_used}}},
                    {"timings", {{"mesh_s", t_mesh}, {"solve_s", out.result.seconds}}},
                    {"frequencies", records_json(out.result.records)},
                    {"warnings", out.result.warnings}};
    return out;
}

// Writes fields CSV, density dump and manifest into c.out_dir.
inline RunOutcome run(const RunConfig& c, bool use_plane = false)
{
    auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    fs::create_directories(c.out_dir);
    RunOutcome out = simulate_config(c, use_plane);
    auto tw = std::chrono::steady_clock::now();
    json files = json::array();
    std::string fpath = (fs::path(c.out_dir) / c.fields_file).string();
    if (out.result.targets.size() > 0) {
        write_fields_csv(fpath, out.result, out.grid);
        files.push_back(fpath);
    }
    if (c.write_density) {
        std::string prefix = (fs::path(c.out_dir) / c.density_prefix).string();
        write_density_dump(prefix, out.result, out.grid);
        files.push_back(prefix + ".bin");
        files.push_back(prefix + ".csv");
    }
    std::string mpath = (fs::path(c.out_dir) / c.manifest_file).string();
    files.push_back(mpath);
    out.manifest["outputs"] = files;
    out.manifest["timings"]["write_s"] = detail::seconds_since(tw);
    out.manifest["timings"]["total_s"] = detail::seconds_since(t0);
    std::ofstream m(mpath);
    if (!m) throw ConfigError("cannot write " + mpath);
    m << out.manifest.dump(2) << '\n';
    return out;
}

// ---------------------------------------------------------------------------------------------
// Convergence studies

struct OrderFit {
    double slope = 0;
    double stderr_ = 0;
    int points = 0;
};

// Least squares of log2(err) against log2(x); x is a step size, so convergence gives slope > 0.
inline OrderFit fit_order(const std::vector<double>& x, const std::vector<double>& err)
{
    if (x.size() != err.size()) throw ConfigError("fit_order: size mismatch");
    const int n = static_cast<int>(x.size());
    if (n < 2) throw ConfigError("fit_order: need at least two rows");
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(x[i] > 0) || !(err[i] > 0)) throw NumericalError("fit_order: nonpositive step or error");
        lx[i] = std::log2(x[i]);
        ly[i] = std::log2(err[i]);
    }
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0)) throw NumericalError("fit_order: all steps equal");
    OrderFit f;
    f.slope = sxy / sxx;
    f.points = n;
    if (n > 2) {
        double ssr = 0;
        for (int i = 0; i < n; ++i) {
            double r = ly[i] - (my + f.slope * (lx[i] - mx));
            ssr += r * r;
        }
        f.stderr_ = std::sqrt(ssr / (n - 2) / sxx);
    }
    return f;
}

// fit over the last k rows (all rows if fewer)
inline OrderFit fit_tail(const std::vector<double>& x, const std::vector<double>& err, int k = 3)
{
    int n = static_cast<int>(x.size());
    int s = std::max(0, n - k);
    return fit_order({x.begin() + s, x.end()}, {err.begin() + s, err.end()});
}

struct ConvergenceRow {
    int level = 0;
    int N = 0;
    int ndof = 0;
    double step = 0; // tau or h
    std::vector<double> errors;
};

struct ConvergenceReport {
    std::string kind; // time | space
    std::vector<std::string> norms;
    std::vector<ConvergenceRow> rows;
    std::vector<OrderFit> fits; // per norm, over the last 3 rows
    std::vector<bool> monotone;
    std::string reference;
    std::vector<std::string> notes;

    void finish()
    {
        fits.clear();
        monotone.clear();
        std::vector<double> x;
        for (const auto& r : rows) x.push_back(r.step);
        for (size_t k = 0; k < norms.size(); ++k) {
            std::vector<double> e;
            for (const auto& r : rows) e.push_back(r.errors[k]);
            bool mono = true;
            for (size_t i = 1; i < e.size(); ++i) mono = mono && e[i] < e[i - 1];
            monotone.push_back(mono);
            if (!mono) notes.push_back(norms[k] + ": error sequence is not monotone");
            fits.push_back(rows.size() >= 2 ? fit_tail(x, e) : OrderFit{});
        }
    }

    // step,<norm>... then slope lines as comments
    void write_csv(std::ostream& out) const
    {
        out << (kind == "time" ? "N,tau" : "level,h,ndof");
        for (const auto& n : norms) out << ',' << n;
        out << '\n';
        for (const auto& r : rows) {
            if (kind == "time")
                out << r.N << ',' << format_double(r.step);
            else
                out << r.level << ',' << format_double(r.step) << ',' << r.ndof;
            for (double e : r.errors) out << ',' << format_double(e);
            out << '\n';
        }
    }

    // tau,error,order rows for one norm (order against the previous row)
    void write_order_csv(std::ostream& out, int norm = 0) const
    {
        out << "tau,error,order\n";
        for (size_t i = 0; i < rows.size(); ++i) {
            out << format_double(rows[i].step) << ',' << format_double(rows[i].errors[norm]) << ',';
            if (i > 0)
                out << format_double(std::log2(rows[i - 1].errors[norm] / rows[i].errors[norm]) /
                                     std::log2(rows[i - 1].step / rows[i].step));
            out << '\n';
        }
    }

    json to_json() const
    {
        json j{{"kind", kind}, {"reference", reference}, {"norms", norms}, {"notes", notes}};
        json rs = json::array();
        for (const auto& r : rows)
            rs.push_back({{"level", r.level}, {"N", r.N}, {"ndof", r.ndof}, {"step", r.step}, {"errors", r.errors}});
        j["rows"] = rs;
        json fs = json::array();
        for (size_t k = 0; k < fits.size(); ++k)
            fs.push_back({{"norm", norms[k]},
                          {"slope", fits[k].slope},
                          {"stderr", fits[k].stderr_},
                          {"points", fits[k].points},
                          {"monotone", bool(monotone[k])}});
        j["fits"] = fs;
        return j;
    }
};

// Discrete L2(Gamma) norm of all four density blocks.
inline double density_l2(const SparseD& mass, const Eigen::VectorXd& x, int n)
{
    double acc = 0;
    for (int b = 0; b < 4; ++b) {
        Eigen::VectorXd v = x.segment(b * n, n);
        acc += v.dot(mass * v);
    }
    return std::sqrt(std::max(0.0, acc));
}

// Errors against the largest N in Ns (self-reference): (a) max over t_n of |E - E_ref| at the
// first target, relative to the reference peak; (b) boundary densities in L2(Gamma) at the
// final time and (c) in max over time, both relative to max_t |ref|.
inline ConvergenceReport converge_time(const RunConfig& base, std::vector<int> Ns, int N_ref,
                                       const std::function<void(const std::string&)>& log = {})
{
    if (Ns.empty()) throw ConfigError("converge_time: empty N list");
    if (base.points.empty()) throw ConfigError("converge_time: needs a target point");
    for (int N : Ns)
        if (N_ref % N != 0) throw ConfigError("converge_time: reference N must be a multiple of every N");
    ConvergenceReport rep;
    rep.kind = "time";
    rep.norms = {"field_max_t", "density_l2_final", "density_l2_max_t"};
    rep.reference = "self-reference N = " + std::to_string(N_ref) + ", same mesh";
    auto run_n = [&](int N) {
        RunConfig c = base;
        c.N = N;
        c.points = {base.points[0]};
        auto o = simulate_config(c);
        if (log) log("N = " + std::to_string(N) + " done in " + format_double(o.result.seconds) + " s");
        return o;
    };
    RunOutcome ref = run_n(N_ref);
    if (ref.result.targets.distance[0] < 0.5)
        rep.notes.push_back("target closer than 0.5 to the boundary");
    RTSpace sp(ref.mesh);
    SparseD mass = assemble_mass(sp);
    const int n = sp.ndof();
    double peak = 0, dpeak = 0;
    for (int k = 0; k <= N_ref; ++k) {
        peak = std::max(peak, ref.result.E(k, 0).norm());
        dpeak = std::max(dpeak, density_l2(mass, ref.result.density_at(k), n));
    }
    for (int N : Ns) {
        RunOutcome o = run_n(N);
        int f = N_ref / N;
        double ef = 0, ed = 0;
        for (int k = 0; k <= N; ++k) {
            ef = std::max(ef, (o.result.E(k, 0) - ref.result.E(k * f, 0)).norm());
            ed = std::max(ed, density_l2(mass, o.result.density_at(k) - ref.result.density_at(k * f), n));
        }
        double efin = density_l2(mass, o.result.density_at(N) - ref.result.density_at(N_ref), n);
        ConvergenceRow r;
        r.N = N;
        r.level = base.geometry.level;
        r.ndof = n;
        r.step = base.T / N;
        r.errors = {ef / peak, efin / dpeak, ed / dpeak};
        rep.rows.push_back(r);
    }
    rep.finish();
    return rep;
}

// Maps RT functions of a coarser sphere mesh onto points of a finer one (radial projection).
class SphereTransfer {
public:
    SphereTransfer(const SurfaceMesh& coarse, const SurfaceMesh& fine) : coarse_(&coarse), fine_(&fine)
    {
        owner_.resize(fine.nt());
        for (int t = 0; t < fine.nt(); ++t) {
            Vec3 x = fine.centroid(t);
            owner_[t] = locate(x);
            if (owner_[t] < 0) throw ConfigError("sphere transfer: point outside every coarse cone");
        }
    }

    int owner(int fine_tri) const { return owner_[fine_tri]; }

    // x on the fine triangle -> same ray on the owning coarse triangle's plane
    Vec3 project(int fine_tri, const Vec3& x) const
    {
        int t = owner_[fine_tri];
        const Vec3& nrm = coarse_->normals[t];
        return x * (nrm.dot(coarse_->vertex(t, 0)) / nrm.dot(x));
    }

private:
    int locate(const Vec3& x) const
    {
        const auto& m = *coarse_;
        int best = -1;
        double best_score = -1e300;
        for (int t = 0; t < m.nt(); ++t) {
            Vec3 a = m.vertex(t, 0), b = m.vertex(t, 1), c = m.vertex(t, 2);
            double o = a.dot(b.cross(c)) > 0 ? 1.0 : -1.0;
            double s = std::min({o * x.dot(a.cross(b)), o * x.dot(b.cross(c)), o * x.dot(c.cross(a))});
            if (s > best_score) {
                best_score = s;
                best = t;
            }
        }
        return best_score >= -1e-10 ? best : -1;
    }

    const SurfaceMesh* coarse_;
    const SurfaceMesh* fine_;
    std::vector<int> owner_;
};

struct SpaceError {
    double l2 = 0;
    double graph = 0; // sqrt(L2^2 + ||div||^2)
};

// || u_c - u_f || over the fine mesh, vectors compared in the tangent plane of the sphere.
inline SpaceError transfer_error(const RTSpace& coarse, const RTSpace& fine, const SphereTransfer& tr,
                                 const Eigen::VectorXd& uc, const Eigen::VectorXd& uf)
{
    const auto& fm = *fine.mesh;
    auto rule = quad::dunavant(7);
    CVec cc = uc.cast<cplx>(), cf = uf.cast<cplx>();
    double l2 = 0, dv = 0;
    for (int t = 0; t < fm.nt(); ++t) {
        int tc = tr.owner(t);
        double d = (coarse.evaluate_div(cc, tc) - fine.evaluate_div(cf, t)).real();
        dv += d * d * fm.areas[t];
        for (size_t q = 0; q < rule.w.size(); ++q) {
            Vec3 x = fine.point(t, rule.p[q][0], rule.p[q][1]);
            Vec3 xh = x.normalized();
            Vec3 a = coarse.evaluate(cc, tc, tr.project(t, x)).real();
            Vec3 b = fine.evaluate(cf, t, x).real();
            Vec3 e = a - b;
            e -= xh * xh.dot(e);
            l2 += rule.w[q] * 2 * fm.areas[t] * e.squaredNorm();
        }
    }
    return {std::sqrt(l2), std::sqrt(l2 + dv)};
}

// Density errors of sphere levels against a finer reference level at fixed N: L2(Gamma) and
// graph-norm surrogate, max over t_n, relative to max_t of the reference norm.
inline ConvergenceReport converge_space(const RunConfig& base, std::vector<int> levels, int ref_level,
                                        const std::function<void(const std::string&)>& log = {})
{
    if (base.geometry.kind != "sphere") throw ConfigError("converge_space: needs geometry.kind = sphere");
    if (levels.empty()) throw ConfigError("converge_space: empty level list");
    for (int l : levels)
        if (l >= ref_level) throw ConfigError("converge_space: reference level must exceed every level");
    ConvergenceReport rep;
    rep.kind = "space";
    rep.norms = {"density_l2_max_t", "density_graph_max_t", "density_l2_final"};
    rep.reference = "self-reference sphere level " + std::to_string(ref_level) + ", N = " + std::to_string(base.N);
    rep.notes.push_back("L2(Gamma) and L2 + divergence surrogates of the trace norm; the exact trace norm is not computed");
    auto run_level = [&](int l) {
        RunConfig c = base;
        c.geometry.level = l;
        c.points.clear();
        auto o = simulate_config(c);
        if (log) log("level " + std::to_string(l) + " done in " + format_double(o.result.seconds) + " s");
        return o;
    };
    RunOutcome ref = run_level(ref_level);
    RTSpace fsp(ref.mesh);
    const int nf = fsp.ndof();
    const int N = ref.grid.N;
    std::vector<double> ref_l2(N + 1), ref_graph(N + 1);
    double rmax = 0, gmax = 0;
    {
        // norms of the reference through the same evaluation path (zero coarse function)
        SphereTransfer self(ref.mesh, ref.mesh);
        for (int k = 0; k <= N; ++k) {
            double l2 = 0, gr = 0;
            for (int b = 0; b < 4; ++b) {
                Eigen::VectorXd uf = ref.result.density_at(k).segment(b * nf, nf);
                auto e = transfer_error(fsp, fsp, self, Eigen::VectorXd::Zero(nf), uf);
                l2 += e.l2 * e.l2;
                gr += e.graph * e.graph;
            }
            rmax = std::max(rmax, std::sqrt(l2));
            gmax = std::max(gmax, std::sqrt(gr));
        }
    }
    for (int l : levels) {
        RunOutcome o = run_level(l);
        RTSpace csp(o.mesh);
        const int nc = csp.ndof();
        SphereTransfer tr(o.mesh, ref.mesh);
        double el2 = 0, egr = 0, efin = 0;
        for (int k = 0; k <= N; ++k) {
            double l2 = 0, gr = 0;
            for (int b = 0; b < 4; ++b) {
                auto e = transfer_error(csp, fsp, tr, o.result.density_at(k).segment(b * nc, nc),
                                        ref.result.density_at(k).segment(b * nf, nf));
                l2 += e.l2 * e.l2;
                gr += e.graph * e.graph;
            }
            el2 = std::max(el2, std::sqrt(l2));
            egr = std::max(egr, std::sqrt(gr));
            if (k == N) efin = std::sqrt(l2);
        }
        ConvergenceRow r;
        r.level = l;
        r.N = N;
        r.ndof = nc;
        r.step = o.mesh.h;
        r.errors = {el2 / rmax, egr / gmax, efin / rmax};
        rep.rows.push_back(r);
    }
    rep.finish();
    return rep;
}

// RT0 interpolation ladder for a smooth tangential field (no solve); calibrates the space harness.
inline ConvergenceReport interpolation_ladder(const std::vector<int>& levels, const TangentialField& f)
{
    ConvergenceReport rep;
    rep.kind = "space";
    rep.norms = {"interpolation_l2"};
    rep.reference = "exact field";
    for (int l : levels) {
        auto m = icosphere(l);
        RTSpace sp(m);
        CVec c = rt_interpolate(sp, f);
        ConvergenceRow r;
        r.level = l;
        r.ndof = sp.ndof();
        r.step = m.h;
        r.errors = {l2_error(sp, c, f)};
        rep.rows.push_back(r);
    }
    rep.finish();
    return rep;
}

} // namespace dcq
