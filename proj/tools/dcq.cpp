// dcq: command-line front end. Exit codes: 0 ok, 2 configuration error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include <dcq/experiments.hpp>
#include <dcq/scalar_oracle.hpp>
#include <dcq/sphere_oracle.hpp>

using namespace dcq;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;

// stdout unless a path is given
struct Sink {
    std::unique_ptr<std::ofstream> file;
    std::ostream* out = &std::cout;

    explicit Sink(const std::string& path)
    {
        if (path.empty() || path == "-") return;
        file = std::make_unique<std::ofstream>(path);
        if (!*file) throw ConfigError("cannot write " + path);
        out = file.get();
    }
    std::ostream& operator*() { return *out; }
};

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void log_line(const std::string& s) { std::cerr << s << std::endl; }

int materials_check(const std::string& config, const std::string& side, const std::string& law, const std::string& out)
{
    MaterialPair p;
    if (!law.empty()) {
        json j;
        try {
            j = json::parse(law);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("--law: ") + e.what());
        }
        p.epsilon = law_from_json(j, "law");
        p.mu = MaterialSymbol::vacuum();
    } else {
        RunConfig c = config_or_default(config);
        if (side == "interior")
            p = c.interior;
        else if (side == "exterior")
            p = c.exterior;
        else
            throw ConfigError("--side must be interior or exterior");
    }
    Sink sink(out);
    *sink << "s_re,s_im,margin_eps,margin_mu,re_wavenumber\n";
    double worst = 1e300;
    for (cplx s : passivity_audit_grid()) {
        double me = passivity_margin(p.epsilon, s), mm = passivity_margin(p.mu, s);
        worst = std::min({worst, me, mm});
        *sink << format_double(s.real()) << ',' << format_double(s.imag()) << ',' << format_double(me) << ','
              << format_double(mm) << ',' << format_double(wavenumber(p, s).real()) << '\n';
    }
    if (worst < -1e-12) {
        std::cerr << "passivity margin " << worst << " below -1e-12\n";
        return kNumerical;
    }
    return kOk;
}

int cq_weights_cmd(const std::string& symbol, int m, int N, double T, const std::string& out)
{
    auto k = oracle::scalar_symbol(symbol);
    if (N < 1 || !(T > 0)) throw ConfigError("need N >= 1 and T > 0");
    auto tab = radau_tableau(m);
    auto w = cq_weights_scalar(k, tab, T / N, N);
    Sink sink(out);
    *sink << "n,re,im\n";
    // last-stage row sum: the weight acting on stage-constant data, the scalar weight for m = 1
    for (int n = 0; n <= N; ++n)
        *sink << n << ',' << format_double(w.W[n].row(m - 1).sum()) << ',' << format_double(0.0) << '\n';
    return kOk;
}

int cq_test_scalar(int m, const std::vector<int>& Ns, double T, double expect, const std::string& out)
{
    auto rows = oracle::integral_order_study(m, Ns, T);
    Sink sink(out);
    *sink << "tau,error,order\n";
    std::vector<double> x, e;
    for (size_t i = 0; i < rows.size(); ++i) {
        *sink << format_double(rows[i].tau) << ',' << format_double(rows[i].error) << ',';
        if (i > 0) *sink << format_double(std::log2(rows[i - 1].error / rows[i].error) / std::log2(rows[i - 1].tau / rows[i].tau));
        *sink << '\n';
        x.push_back(rows[i].tau);
        e.push_back(rows[i].error);
    }
    if (rows.size() >= 2) {
        auto f = fit_order(x, e);
        std::cerr << "fitted order " << f.slope << " +- " << f.stderr_ << '\n';
        if (expect > 0 && f.slope < expect) return kNumerical;
    }
    return kOk;
}

int oracle_mie(const std::string& config, double sre, double sim, int lmax, const std::string& out)
{
    RunConfig c = config_or_default(config);
    sphere::PlaneWave w;
    w.p = c.incident.p;
    w.d = c.incident.d;
    auto sol = sphere::mie_solve(cplx(sre, sim), c.interior, c.exterior, w, lmax);
    double mx = 0;
    for (int l = 1; l <= lmax; ++l) mx = std::max(mx, sol.modal_norm[l]);
    Sink sink(out);
    *sink << "ell,pol,re,im,tail\n";
    for (int l = 1; l <= lmax; ++l)
        for (int p = 0; p < 2; ++p) {
            cplx a = sol.coeff[l][p].a;
            *sink << l << ',' << (p == 0 ? "TE" : "TM") << ',' << format_double(a.real()) << ','
                  << format_double(a.imag()) << ',' << format_double(mx > 0 ? sol.modal_norm[l] / mx : 0.0) << '\n';
        }
    std::cerr << "tail ratio " << sol.tail << '\n';
    return kOk;
}

int mesh_info(const std::string& config, const std::string& file, int level, const std::string& dofs)
{
    SurfaceMesh m;
    if (!file.empty())
        m = load_mesh(file);
    else if (level >= 0)
        m = icosphere(level);
    else
        m = make_mesh(config_or_default(config).geometry);
    double area = 0;
    for (double a : m.areas) area += a;
    std::cout << "vertices " << m.nv() << "\nedges " << m.ne() << "\ntriangles " << m.nt() << "\neuler "
              << m.euler() << "\ncomponents " << m.n_components << "\nh " << format_double(m.h) << "\nmax_edge "
              << format_double(m.max_edge) << "\narea " << format_double(area) << "\nvolume "
              << format_double(m.signed_volume()) << "\nrt0_dofs " << m.ne() << '\n';
    if (!dofs.empty()) {
        std::ofstream o(dofs);
        if (!o) throw ConfigError("cannot write " + dofs);
        write_dof_table(o, m);
    }
    return kOk;
}

void print_summary(const RunOutcome& o)
{
    int skipped = 0;
    for (const auto& r : o.result.records) skipped += r.skipped;
    std::cout << "config_hash " << o.manifest["config_hash"].get<std::string>() << "\nedges " << o.mesh.ne()
              << "\nsteps " << o.grid.N << "\nfrequency_solves " << o.result.records.size() - skipped
              << "\nskipped_nodes " << skipped << "\nseconds " << format_double(o.result.seconds) << '\n';
    for (const auto& w : o.result.warnings) std::cerr << "warning: " << w << '\n';
}

int run_cmd(const std::string& config, const std::string& out_dir)
{
    RunConfig c = load_config(config);
    if (!out_dir.empty()) c.out_dir = out_dir;
    auto o = run(c);
    print_summary(o);
    return kOk;
}

int slice_cmd(const std::string& config, const std::string& out_dir, const std::string& file)
{
    RunConfig c = load_config(config);
    if (!out_dir.empty()) c.out_dir = out_dir;
    c.plane.enabled = true;
    c.fields_file = file;
    c.write_density = false;
    auto o = run(c, true);
    print_summary(o);
    return kOk;
}

int converge_time_cmd(const std::string& config, const std::vector<int>& Ns, int ref, const std::string& out,
                      const std::string& report)
{
    RunConfig c = load_config(config);
    auto rep = converge_time(c, Ns, ref, log_line);
    {
        Sink sink(out);
        rep.write_order_csv(*sink, 0);
    }
    if (!report.empty()) {
        std::ofstream r(report);
        if (!r) throw ConfigError("cannot write " + report);
        r << rep.to_json().dump(2) << '\n';
    }
    for (size_t k = 0; k < rep.norms.size(); ++k)
        std::cerr << rep.norms[k] << " slope " << rep.fits[k].slope << " +- " << rep.fits[k].stderr_ << '\n';
    for (const auto& n : rep.notes) std::cerr << "note: " << n << '\n';
    return kOk;
}

int converge_space_cmd(const std::string& config, const std::vector<int>& levels, int ref, const std::string& out,
                       const std::string& report)
{
    RunConfig c = load_config(config);
    auto rep = converge_space(c, levels, ref, log_line);
    {
        Sink sink(out);
        rep.write_csv(*sink);
    }
    if (!report.empty()) {
        std::ofstream r(report);
        if (!r) throw ConfigError("cannot write " + report);
        r << rep.to_json().dump(2) << '\n';
    }
    for (size_t k = 0; k < rep.norms.size(); ++k)
        std::cerr << rep.norms[k] << " slope " << rep.fits[k].slope << " +- " << rep.fits[k].stderr_ << '\n';
    for (const auto& n : rep.notes) std::cerr << "note: " << n << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"dcq: CQ boundary element solver for dispersive electromagnetic scattering"};
    app.require_subcommand(1);
    std::function<int()> action;

    auto* materials = app.add_subcommand("materials", "material law utilities");
    materials->require_subcommand(1);
    auto* mcheck = materials->add_subcommand("check", "passivity audit over the standard grid");
    std::string m_config, m_side = "interior", m_law, m_out;
    mcheck->add_option("--config", m_config, "run configuration (materials block)");
    mcheck->add_option("--side", m_side, "interior or exterior");
    mcheck->add_option("--law", m_law, "single law as JSON, e.g. {\"kind\":\"drude\",\"omega_d\":1,\"gamma_d\":1}");
    mcheck->add_option("-o,--out", m_out, "CSV path (default stdout)");
    mcheck->callback([&] { action = [&] { return materials_check(m_config, m_side, m_law, m_out); }; });

    auto* cq = app.add_subcommand("cq", "convolution quadrature utilities");
    cq->require_subcommand(1);
    auto* cqw = cq->add_subcommand("weights", "scalar CQ weights");
    std::string w_symbol = "inv", w_out;
    int w_m = 2, w_N = 16;
    double w_T = 1;
    cqw->add_option("--symbol", w_symbol, "inv, s, sqrt, invsqrt, exp, frac:<a>");
    cqw->add_option("--stages", w_m, "Radau IIA stages")->check(CLI::Range(1, 3));
    cqw->add_option("--N", w_N, "number of steps");
    cqw->add_option("--T", w_T, "final time");
    cqw->add_option("-o,--out", w_out, "CSV path (default stdout)");
    cqw->callback([&] { action = [&] { return cq_weights_cmd(w_symbol, w_m, w_N, w_T, w_out); }; });

    auto* cqt = cq->add_subcommand("test-scalar", "order study of 1/s on t^4 e^-t against its antiderivative");
    int t_m = 2;
    std::vector<int> t_Ns{16, 32, 64, 128};
    double t_T = 2, t_expect = 0;
    std::string t_out;
    cqt->add_option("--stages", t_m, "Radau IIA stages")->check(CLI::Range(1, 3));
    cqt->add_option("--Ns", t_Ns, "step counts")->delimiter(',');
    cqt->add_option("--T", t_T, "final time");
    cqt->add_option("--expect", t_expect, "exit 3 if the fitted order is below this");
    cqt->add_option("-o,--out", t_out, "CSV path (default stdout)");
    cqt->callback([&] { action = [&] { return cq_test_scalar(t_m, t_Ns, t_T, t_expect, t_out); }; });

    auto* orc = app.add_subcommand("oracle", "reference solutions");
    orc->require_subcommand(1);
    auto* mie = orc->add_subcommand("mie", "Mie coefficients of the penetrable unit sphere");
    std::string o_config, o_out;
    double o_sre = 1, o_sim = 0;
    int o_lmax = 15;
    mie->add_option("--config", o_config, "run configuration (materials, incident)");
    mie->add_option("--s-re", o_sre, "Re s");
    mie->add_option("--s-im", o_sim, "Im s");
    mie->add_option("--lmax", o_lmax, "maximum degree")->check(CLI::Range(1, 60));
    mie->add_option("-o,--out", o_out, "CSV path (default stdout)");
    mie->callback([&] { action = [&] { return oracle_mie(o_config, o_sre, o_sim, o_lmax, o_out); }; });

    auto* mesh = app.add_subcommand("mesh", "mesh utilities");
    mesh->require_subcommand(1);
    auto* minfo = mesh->add_subcommand("info", "mesh statistics");
    std::string mi_config, mi_file, mi_dofs;
    int mi_level = -1;
    minfo->add_option("--config", mi_config, "run configuration (geometry)");
    minfo->add_option("--file", mi_file, "OFF or Gmsh v2 mesh");
    minfo->add_option("--level", mi_level, "icosphere level");
    minfo->add_option("--dofs", mi_dofs, "write the edge/DOF table here");
    minfo->callback([&] { action = [&] { return mesh_info(mi_config, mi_file, mi_level, mi_dofs); }; });

    auto* runc = app.add_subcommand("run", "full scattering run");
    std::string r_config, r_out;
    runc->add_option("config", r_config, "run configuration")->required();
    runc->add_option("--out-dir", r_out, "override outputs.dir");
    runc->callback([&] { action = [&] { return run_cmd(r_config, r_out); }; });

    auto* ct = app.add_subcommand("converge-time", "time convergence against a finer-N self-reference");
    std::string ct_config, ct_out, ct_report;
    std::vector<int> ct_Ns{16, 32, 64, 128};
    int ct_ref = 256;
    ct->add_option("config", ct_config, "run configuration")->required();
    ct->add_option("--Ns", ct_Ns, "step counts")->delimiter(',');
    ct->add_option("--ref", ct_ref, "reference step count");
    ct->add_option("-o,--out", ct_out, "CSV path (default stdout)");
    ct->add_option("--report", ct_report, "JSON report path");
    ct->callback([&] { action = [&] { return converge_time_cmd(ct_config, ct_Ns, ct_ref, ct_out, ct_report); }; });

    auto* cs = app.add_subcommand("converge-space", "space convergence against a finer sphere level");
    std::string cs_config, cs_out, cs_report;
    std::vector<int> cs_levels{0, 1, 2};
    int cs_ref = 3;
    cs->add_option("config", cs_config, "run configuration")->required();
    cs->add_option("--levels", cs_levels, "sphere levels")->delimiter(',');
    cs->add_option("--ref", cs_ref, "reference level");
    cs->add_option("-o,--out", cs_out, "CSV path (default stdout)");
    cs->add_option("--report", cs_report, "JSON report path");
    cs->callback([&] { action = [&] { return converge_space_cmd(cs_config, cs_levels, cs_ref, cs_out, cs_report); }; });

    auto* sl = app.add_subcommand("slice", "fields on the configured plane grid");
    std::string sl_config, sl_out, sl_file = "slice.csv";
    sl->add_option("config", sl_config, "run configuration")->required();
    sl->add_option("--out-dir", sl_out, "override outputs.dir");
    sl->add_option("--file", sl_file, "CSV file name inside the output directory");
    sl->callback([&] { action = [&] { return slice_cmd(sl_config, sl_out, sl_file); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    try {
        return action ? action() : kConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return kNumerical;
    }
}
