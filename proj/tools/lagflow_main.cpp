#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lagflow/classifier.hpp"
#include "lagflow/families.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/geometry.hpp"
#include "lagflow/report.hpp"

using namespace lagflow;
using nlohmann::json;

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream f(out_path);
        if (!f) throw BadParams("cannot open output path " + out_path);
        f << text << "\n";
    }
}

int fail_json(const std::string& kind, const std::string& message, int code) {
    json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    std::cout << j.dump(2) << "\n";
    return code;
}

std::map<std::string, double> parse_tols(const std::vector<std::string>& kvs) {
    std::map<std::string, double> tols;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw BadParams("tolerance override must be NAME=VALUE, got '" + kv + "'");
        try {
            tols[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw BadParams("bad tolerance value in '" + kv + "'");
        }
    }
    return tols;
}

SurfaceModel load_surface(const std::string& spec, const std::string& mode) {
    SurfaceModel surf = make_surface(spec);
    if (mode == "fd") surf = surf.with_mode(JetMode::FiniteDifference);
    return surf;
}

int cmd_verify(const std::string& spec, const std::string& mode, int grid,
               const std::vector<std::string>& tol_kvs, const std::string& out) {
    const SurfaceModel surf = load_surface(spec, mode);
    const GeometryReport rep = verify_surface(surf, grid, parse_tols(tol_kvs));
    emit(report_json(rep), out);
    return rep.pass ? 0 : 1;
}

int cmd_quadrature(const std::string& spec, int grid, bool willmore, const std::string& out) {
    const SurfaceModel surf = load_surface(spec, "analytic");
    const double q = willmore ? willmore_integral(surf, surf.cell, grid)
                              : area_integral(surf, surf.cell, grid);
    json j;
    j["label"] = surf.spec.label;
    j["grid"] = grid;
    j["quantity"] = willmore ? "willmore" : "area";
    j["quadrature"] = q;
    const auto cf = willmore ? closed_form_willmore(surf) : closed_form_area(surf);
    if (cf) {
        j["closed_form"] = *cf;
        j["rel_error"] = std::abs(q - *cf) / std::abs(*cf);
    }
    emit(j.dump(2), out);
    return 0;
}

int cmd_classify(const std::string& spec, const std::string& out) {
    const SurfaceModel surf = load_surface(spec, "analytic");
    const RoundTrip rt = roundtrip_congruence(surf);
    json j;
    j["label"] = surf.spec.label;
    j["branch"] = branch_name(rt.cls.branch);
    j["family"] = family_name(rt.cls.kind);
    j["a"] = rt.cls.a;
    j["shape"] = rt.cls.shape;
    j["congruence_residual"] = rt.residual;
    json u = json::array();
    for (const auto& c : rt.congruence.u) u.push_back({c.real(), c.imag()});
    j["unitary"] = u;
    emit(j.dump(2), out);
    return 0;
}

int cmd_flow(const std::string& spec, int grid, double dt, double t_end,
             const std::string& out) {
    const SurfaceModel surf = load_surface(spec, "analytic");
    FlowState st = init_flow(surf, grid, grid);
    FlowOptions opts;
    opts.dt = dt;
    const FlowSummary sum = run_flow(st, t_end, opts);

    json j;
    j["label"] = surf.spec.label;
    j["grid"] = grid;
    j["dt"] = dt;
    j["t_end"] = t_end;
    j["termination"] = sum.termination;
    j["initial_area"] = st.initial_area;
    if (sum.extinction_estimate) j["extinction_estimate"] = *sum.extinction_estimate;
    const FlowSample& last = sum.samples.back();
    j["final"] = {{"time", last.time},
                  {"area", last.area},
                  {"max_H", last.max_H},
                  {"ss_error", last.ss_error}};
    j["sample_count"] = sum.samples.size();

    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw BadParams("cannot open output path " + out);
        f << "time,area,max_H,ss_error\n";
        for (const auto& s : sum.samples)
            f << fmt17(s.time) << ',' << fmt17(s.area) << ',' << fmt17(s.max_H) << ','
              << fmt17(s.ss_error) << "\n";
        j["trajectory_file"] = out;
    } else {
        json tr = json::array();
        for (const auto& s : sum.samples)
            tr.push_back({s.time, s.area, s.max_H, s.ss_error});
        j["trajectory"] = tr;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_sample(const std::string& spec, int grid, const std::string& format,
               const std::string& projection, const std::string& out) {
    const SurfaceModel surf = load_surface(spec, "analytic");
    const int n = grid;
    const bool ps = surf.cell.periodic_u1, pt = surf.cell.periodic_u2;

    std::vector<std::array<double, 2>> params;
    std::vector<Complex2> pts;
    params.reserve(static_cast<size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double fa = ps ? static_cast<double>(i) / n : static_cast<double>(i) / (n - 1);
            const double fb = pt ? static_cast<double>(j) / n : static_cast<double>(j) / (n - 1);
            const auto p = surf.cell.map(fa, fb);
            params.push_back(p);
            pts.push_back(surf.position(p[0], p[1]));
        }
    }

    if (format == "csv" || format == "json") {
        std::ostringstream os;
        if (format == "csv") {
            os << "s,t,x1,y1,x2,y2\n";
            for (size_t k = 0; k < pts.size(); ++k)
                os << fmt17(params[k][0]) << ',' << fmt17(params[k][1]) << ','
                   << fmt17(pts[k].z1.real()) << ',' << fmt17(pts[k].z1.imag()) << ','
                   << fmt17(pts[k].z2.real()) << ',' << fmt17(pts[k].z2.imag()) << "\n";
            std::string text = os.str();
            text.pop_back();  // emit() appends the final newline
            emit(text, out);
        } else {
            json j;
            j["label"] = surf.spec.label;
            j["columns"] = {"s", "t", "x1", "y1", "x2", "y2"};
            json rows = json::array();
            for (size_t k = 0; k < pts.size(); ++k)
                rows.push_back({params[k][0], params[k][1], pts[k].z1.real(), pts[k].z1.imag(),
                                pts[k].z2.real(), pts[k].z2.imag()});
            j["points"] = rows;
            emit(j.dump(2), out);
        }
        return 0;
    }

    // OBJ: project R^4 -> R^3 and triangulate the grid, wrapping faces
    // around the periodic directions.
    if (out.empty()) throw BadParams("obj export needs --out");
    double radius = 0.0;
    std::ostringstream os;
    os << "# lagflow surface export: " << surf.spec.label << "\n";
    if (projection == "stereographic") {
        for (const auto& p : pts) radius = std::max(radius, lagflow::norm(p));
        radius *= 1.25;
        for (const auto& p : pts) {
            const double denom = radius - p.z2.imag();
            const double f = radius / std::max(denom, 0.01 * radius);
            os << "v " << fmt17(f * p.z1.real()) << ' ' << fmt17(f * p.z1.imag()) << ' '
               << fmt17(f * p.z2.real()) << "\n";
        }
    } else {
        for (const auto& p : pts)
            os << "v " << fmt17(p.z1.real()) << ' ' << fmt17(p.z1.imag()) << ' '
               << fmt17(p.z2.real()) << "\n";
    }
    const int ncs = ps ? n : n - 1, nct = pt ? n : n - 1;
    for (int j = 0; j < nct; ++j) {
        for (int i = 0; i < ncs; ++i) {
            const int i1 = (i + 1) % n, j1 = (j + 1) % n;
            os << "f " << (1 + i + n * j) << ' ' << (1 + i1 + n * j) << ' '
               << (1 + i1 + n * j1) << ' ' << (1 + i + n * j1) << "\n";
        }
    }
    {
        std::ofstream f(out);
        if (!f) throw BadParams("cannot open output path " + out);
        f << os.str();
    }
    json meta;
    meta["label"] = surf.spec.label;
    meta["rows"] = n;
    meta["cols"] = n;
    meta["periodic"] = {ps, pt};
    if (projection == "stereographic")
        meta["projection"] = {{"type", "stereographic"}, {"pole_axis", "y2"}, {"radius", radius}};
    else
        meta["projection"] = {{"type", "drop_y2"}};
    std::ofstream mf(out + ".json");
    if (!mf) throw BadParams("cannot open output path " + out + ".json");
    mf << meta.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-similar and Hamiltonian stationary Lagrangian surfaces in C^2: "
                 "construction, verification, classification and mean curvature flow"};
    app.require_subcommand(1);

    std::string spec, mode = "analytic", format = "csv", projection = "drop_y2", out;
    int grid = 64, quad_grid = 256;
    double dt = 1e-4, t_end = 1.0;
    std::vector<std::string> tol_kvs;

    auto* verify = app.add_subcommand("verify", "residual sweep with pass/fail report");
    verify->add_option("spec", spec, "family spec, e.g. clifford:a=-0.5")->required();
    verify->add_option("--grid", grid, "sample resolution per direction");
    verify->add_option("--mode", mode, "jet source")->check(CLI::IsMember({"analytic", "fd"}));
    verify->add_option("--tol", tol_kvs, "override NAME=VALUE, repeatable");
    verify->add_option("--out", out, "write the report here instead of stdout");

    auto* area = app.add_subcommand("area", "quadrature area vs closed form");
    area->add_option("spec", spec)->required();
    area->add_option("--grid", quad_grid);
    area->add_option("--out", out);

    auto* willmore = app.add_subcommand("willmore", "quadrature Willmore energy vs closed form");
    willmore->add_option("spec", spec)->required();
    willmore->add_option("--grid", quad_grid);
    willmore->add_option("--out", out);

    auto* classify = app.add_subcommand("classify", "profile branch and recovered parameters");
    classify->add_option("spec", spec)->required();
    classify->add_option("--out", out);

    auto* flow = app.add_subcommand("flow", "discrete mean curvature flow run");
    flow->add_option("spec", spec)->required();
    flow->add_option("--grid", grid, "nodes per direction");
    flow->add_option("--dt", dt, "time step");
    flow->add_option("--t-end", t_end, "target time");
    flow->add_option("--out", out, "trajectory CSV path (summary JSON on stdout)");

    auto* sample = app.add_subcommand("sample", "point cloud export");
    sample->add_option("spec", spec)->required();
    sample->add_option("--grid", grid, "nodes per direction");
    sample->add_option("--format", format)->check(CLI::IsMember({"csv", "json", "obj"}));
    sample->add_option("--projection", projection, "R4 -> R3 map for obj")
        ->check(CLI::IsMember({"drop_y2", "stereographic"}));
    sample->add_option("--out", out, "output path (required for obj)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*verify) return cmd_verify(spec, mode, grid, tol_kvs, out);
        if (*area) return cmd_quadrature(spec, quad_grid, false, out);
        if (*willmore) return cmd_quadrature(spec, quad_grid, true, out);
        if (*classify) return cmd_classify(spec, out);
        if (*flow) return cmd_flow(spec, grid, dt, t_end, out);
        if (*sample) return cmd_sample(spec, grid, format, projection, out);
    } catch (const BadParams& e) {
        return fail_json(e.kind, e.what(), 2);
    } catch (const BadResolution& e) {
        return fail_json(e.kind, e.what(), 2);
    } catch (const Error& e) {
        return fail_json(e.kind, e.what(), 1);
    } catch (const std::exception& e) {
        return fail_json("Internal", e.what(), 1);
    }
    return 2;
}
