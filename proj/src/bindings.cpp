#include <pybind11/pybind11.h>

#include <string>

#include "json.hpp"
#include "lagflow/classifier.hpp"
#include "lagflow/families.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/geometry.hpp"
#include "lagflow/report.hpp"

namespace py = pybind11;
using namespace lagflow;
using nlohmann::json;

namespace {

SurfaceModel load(const std::string& spec, const std::string& mode) {
    SurfaceModel surf = make_surface(spec);
    if (mode == "fd") surf = surf.with_mode(JetMode::FiniteDifference);
    if (mode != "fd" && mode != "analytic")
        throw BadParams("mode must be 'analytic' or 'fd', got '" + mode + "'");
    return surf;
}

std::string py_verify(const std::string& spec, int grid, const std::string& mode) {
    return report_json(verify_surface(load(spec, mode), grid), -1);
}

std::string py_quadrature(const std::string& spec, int grid, bool willmore) {
    const SurfaceModel surf = load(spec, "analytic");
    json j;
    j["label"] = surf.spec.label;
    j["grid"] = grid;
    j["quantity"] = willmore ? "willmore" : "area";
    j["quadrature"] = willmore ? willmore_integral(surf, surf.cell, grid)
                               : area_integral(surf, surf.cell, grid);
    const auto cf = willmore ? closed_form_willmore(surf) : closed_form_area(surf);
    if (cf) {
        j["closed_form"] = *cf;
        j["rel_error"] = std::abs(j["quadrature"].get<double>() - *cf) / std::abs(*cf);
    }
    return j.dump();
}

std::string py_classify(const std::string& spec) {
    const SurfaceModel surf = load(spec, "analytic");
    const RoundTrip rt = roundtrip_congruence(surf);
    json j;
    j["label"] = surf.spec.label;
    j["branch"] = branch_name(rt.cls.branch);
    j["family"] = family_name(rt.cls.kind);
    j["a"] = rt.cls.a;
    j["shape"] = rt.cls.shape;
    j["congruence_residual"] = rt.residual;
    return j.dump();
}

std::string py_flow(const std::string& spec, int grid, double dt, double t_end) {
    const SurfaceModel surf = load(spec, "analytic");
    FlowState st = init_flow(surf, grid, grid);
    FlowOptions opts;
    opts.dt = dt;
    const FlowSummary sum = run_flow(st, t_end, opts);
    json j;
    j["label"] = surf.spec.label;
    j["termination"] = sum.termination;
    j["initial_area"] = st.initial_area;
    if (sum.extinction_estimate) j["extinction_estimate"] = *sum.extinction_estimate;
    const FlowSample& last = sum.samples.back();
    j["final"] = {{"time", last.time},
                  {"area", last.area},
                  {"max_H", last.max_H},
                  {"ss_error", last.ss_error}};
    json tr = json::array();
    for (const auto& s : sum.samples) tr.push_back({s.time, s.area, s.max_H, s.ss_error});
    j["trajectory"] = tr;
    return j.dump();
}

std::string py_sample(const std::string& spec, int grid) {
    const SurfaceModel surf = load(spec, "analytic");
    const bool ps = surf.cell.periodic_u1, pt = surf.cell.periodic_u2;
    json j;
    j["label"] = surf.spec.label;
    j["columns"] = {"s", "t", "x1", "y1", "x2", "y2"};
    json rows = json::array();
    for (int jj = 0; jj < grid; ++jj) {
        for (int ii = 0; ii < grid; ++ii) {
            const double fa =
                ps ? static_cast<double>(ii) / grid : static_cast<double>(ii) / (grid - 1);
            const double fb =
                pt ? static_cast<double>(jj) / grid : static_cast<double>(jj) / (grid - 1);
            const auto p = surf.cell.map(fa, fb);
            const Complex2 x = surf.position(p[0], p[1]);
            rows.push_back(
                {p[0], p[1], x.z1.real(), x.z1.imag(), x.z2.real(), x.z2.imag()});
        }
    }
    j["points"] = rows;
    return j.dump();
}

}  // namespace

PYBIND11_MODULE(_lagflow, m) {
    m.doc() = "Hamiltonian stationary and self-similar Lagrangian surfaces in C^2: "
              "construction, verification, classification and discrete mean curvature "
              "flow. All entry points take a family spec string and return JSON text.";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const BadParams& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const BadResolution& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, (e.kind + ": " + e.what()).c_str());
        }
    });

    m.def("verify", &py_verify, py::arg("spec"), py::arg("grid") = 64,
          py::arg("mode") = "analytic", "residual sweep report");
    m.def("area", [](const std::string& s, int g) { return py_quadrature(s, g, false); },
          py::arg("spec"), py::arg("grid") = 256, "quadrature area vs closed form");
    m.def("willmore", [](const std::string& s, int g) { return py_quadrature(s, g, true); },
          py::arg("spec"), py::arg("grid") = 256, "quadrature bending energy vs closed form");
    m.def("classify", &py_classify, py::arg("spec"), "profile branch and parameters");
    m.def("flow", &py_flow, py::arg("spec"), py::arg("grid") = 48, py::arg("dt") = 1e-4,
          py::arg("t_end") = 0.1, "discrete mean curvature flow run");
    m.def("sample", &py_sample, py::arg("spec"), py::arg("grid") = 32, "point cloud");
    m.attr("__version__") = "0.1.0";
}
