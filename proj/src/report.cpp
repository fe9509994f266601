#include "lagflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "lagflow/classifier.hpp"
#include "lagflow/geometry.hpp"

namespace lagflow {

namespace {

bool is_family(FamilyKind k) {
    return k == FamilyKind::Phi || k == FamilyKind::Upsilon || k == FamilyKind::Psi ||
           k == FamilyKind::Clifford || k == FamilyKind::Cylinder;
}

double default_tol(const std::string& name, bool analytic) {
    static const std::map<std::string, std::pair<double, double>> table = {
        // name -> {analytic, fd}
        {"lagrangian", {1e-12, 1e-6}},
        {"conformal", {1e-10, 1e-6}},
        {"soliton", {1e-8, 1e-4}},
        {"angle_gradient", {1e-8, 1e-5}},
        {"monotonicity", {1e-8, 1e-5}},
        {"angle_laplacian", {1e-4, 1e-3}},
        {"divergence", {1e-4, 1e-3}},
        {"hopf_h_spread", {1e-8, 1e-5}},
        {"structure", {1e-8, 1e-8}},
    };
    const auto it = table.find(name);
    if (it == table.end()) return 1e-8;
    return analytic ? it->second.first : it->second.second;
}

}  // namespace

GeometryReport verify_surface(const SurfaceModel& surf, int grid,
                              const std::map<std::string, double>& tol_overrides) {
    GeometryReport rep;
    rep.label = surf.spec.label;
    rep.family = family_name(surf.spec.kind);
    rep.a = surf.spec.a;
    rep.grid = grid;
    const bool analytic = surf.mode == JetMode::Analytic && surf.has_analytic();
    rep.mode = analytic ? "analytic" : "fd";

    const FamilyKind kind = surf.spec.kind;
    const bool soliton_like =
        is_family(kind) || (kind == FamilyKind::Custom && surf.spec.a != 0.0);
    const bool has_grad = static_cast<bool>(surf.beta_gradient);

    double lag = 0.0, conf = 0.0, sol = 0.0, grad = 0.0, mono = 0.0, lap = 0.0, divg = 0.0;
    double h_min = std::numeric_limits<double>::infinity(), h_max = 0.0;
    for (int jj = 0; jj < grid; ++jj) {
        for (int ii = 0; ii < grid; ++ii) {
            const auto p = surf.cell.map((ii + 0.5) / grid, (jj + 0.5) / grid);
            const Jet j = surf.jet(p[0], p[1]);
            const MetricData g = metric(j);
            require_nondegenerate(g);
            lag = std::max(lag, lagrangian_defect(j));
            conf = std::max(conf, g.conformal_defect);
            if (soliton_like) {
                sol = std::max(sol, self_similar_residual(j, surf.spec.a) /
                                        (1.0 + norm(j.phi)));
                divg = std::max(divg,
                                divergence_identity_defect(surf, p[0], p[1], 1e-3));
            }
            if (has_grad) {
                const auto db = surf.beta_gradient(p[0], p[1]);
                grad = std::max(grad, angle_gradient_defect(j, db));
                if (soliton_like)
                    mono = std::max(mono, angle_liouville_defect(j, db, surf.spec.a));
            }
            lap = std::max(lap, std::abs(angle_laplacian(surf, p[0], p[1], 1e-2)));
            if (is_family(kind) || kind == FamilyKind::Cone) {
                const double ah = std::abs(hopf_forms(j, 1e-3).h);
                h_min = std::min(h_min, ah);
                h_max = std::max(h_max, ah);
            }
        }
    }

    const auto add = [&](const std::string& name, double value) {
        ResidualEntry e;
        e.value = value;
        const auto ov = tol_overrides.find(name);
        e.tol = ov != tol_overrides.end() ? ov->second : default_tol(name, analytic);
        e.pass = value <= e.tol;
        rep.residuals[name] = e;
    };

    add("lagrangian", lag);
    add("conformal", conf);
    add("angle_laplacian", lap);
    if (soliton_like) {
        add("soliton", sol);
        add("divergence", divg);
    }
    if (has_grad) {
        add("angle_gradient", grad);
        if (soliton_like) add("monotonicity", mono);
    }
    if (is_family(kind) || kind == FamilyKind::Cone)
        add("hopf_h_spread", h_max > 0.0 ? (h_max - h_min) / h_max : 0.0);

    if (is_family(kind) && analytic) {
        const ProfileState ps = profile_from_family(surf);
        double worst = 0.0;
        for (int jj = 0; jj < 5; ++jj) {
            for (int ii = 0; ii < 5; ++ii) {
                const auto p = surf.cell.map((ii + 0.5) / 5.0, (jj + 0.5) / 5.0);
                for (const auto& [k, v] : structure_defects(surf, ps, p[0], p[1]))
                    worst = std::max(worst, v);
            }
        }
        add("structure", worst);
    }

    rep.pass = std::all_of(rep.residuals.begin(), rep.residuals.end(),
                           [](const auto& kv) { return kv.second.pass; });
    return rep;
}

std::string report_json(const GeometryReport& rep, int indent) {
    nlohmann::json j;
    j["label"] = rep.label;
    j["family"] = rep.family;
    j["mode"] = rep.mode;
    j["a"] = rep.a;
    j["grid"] = rep.grid;
    j["pass"] = rep.pass;
    nlohmann::json res = nlohmann::json::object();
    for (const auto& [name, e] : rep.residuals)
        res[name] = {{"value", e.value}, {"tol", e.tol}, {"pass", e.pass}};
    j["residuals"] = res;
    return j.dump(indent);
}

}  // namespace lagflow
