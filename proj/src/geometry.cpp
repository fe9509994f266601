#include "lagflow/geometry.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace lagflow {

MetricData metric(const Jet& j) {
    MetricData g;
    g.g_ss = inner(j.phi_s, j.phi_s);
    g.g_st = inner(j.phi_s, j.phi_t);
    g.g_tt = inner(j.phi_t, j.phi_t);
    g.det = g.g_ss * g.g_tt - g.g_st * g.g_st;
    const double trace = g.g_ss + g.g_tt;
    g.conformal_factor = 0.5 * trace;
    g.conformal_defect =
        trace > 0.0 ? (std::abs(g.g_ss - g.g_tt) + 2.0 * std::abs(g.g_st)) / trace : 0.0;
    return g;
}

void require_nondegenerate(const MetricData& g, double tol) {
    const double scale = 0.25 * (g.g_ss + g.g_tt) * (g.g_ss + g.g_tt);
    if (!(g.det > tol * scale)) {
        throw DegenerateMetric("metric determinant " + std::to_string(g.det) +
                               " below tolerance at sampled point");
    }
}

double lagrangian_defect(const Jet& j) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    const double w = std::abs(kaehler(j.phi_s, j.phi_t));
    return w / std::sqrt(g.det);
}

Split split_vector(const Jet& j, const Complex2& v) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    const double b_s = inner(v, j.phi_s);
    const double b_t = inner(v, j.phi_t);
    Split sp;
    sp.c_s = (g.g_tt * b_s - g.g_st * b_t) / g.det;
    sp.c_t = (g.g_ss * b_t - g.g_st * b_s) / g.det;
    sp.tangent = sp.c_s * j.phi_s + sp.c_t * j.phi_t;
    sp.normal = v - sp.tangent;
    return sp;
}

Complex2 mean_curvature(const Jet& j) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    const double iss = g.g_tt / g.det;
    const double ist = -g.g_st / g.det;
    const double itt = g.g_ss / g.det;
    const Complex2 traced = iss * j.phi_ss + (2.0 * ist) * j.phi_st + itt * j.phi_tt;
    return 0.5 * split_vector(j, traced).normal;
}

double self_similar_residual(const Jet& j, double a) {
    const Complex2 h = mean_curvature(j);
    const Complex2 nrm = split_vector(j, j.phi).normal;
    return norm(h - a * nrm);
}

double lagrangian_angle(const Jet& j, double lag_tol) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    const Complex det_c = j.phi_s.z1 * j.phi_t.z2 - j.phi_s.z2 * j.phi_t.z1;
    const double root = std::sqrt(g.det);
    if (std::abs(std::abs(det_c) - root) > lag_tol * root) {
        throw NotLagrangian("Lagrangian angle undefined: |det_C| deviates from area element by " +
                            std::to_string(std::abs(std::abs(det_c) - root) / root) +
                            " relative");
    }
    return std::arg(det_c);
}

double angle_gradient_defect(const Jet& j, const std::array<double, 2>& dbeta) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    const double iss = g.g_tt / g.det;
    const double ist = -g.g_st / g.det;
    const double itt = g.g_ss / g.det;
    const double cs = iss * dbeta[0] + ist * dbeta[1];
    const double ct = ist * dbeta[0] + itt * dbeta[1];
    const Complex2 grad = cs * j.phi_s + ct * j.phi_t;
    const Complex2 h = mean_curvature(j);
    return norm(applyJ(grad) - 2.0 * h);
}

std::array<double, 2> liouville_pullback(const Jet& j) {
    const Complex2 jphi = applyJ(j.phi);
    return {inner(jphi, j.phi_s), inner(jphi, j.phi_t)};
}

double angle_liouville_defect(const Jet& j, const std::array<double, 2>& dbeta, double a) {
    const auto lam = liouville_pullback(j);
    return std::max(std::abs(dbeta[0] + 2.0 * a * lam[0]), std::abs(dbeta[1] + 2.0 * a * lam[1]));
}

CubicForm second_fundamental_cubic(const Jet& j) {
    const Complex2 n_ss = split_vector(j, j.phi_ss).normal;
    const Complex2 n_st = split_vector(j, j.phi_st).normal;
    const Complex2 n_tt = split_vector(j, j.phi_tt).normal;
    const Complex2 js = applyJ(j.phi_s);
    const Complex2 jt = applyJ(j.phi_t);

    CubicForm c;
    c.sss = inner(n_ss, js);
    c.ttt = inner(n_tt, jt);
    const double sst_a = inner(n_ss, jt);
    const double sst_b = inner(n_st, js);
    const double stt_a = inner(n_st, jt);
    const double stt_b = inner(n_tt, js);
    c.sst = 0.5 * (sst_a + sst_b);
    c.stt = 0.5 * (stt_a + stt_b);
    c.symmetry_defect = std::max(std::abs(sst_a - sst_b), std::abs(stt_a - stt_b));
    return c;
}

HopfForms hopf_forms(const Jet& j, double conf_tol) {
    const MetricData g = metric(j);
    require_nondegenerate(g);
    if (g.conformal_defect > conf_tol) {
        throw NotConformal("conformal defect " + std::to_string(g.conformal_defect) +
                           " exceeds tolerance " + std::to_string(conf_tol));
    }

    const Complex mi(0.0, -1.0);
    const Complex pi_(0.0, 1.0);
    const CVec4 phz = Complex(0.5) * (CVec4::lift(j.phi_s) + mi * CVec4::lift(j.phi_t));
    const CVec4 phzb = Complex(0.5) * (CVec4::lift(j.phi_s) + pi_ * CVec4::lift(j.phi_t));

    const Complex2 n_ss = split_vector(j, j.phi_ss).normal;
    const Complex2 n_st = split_vector(j, j.phi_st).normal;
    const Complex2 n_tt = split_vector(j, j.phi_tt).normal;
    const CVec4 szz = Complex(0.25) * (CVec4::lift(n_ss) + Complex(-1.0) * CVec4::lift(n_tt) +
                                       (Complex(-2.0) * pi_) * CVec4::lift(n_st));

    const Complex2 h = mean_curvature(j);

    HopfForms out;
    out.e2u = g.conformal_factor;
    out.h = 2.0 * cdot(applyJ(phzb), CVec4::lift(h));
    out.f = 4.0 * cdot(szz, applyJ(phz));
    return out;
}

double angle_laplacian(const SurfaceModel& surf, double s, double t, double step) {
    const double c = lagrangian_angle(surf.jet(s, t));
    auto unwrapped = [&](double ss, double tt) {
        const double b = lagrangian_angle(surf.jet(ss, tt));
        return c + std::remainder(b - c, 2.0 * M_PI);
    };
    const double bs_p = unwrapped(s + step, t);
    const double bs_m = unwrapped(s - step, t);
    const double bt_p = unwrapped(s, t + step);
    const double bt_m = unwrapped(s, t - step);
    const double flat = (bs_p + bs_m + bt_p + bt_m - 4.0 * c) / (step * step);
    const MetricData g = metric(surf.jet(s, t));
    return flat / g.conformal_factor;
}

double divergence_identity_defect(const SurfaceModel& surf, double s, double t, double step) {
    if (surf.spec.a == 0.0) {
        throw BadParams("divergence balance needs the soliton constant a of the surface");
    }
    auto flux = [&](double ss, double tt) {
        const Jet j = surf.jet(ss, tt);
        const MetricData g = metric(j);
        require_nondegenerate(g);
        const Split sp = split_vector(j, j.phi);
        const double root = std::sqrt(g.det);
        return std::array<double, 2>{root * sp.c_s, root * sp.c_t};
    };
    const Jet j0 = surf.jet(s, t);
    const MetricData g0 = metric(j0);
    require_nondegenerate(g0);
    const double div = ((flux(s + step, t)[0] - flux(s - step, t)[0]) +
                        (flux(s, t + step)[1] - flux(s, t - step)[1])) /
                       (2.0 * step * std::sqrt(g0.det));
    const double h2 = norm2(mean_curvature(j0));
    return std::abs(div - 2.0 * (1.0 + h2 / surf.spec.a));
}

namespace {

// Trapezoid nodes along one cell direction: periodic directions use n interior
// nodes of weight 1, closed directions n+1 nodes with halved endpoints.
struct QuadAxis {
    int count;
    double weight(int i) const {
        if (periodic) return 1.0;
        return (i == 0 || i == count - 1) ? 0.5 : 1.0;
    }
    double coord(int i) const { return static_cast<double>(i) / n; }
    bool periodic;
    int n;
};

QuadAxis make_axis(int n, bool periodic) {
    QuadAxis ax;
    ax.n = n;
    ax.periodic = periodic;
    ax.count = periodic ? n : n + 1;
    return ax;
}

template <class F>
double cell_quadrature(const SurfaceModel& surf, const Cell& cell, int n, F&& integrand) {
    if (n < 2) throw BadResolution("quadrature resolution must be at least 2");
    const QuadAxis ax_a = make_axis(n, cell.periodic_u1);
    const QuadAxis ax_b = make_axis(n, cell.periodic_u2);
    std::vector<double> row_sums(ax_b.count, 0.0);
    detail::parallel_for(ax_b.count, [&](int ib) {
        double acc = 0.0;
        for (int ia = 0; ia < ax_a.count; ++ia) {
            const auto st = cell.map(ax_a.coord(ia), ax_b.coord(ib));
            acc += ax_a.weight(ia) * ax_b.weight(ib) * integrand(surf.jet(st[0], st[1]));
        }
        row_sums[ib] = acc;
    });
    double total = 0.0;
    for (double r : row_sums) total += r;
    const double dadb = 1.0 / (static_cast<double>(n) * n);
    return total * dadb * cell.param_area();
}

}  // namespace

double area_integral(const SurfaceModel& surf, const Cell& cell, int n) {
    return cell_quadrature(surf, cell, n, [](const Jet& j) {
        const MetricData g = metric(j);
        require_nondegenerate(g);
        return std::sqrt(g.det);
    });
}

double willmore_integral(const SurfaceModel& surf, const Cell& cell, int n) {
    return cell_quadrature(surf, cell, n, [](const Jet& j) {
        const MetricData g = metric(j);
        require_nondegenerate(g);
        return norm2(mean_curvature(j)) * std::sqrt(g.det);
    });
}

double diameter(const SurfaceModel& surf, const Cell& cell, int n) {
    std::vector<Complex2> pts;
    pts.reserve(static_cast<size_t>(n) * n);
    for (int ib = 0; ib < n; ++ib) {
        for (int ia = 0; ia < n; ++ia) {
            const auto st = cell.map((ia + 0.5) / n, (ib + 0.5) / n);
            pts.push_back(surf.position(st[0], st[1]));
        }
    }
    double best = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) {
        for (size_t k = i + 1; k < pts.size(); ++k) {
            best = std::max(best, norm2(pts[i] - pts[k]));
        }
    }
    return std::sqrt(best);
}

namespace detail {

int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("LAGFLOW_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) hw = std::min<long>(v, 256);
    }
    return hw;
}

void parallel_for(int n, const std::function<void(int)>& body) {
    const int budget = std::min(thread_budget(), n);
    if (budget <= 1 || n < 4) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(budget);
    for (int w = 0; w < budget; ++w) {
        pool.emplace_back([&, w]() {
            for (int i = w; i < n; i += budget) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

}  // namespace lagflow
