#include "lagflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lagflow {

namespace {

int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

// Curvature field plus the metric statistics every caller of the update
// loop needs anyway (stability bound, distortion monitor, abort guard).
struct Field {
    std::vector<Complex2> H;
    double min_det = 0.0;
    double max_det = 0.0;
    double max_H = 0.0;
};

[[noreturn]] void throw_degenerate(const char* where, int i, int j) {
    std::ostringstream os;
    os << "metric determinant collapsed at " << where << " (" << i << ", " << j << ")";
    throw DegenerateMetric(os.str());
}

Field curvature_field(const FlowState& st) {
    const int ns = st.ns, nt = st.nt;
    const double ds = st.ds, dtp = st.dtp;
    const bool ps = st.periodic_s, pt = st.periodic_t;
    const double tiny = 1e-280;

    const auto X = [&](int i, int j) -> const Complex2& {
        return st.at(ps ? wrap(i, ns) : i, pt ? wrap(j, nt) : j);
    };

    // Metric-weighted flux through the half-point (i + 1/2, j): the normal
    // part of the s-difference, sqrt(det) g^{s.} grad phi.
    const int nfs = ps ? ns : ns - 1;
    const int jlo = pt ? 0 : 1, jhi = pt ? nt : nt - 1;
    std::vector<Complex2> Fs(static_cast<size_t>(nfs) * nt);
    for (int j = jlo; j < jhi; ++j) {
        for (int i = 0; i < nfs; ++i) {
            const Complex2 es = (1.0 / ds) * (X(i + 1, j) - X(i, j));
            const Complex2 et = (1.0 / (4.0 * dtp)) *
                                (X(i, j + 1) + X(i + 1, j + 1) - X(i, j - 1) - X(i + 1, j - 1));
            const double E = inner(es, es), F = inner(es, et), G = inner(et, et);
            const double det = E * G - F * F;
            if (!(det > tiny)) throw_degenerate("s-edge", i, j);
            Fs[static_cast<size_t>(i) + static_cast<size_t>(nfs) * j] =
                (1.0 / std::sqrt(det)) * (G * es - F * et);
        }
    }

    const int nft = pt ? nt : nt - 1;
    const int ilo = ps ? 0 : 1, ihi = ps ? ns : ns - 1;
    std::vector<Complex2> Ft(static_cast<size_t>(ns) * nft);
    for (int j = 0; j < nft; ++j) {
        for (int i = ilo; i < ihi; ++i) {
            const Complex2 et = (1.0 / dtp) * (X(i, j + 1) - X(i, j));
            const Complex2 es = (1.0 / (4.0 * ds)) *
                                (X(i + 1, j) + X(i + 1, j + 1) - X(i - 1, j) - X(i - 1, j + 1));
            const double E = inner(es, es), F = inner(es, et), G = inner(et, et);
            const double det = E * G - F * F;
            if (!(det > tiny)) throw_degenerate("t-edge", i, j);
            Ft[static_cast<size_t>(i) + static_cast<size_t>(ns) * j] =
                (1.0 / std::sqrt(det)) * (E * et - F * es);
        }
    }

    Field out;
    out.H.assign(static_cast<size_t>(ns) * nt, Complex2{});
    out.min_det = std::numeric_limits<double>::infinity();
    out.max_det = 0.0;
    for (int j = jlo; j < jhi; ++j) {
        for (int i = ilo; i < ihi; ++i) {
            const Complex2 es = (0.5 / ds) * (X(i + 1, j) - X(i - 1, j));
            const Complex2 et = (0.5 / dtp) * (X(i, j + 1) - X(i, j - 1));
            const double E = inner(es, es), F = inner(es, et), G = inner(et, et);
            const double det = E * G - F * F;
            if (!(det > tiny)) throw_degenerate("node", i, j);
            out.min_det = std::min(out.min_det, det);
            out.max_det = std::max(out.max_det, det);

            const int im = ps ? wrap(i - 1, ns) : i - 1;
            const int jm = pt ? wrap(j - 1, nt) : j - 1;
            const Complex2 div =
                (1.0 / ds) * (Fs[static_cast<size_t>(ps ? wrap(i, ns) : i) +
                                 static_cast<size_t>(nfs) * j] -
                              Fs[static_cast<size_t>(im) + static_cast<size_t>(nfs) * j]) +
                (1.0 / dtp) * (Ft[static_cast<size_t>(i) +
                                  static_cast<size_t>(ns) * (pt ? wrap(j, nt) : j)] -
                               Ft[static_cast<size_t>(i) + static_cast<size_t>(ns) * jm]);
            const Complex2 H = (0.5 / std::sqrt(det)) * div;
            out.H[static_cast<size_t>(i) + static_cast<size_t>(ns) * j] = H;
            out.max_H = std::max(out.max_H, norm(H));
        }
    }
    return out;
}

double stable_dt(const FlowState& st, const Field& f, const FlowOptions& opts) {
    const double h = std::min(st.ds, st.dtp);
    return opts.cfl_factor * h * h * std::sqrt(f.min_det);
}

// Forward-Euler update shared by step() and run_flow(). Pinned rows follow
// the exact homothety of the initial positions.
void apply_update(FlowState& st, const Field& f, double dt) {
    const double new_time = st.time + dt;
    double scale = 1.0;
    if (!st.periodic_s || !st.periodic_t) {
        const double sc2 = 2.0 * st.surf.spec.a * new_time + 1.0;
        if (sc2 <= 0.0)
            throw ScaleCollapse("homothety factor 2at+1 reached zero at t = " +
                                std::to_string(new_time));
        scale = std::sqrt(sc2);
    }
    for (size_t k = 0; k < st.grid.size(); ++k) st.grid[k] += dt * f.H[k];
    if (!st.periodic_s) {
        for (int j = 0; j < st.nt; ++j) {
            st.at(0, j) = scale * st.initial[static_cast<size_t>(st.ns) * j];
            st.at(st.ns - 1, j) =
                scale * st.initial[static_cast<size_t>(st.ns - 1) + static_cast<size_t>(st.ns) * j];
        }
    }
    if (!st.periodic_t) {
        for (int i = 0; i < st.ns; ++i) {
            st.at(i, 0) = scale * st.initial[static_cast<size_t>(i)];
            st.at(i, st.nt - 1) =
                scale * st.initial[static_cast<size_t>(i) + static_cast<size_t>(st.ns) * (st.nt - 1)];
        }
    }
    st.time = new_time;
}

// Largest pairwise distance over a coarse subsample of the grid.
double grid_diameter(const FlowState& st) {
    std::vector<Complex2> pts;
    const int stride_i = std::max(1, st.ns / 16), stride_j = std::max(1, st.nt / 16);
    for (int j = 0; j < st.nt; j += stride_j)
        for (int i = 0; i < st.ns; i += stride_i) pts.push_back(st.at(i, j));
    double d2 = 0.0;
    for (size_t a = 0; a < pts.size(); ++a)
        for (size_t b = a + 1; b < pts.size(); ++b) d2 = std::max(d2, norm2(pts[a] - pts[b]));
    return std::sqrt(d2);
}

}  // namespace

FlowState init_flow(const SurfaceModel& surf, int ns, int nt) {
    FlowState st;
    st.surf = surf;
    st.ns = ns;
    st.nt = nt;

    const Cell& c = surf.cell;
    double slen = 0.0, tlen = 0.0;
    if (c.u1[1] == 0.0 && c.u2[0] == 0.0) {
        st.s0 = c.origin[0];
        st.t0 = c.origin[1];
        slen = c.u1[0];
        tlen = c.u2[1];
        st.periodic_s = c.periodic_u1;
        st.periodic_t = c.periodic_u2;
    } else {
        // Skew doubly periodic cell: flow on the rectangular cover spanned
        // by axis-aligned combinations of the lattice translations.
        const auto& tr = surf.lattice.translations;
        if (tr.size() < 2)
            throw BadParams("cell is skew and the lattice has no rectangular cover");
        const double tol = 1e-9 * (std::abs(tr[0][0]) + std::abs(tr[0][1]) + std::abs(tr[1][0]) +
                                   std::abs(tr[1][1]));
        for (int k1 = -4; k1 <= 4; ++k1) {
            for (int k2 = -4; k2 <= 4; ++k2) {
                const double vx = k1 * tr[0][0] + k2 * tr[1][0];
                const double vy = k1 * tr[0][1] + k2 * tr[1][1];
                if (vx > tol && std::abs(vy) <= tol && (slen == 0.0 || vx < slen)) slen = vx;
                if (vy > tol && std::abs(vx) <= tol && (tlen == 0.0 || vy < tlen)) tlen = vy;
            }
        }
        if (slen == 0.0 || tlen == 0.0)
            throw BadParams("no rectangular translation cover within the search window");
        st.s0 = c.origin[0];
        st.t0 = c.origin[1];
        st.periodic_s = true;
        st.periodic_t = true;
    }
    if (slen <= 0.0 || tlen <= 0.0) throw BadParams("flow cell has a non-positive side");

    if ((st.periodic_s && ns < 32) || (st.periodic_t && nt < 32))
        throw BadResolution("compact directions need at least 32 nodes");
    if (ns < 4 || nt < 4) throw BadResolution("grid needs at least 4 nodes per direction");

    st.ds = st.periodic_s ? slen / ns : slen / (ns - 1);
    st.dtp = st.periodic_t ? tlen / nt : tlen / (nt - 1);

    st.grid.resize(static_cast<size_t>(ns) * nt);
    for (int j = 0; j < nt; ++j) {
        for (int i = 0; i < ns; ++i) {
            const auto p = st.param(i, j);
            st.at(i, j) = surf.position(p[0], p[1]);
        }
    }
    st.initial = st.grid;
    st.initial_area = grid_area(st);
    const Field f = curvature_field(st);
    st.initial_det_ratio = f.min_det / f.max_det;
    return st;
}

std::vector<Complex2> discrete_mean_curvature(const FlowState& state) {
    return curvature_field(state).H;
}

void step(FlowState& state, const FlowOptions& opts) {
    const Field f = curvature_field(state);
    const double dt_max = stable_dt(state, f, opts);
    if (opts.dt > dt_max) {
        std::ostringstream os;
        os << "dt = " << opts.dt << " exceeds the stability bound " << dt_max;
        throw StepTooLarge(os.str());
    }
    if (f.max_H > opts.blowup_threshold) {
        std::ostringstream os;
        os << "max |H| = " << f.max_H << " exceeds " << opts.blowup_threshold;
        throw Blowup(os.str());
    }
    apply_update(state, f, opts.dt);
}

double grid_area(const FlowState& state) {
    const int ncs = state.periodic_s ? state.ns : state.ns - 1;
    const int nct = state.periodic_t ? state.nt : state.nt - 1;
    const auto X = [&](int i, int j) -> const Complex2& {
        return state.at(wrap(i, state.ns), wrap(j, state.nt));
    };
    double area = 0.0;
    for (int j = 0; j < nct; ++j) {
        for (int i = 0; i < ncs; ++i) {
            const Complex2 es = (0.5 / state.ds) *
                                (X(i + 1, j) + X(i + 1, j + 1) - X(i, j) - X(i, j + 1));
            const Complex2 et = (0.5 / state.dtp) *
                                (X(i, j + 1) + X(i + 1, j + 1) - X(i, j) - X(i + 1, j));
            const double E = inner(es, es), F = inner(es, et), G = inner(et, et);
            area += std::sqrt(std::max(E * G - F * F, 0.0));
        }
    }
    return area * state.ds * state.dtp;
}

double self_similarity_error(const FlowState& state) {
    const double sc2 = 2.0 * state.surf.spec.a * state.time + 1.0;
    if (sc2 <= 1e-12)
        throw ScaleCollapse("homothety factor 2at+1 vanished; no reference surface to compare");
    const double scale = std::sqrt(sc2);
    const double clamp = 2.0 * std::max(state.ds, state.dtp);

    double worst = 0.0;
    for (int j = 0; j < state.nt; ++j) {
        for (int i = 0; i < state.ns; ++i) {
            const Complex2& X = state.at(i, j);
            auto p = state.param(i, j);
            // Nearest-point projection onto the scaled reference surface,
            // seeded at the node's own parameter: a few Gauss-Newton steps
            // absorb tangential drift.
            double err = 0.0;
            for (int it = 0; it < 4; ++it) {
                const Jet jt = state.surf.jet(p[0], p[1]);
                const Complex2 r = scale * jt.phi - X;
                err = norm(r);
                const Complex2 Js = scale * jt.phi_s, Jt = scale * jt.phi_t;
                const double a11 = inner(Js, Js), a12 = inner(Js, Jt), a22 = inner(Jt, Jt);
                const double b1 = inner(Js, r), b2 = inner(Jt, r);
                const double det = a11 * a22 - a12 * a12;
                if (!(det > 1e-300)) break;
                double d1 = -(a22 * b1 - a12 * b2) / det;
                double d2 = -(a11 * b2 - a12 * b1) / det;
                const double dn = std::hypot(d1, d2);
                if (dn > clamp) {
                    d1 *= clamp / dn;
                    d2 *= clamp / dn;
                }
                p[0] += d1;
                p[1] += d2;
                if (dn < 1e-14) break;
            }
            const Complex2 rf = scale * state.surf.position(p[0], p[1]) - X;
            worst = std::max(worst, std::min(err, norm(rf)));
        }
    }
    const double diam = grid_diameter(state);
    return diam > 0.0 ? worst / diam : worst;
}

FlowSummary run_flow(FlowState& state, double t_end, const FlowOptions& opts) {
    FlowSummary out;
    const int interval = opts.sample_interval > 0
                             ? opts.sample_interval
                             : std::max(1, static_cast<int>(std::llround(t_end / opts.dt / 200.0)));

    const auto push = [&](const Field& f) {
        FlowSample s;
        s.time = state.time;
        s.area = grid_area(state);
        s.max_H = f.max_H;
        s.det_ratio = f.max_det > 0.0 ? f.min_det / f.max_det : 0.0;
        const double sc2 = 2.0 * state.surf.spec.a * state.time + 1.0;
        s.ss_error = sc2 > 1e-12 ? self_similarity_error(state) : -1.0;
        out.samples.push_back(s);
        return s;
    };

    Field f = curvature_field(state);
    push(f);
    out.termination = "t_end";
    long count = 0;
    while (true) {
        if (state.time >= t_end - 0.5 * opts.dt) break;
        if (opts.dt > stable_dt(state, f, opts)) {
            out.termination = "cfl_limit";
            break;
        }
        if (f.max_H > opts.blowup_threshold) {
            std::ostringstream os;
            os << "max |H| = " << f.max_H << " exceeds " << opts.blowup_threshold;
            throw Blowup(os.str());
        }
        if (f.max_det > 0.0 && f.min_det / f.max_det <
                                   state.initial_det_ratio / opts.distortion_limit) {
            out.termination = "distortion";
            break;
        }
        apply_update(state, f, opts.dt);
        ++count;
        f = curvature_field(state);
        if (count % interval == 0) {
            const FlowSample s = push(f);
            if (s.area < opts.extinction_area_ratio * state.initial_area) {
                out.termination = "extinct";
                break;
            }
        }
    }
    if (std::abs(out.samples.back().time - state.time) > 0.25 * opts.dt) push(f);

    // Linear extrapolation of the last few area samples to zero.
    const size_t n = out.samples.size();
    const size_t k = std::min<size_t>(10, n);
    if (k >= 2) {
        double st = 0.0, sa = 0.0, stt = 0.0, sta = 0.0;
        for (size_t q = n - k; q < n; ++q) {
            st += out.samples[q].time;
            sa += out.samples[q].area;
            stt += out.samples[q].time * out.samples[q].time;
            sta += out.samples[q].time * out.samples[q].area;
        }
        const double m = (k * sta - st * sa) / (k * stt - st * st);
        const double c = (sa - m * st) / k;
        if (m < 0.0) out.extinction_estimate = -c / m;
    }
    return out;
}

}  // namespace lagflow
