#include "lagflow/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace lagflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

Complex2 scale(double c, const Complex2& v) { return Complex2{c * v.z1, c * v.z2}; }

}  // namespace

std::string branch_name(ProfileBranch b) {
    switch (b) {
        case ProfileBranch::BandEPositive: return "band_E_positive";
        case ProfileBranch::FlatCylinder: return "flat_cylinder";
        case ProfileBranch::WaveENegative: return "wave_E_negative";
        case ProfileBranch::ProductTorus: return "product_torus";
    }
    return "unknown";
}

double ProfileState::g(double y) const {
    if (branch == ProfileBranch::FlatCylinder) return g0 - (2.0 * mu * mu / a) * y * y;
    const double m = mu * mu / (a * E);
    if (E > 0.0) return m + (g0 - m) * std::cosh(2.0 * std::sqrt(E) * y);
    return m + (g0 - m) * std::cos(2.0 * std::sqrt(-E) * y);
}

double ProfileState::g_prime(double y) const {
    if (branch == ProfileBranch::FlatCylinder) return -(4.0 * mu * mu / a) * y;
    const double m = mu * mu / (a * E);
    if (E > 0.0) {
        const double w = 2.0 * std::sqrt(E);
        return (g0 - m) * w * std::sinh(w * y);
    }
    const double w = 2.0 * std::sqrt(-E);
    return -(g0 - m) * w * std::sin(w * y);
}

double ProfileState::e2u(double y) const { return E * g(y) - 2.0 * mu * mu / a; }

namespace {

// Evaluate the jet with the profile coordinate in the slot given by axis.
Jet axis_jet(const SurfaceModel& surf, int axis, double fixed, double y) {
    return (axis == 0) ? surf.jet(y, fixed) : surf.jet(fixed, y);
}

struct AxisJet {
    Complex2 phi, phi_x, phi_y, phi_yy, phi_xy;
};

AxisJet oriented(const Jet& j, int axis) {
    if (axis == 0) return {j.phi, j.phi_t, j.phi_s, j.phi_ss, j.phi_st};
    return {j.phi, j.phi_s, j.phi_t, j.phi_tt, j.phi_st};
}

}  // namespace

ProfileState profile_from_family(const SurfaceModel& surf, const ProfileOptions& opts) {
    if (surf.spec.a == 0.0) throw BadParams("profile extraction requires nonzero a");
    const int n = std::max(opts.grid, 8);

    // Pass 1: cubic-form constancy and directional variation of g and e2u.
    Complex h_sum = 0.0;
    std::vector<Complex> h_samples;
    h_samples.reserve(static_cast<size_t>(n) * n);
    double var_s = 0.0, var_t = 0.0, g_scale = 0.0;
    double g_min = std::numeric_limits<double>::infinity();
    std::array<double, 2> argmin{0.0, 0.0};
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const auto st = surf.cell.map(i / double(n), j / double(n));
            const Jet jet = surf.jet(st[0], st[1]);
            const HopfForms hf = hopf_forms(jet, opts.conf_tol);
            h_sum += hf.h;
            h_samples.push_back(hf.h);
            const double g = norm2(jet.phi);
            g_scale = std::max(g_scale, g);
            if (g < g_min) {
                g_min = g;
                argmin = st;
            }
            var_s += std::abs(2.0 * inner(jet.phi, jet.phi_s)) +
                     std::abs(2.0 * inner(jet.phi_t, jet.phi_st));
            var_t += std::abs(2.0 * inner(jet.phi, jet.phi_t)) +
                     std::abs(2.0 * inner(jet.phi_s, jet.phi_st));
        }
    }
    const Complex h_mean = h_sum / double(n * n);
    const double mu0 = std::abs(h_mean);
    if (!(mu0 > 0.0)) throw NotHSL("vanishing cubic form magnitude");
    double h_spread = 0.0;
    for (const Complex& h : h_samples) h_spread = std::max(h_spread, std::abs(h - h_mean));
    if (h_spread > opts.h_tol_rel * mu0) {
        throw NotHSL("cubic form magnitude varies across the surface (relative spread " +
                     std::to_string(h_spread / mu0) + ")");
    }

    ProfileState ps;
    ps.a = surf.spec.a;

    // Directional variation decides the profile coordinate; both flat means a
    // homogeneous surface with no profile at all.
    const double var_scale = double(n * n) * std::max(g_scale, 1e-300);
    const bool flat_s = var_s < 1e-9 * var_scale;
    const bool flat_t = var_t < 1e-9 * var_scale;
    if (flat_s && flat_t) {
        ps.profile_axis = -1;
        ps.base = surf.cell.map(0.0, 0.0);
        const Jet j0 = surf.jet(ps.base[0], ps.base[1]);
        ps.alpha = metric(j0).conformal_factor;
        ps.g0 = norm2(j0.phi);
        ps.mu = std::abs(hopf_forms(j0, opts.conf_tol).h);
        ps.h_phase = std::arg(h_mean);
    } else {
        ps.profile_axis = (var_t >= var_s) ? 1 : 0;
        const double fixed = (ps.profile_axis == 0) ? argmin[1] : argmin[0];
        double y = (ps.profile_axis == 0) ? argmin[0] : argmin[1];

        // Range of the profile coordinate seen by the sampling, with margin.
        double y_lo = y, y_hi = y;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const auto st = surf.cell.map(i / double(n), j / double(n));
                const double yy = (ps.profile_axis == 0) ? st[0] : st[1];
                y_lo = std::min(y_lo, yy);
                y_hi = std::max(y_hi, yy);
            }
        }
        const double margin = (y_hi - y_lo) / n + 1e-12;
        y_lo -= 2.0 * margin;
        y_hi += 2.0 * margin;

        // Newton on g'(y) = 0 with exact derivatives from the jet.
        bool converged = false;
        for (int it = 0; it < 60; ++it) {
            const AxisJet aj = oriented(axis_jet(surf, ps.profile_axis, fixed, y), ps.profile_axis);
            const double gp = 2.0 * inner(aj.phi, aj.phi_y);
            const double gpp = 2.0 * (inner(aj.phi_y, aj.phi_y) + inner(aj.phi, aj.phi_yy));
            if (!(std::abs(gpp) > 1e-14 * std::max(g_scale, 1.0))) break;
            const double dy = gp / gpp;
            y -= dy;
            if (y < y_lo || y > y_hi) throw NoExtremum("profile minimum escapes the cell");
            if (std::abs(dy) < 1e-14 * (1.0 + std::abs(y))) {
                converged = gpp > 0.0;
                break;
            }
        }
        if (!converged) throw NoExtremum("no interior minimum of |phi|^2 along the profile");

        ps.base = (ps.profile_axis == 0) ? std::array<double, 2>{y, fixed}
                                         : std::array<double, 2>{fixed, y};
        const Jet j0 = surf.jet(ps.base[0], ps.base[1]);
        ps.alpha = metric(j0).conformal_factor;
        ps.g0 = norm2(j0.phi);
        ps.mu = std::abs(hopf_forms(j0, opts.conf_tol).h);
        ps.h_phase = std::arg(h_mean);
    }

    const double aa = ps.a * ps.alpha;
    ps.E = aa * (2.0 + aa / (ps.mu * ps.mu));
    const double eps = opts.eps_E_rel * ps.mu * ps.mu;
    if (ps.E > eps) {
        ps.branch = ProfileBranch::BandEPositive;
    } else if (std::abs(ps.E) <= eps) {
        ps.branch = ProfileBranch::FlatCylinder;
    } else if (std::abs(ps.E + ps.mu * ps.mu) <= eps) {
        ps.branch = ProfileBranch::ProductTorus;
    } else {
        ps.branch = ProfileBranch::WaveENegative;
    }
    return ps;
}

std::map<std::string, double> structure_defects(const SurfaceModel& surf, const ProfileState& ps,
                                                double s, double t, double fd_step) {
    const int axis = (ps.profile_axis == -1) ? 1 : ps.profile_axis;
    const double fixed = (axis == 0) ? t : s;
    const double y0 = (axis == 0) ? s : t;
    const double mu = ps.mu, a = ps.a, E = ps.E;
    // Lenient conformality gate so that deliberately broken inputs still
    // reach the residuals instead of being rejected up front.
    const double conf_gate = 0.05;
    const Complex frame = std::exp(Complex(0.0, -ps.h_phase));
    const Complex frame3 = std::exp(Complex(0.0, 3.0 * ps.h_phase));

    struct Sample {
        double g, e2u, u, fn;
        Complex hp;
    };
    auto sample = [&](double y) {
        const Jet j = axis_jet(surf, axis, fixed, y);
        const HopfForms hf = hopf_forms(j, conf_gate);
        Sample r;
        r.g = norm2(j.phi);
        r.e2u = hf.e2u;
        r.u = 0.5 * std::log(hf.e2u);
        r.fn = (frame3 * hf.f).real();
        r.hp = frame * hf.h;
        return r;
    };

    const double h = fd_step;
    const Sample c0 = sample(y0);
    const Sample p1 = sample(y0 + h), p2 = sample(y0 + 2.0 * h);
    const Sample m1 = sample(y0 - h), m2 = sample(y0 - 2.0 * h);
    auto d1 = [&](auto field) {
        return (-field(p2) + 8.0 * field(p1) - 8.0 * field(m1) + field(m2)) / (12.0 * h);
    };
    auto d2 = [&](auto field) {
        return (-field(p2) + 16.0 * field(p1) - 30.0 * field(c0) + 16.0 * field(m1) -
                field(m2)) /
               (12.0 * h * h);
    };

    const AxisJet aj = oriented(axis_jet(surf, axis, fixed, y0), axis);
    const double g = c0.g;
    const double gp = 2.0 * inner(aj.phi, aj.phi_y);
    const double gpp = 2.0 * (inner(aj.phi_y, aj.phi_y) + inner(aj.phi, aj.phi_yy));
    const double e2u = c0.e2u;
    const double e2up = 2.0 * inner(aj.phi_x, aj.phi_xy);
    const double up = e2up / (2.0 * e2u);
    const double upp = d2([](const Sample& x) { return x.u; });
    const double fn = c0.fn;
    const double fnp = d1([](const Sample& x) { return x.fn; });
    const Complex hpp = Complex(d1([](const Sample& x) { return x.hp.real(); }),
                                d1([](const Sample& x) { return x.hp.imag(); }));

    const double em2u = 1.0 / e2u, em4u = em2u * em2u;
    const double mu2 = mu * mu;

    std::map<std::string, double> res;
    res["gauss"] = std::abs(upp + 0.5 * (mu2 - em4u * fn * fn));
    res["h_profile_real"] = 0.5 * std::abs(hpp.real());
    res["h_soliton"] = std::abs(Complex(0.0, -0.5) * hpp + a * 0.5 * gp * c0.hp.imag());
    res["f_growth"] = std::abs(fnp - 2.0 * mu * up * e2u);
    res["g_laplace"] = std::abs(0.25 * gpp - mu2 / a - e2u);
    res["g_holomorphic"] =
        std::abs(-0.25 * gpp + 0.5 * up * gp - (mu2 + mu * em2u * fn) / (2.0 * a));
    res["g_second"] = std::abs(gpp - 4.0 * (mu2 / a + e2u));
    res["f_from_g"] = std::abs(fn - (e2u / mu) * (a * up * gp - 0.5 * a * gpp - mu2));
    res["g_gradient"] = std::abs(g - em2u * (0.25 * gp * gp + mu2 / (a * a)));
    res["g_wronskian"] = std::abs(a * a * (g * gpp - gp * gp) - 4.0 * mu2 * (1.0 + a * g));
    res["g_energy"] =
        std::abs(gp * gp - (4.0 * E * g * g - (8.0 * mu2 / a) * g - 4.0 * mu2 / (a * a)));
    res["conformal_from_g"] = std::abs(e2u - (E * g - 2.0 * mu2 / a));
    res["u_energy"] = std::abs(up * up - (2.0 * mu2 * E / a) * em2u +
                               (mu2 * E * E / (a * a)) * em4u - E);
    res["u_second"] = std::abs(upp + (2.0 * mu2 * E / a) * em2u -
                               (2.0 * mu2 * E * E / (a * a)) * em4u);
    res["f_identity"] = std::abs(fn - mu * (e2u - 2.0 * E / a));
    return res;
}

namespace {

// 14-dimensional moving-frame state.
struct FrenetState {
    double u = 0.0, up = 0.0;
    Complex2 p{}, px{}, py{};
};

FrenetState axpy(const FrenetState& s, double c, const FrenetState& d) {
    return {s.u + c * d.u, s.up + c * d.up, s.p + scale(c, d.p), s.px + scale(c, d.px),
            s.py + scale(c, d.py)};
}

struct FrenetCoeffs {
    double mu, E, a;
};

FrenetState rhs_y(const FrenetCoeffs& c, const FrenetState& s) {
    const double em2u = std::exp(-2.0 * s.u);
    const double k = c.mu * c.E / c.a * em2u;
    FrenetState d;
    d.u = s.up;
    d.up = -(2.0 * c.mu * c.mu * c.E / c.a) * em2u +
           (2.0 * c.mu * c.mu * c.E * c.E / (c.a * c.a)) * em2u * em2u;
    d.p = s.py;
    d.px = scale(s.up, s.px) + scale(k, applyJ(s.py));
    d.py = scale(s.up, s.py) + scale(k, applyJ(s.px));
    return d;
}

FrenetState rhs_x(const FrenetCoeffs& c, const FrenetState& s) {
    const double em2u = std::exp(-2.0 * s.u);
    const double k = c.mu * c.E / c.a * em2u;
    FrenetState d;
    d.p = s.px;
    d.px = scale(-s.up, s.py) + scale(2.0 * c.mu - k, applyJ(s.px));
    d.py = scale(s.up, s.px) + scale(k, applyJ(s.py));
    return d;
}

template <typename Rhs>
FrenetState rk4(const Rhs& f, const FrenetState& s, double h) {
    const FrenetState k1 = f(s);
    const FrenetState k2 = f(axpy(s, 0.5 * h, k1));
    const FrenetState k3 = f(axpy(s, 0.5 * h, k2));
    const FrenetState k4 = f(axpy(s, h, k3));
    FrenetState out = axpy(s, h / 6.0, k1);
    out = axpy(out, h / 3.0, k2);
    out = axpy(out, h / 3.0, k3);
    out = axpy(out, h / 6.0, k4);
    return out;
}

FrenetState initial_state(const ProfileState& ps) {
    const double sa = std::sqrt(ps.alpha);
    FrenetState s;
    s.u = 0.5 * std::log(ps.alpha);
    s.up = 0.0;
    s.p = Complex2{Complex(0.0, ps.mu / (ps.a * sa)), Complex(0.0, 0.0)};
    s.px = Complex2{Complex(sa, 0.0), Complex(0.0, 0.0)};
    s.py = Complex2{Complex(0.0, 0.0), Complex(sa, 0.0)};
    return s;
}

}  // namespace

FrenetPatch integrate_frenet(const ProfileState& ps, double x_len, double y_len, double step,
                             double err_tol) {
    if (!(step > 0.0) || !(x_len > 0.0) || !(y_len > 0.0)) {
        throw BadParams("frenet integration needs positive lengths and step");
    }
    const FrenetCoeffs co{ps.mu, ps.E, ps.a};
    const int nx = std::max(1, static_cast<int>(std::lround(x_len / step)));
    const int ny = std::max(1, static_cast<int>(std::lround(y_len / step)));
    const double hx = x_len / nx, hy = y_len / ny;

    auto fx = [&](const FrenetState& s) { return rhs_x(co, s); };
    auto fy = [&](const FrenetState& s) { return rhs_y(co, s); };

    auto march = [&](const FrenetState& start, auto rhs, double h, int steps, int substeps,
                     std::vector<FrenetState>* nodes) {
        FrenetState s = start;
        if (nodes) nodes->push_back(s);
        const double hh = h / substeps;
        for (int i = 0; i < steps; ++i) {
            for (int k = 0; k < substeps; ++k) s = rk4(rhs, s, hh);
            if (!std::isfinite(s.u) || !std::isfinite(norm2(s.p))) {
                throw Blowup("frenet state left the finite range");
            }
            if (nodes) nodes->push_back(s);
        }
        return s;
    };

    FrenetPatch patch;
    patch.nx = nx + 1;
    patch.ny = ny + 1;
    patch.step = step;
    patch.phi.resize(static_cast<size_t>(patch.nx) * patch.ny);

    std::vector<FrenetState> row;
    row.reserve(nx + 1);
    march(initial_state(ps), fx, hx, nx, 1, &row);
    for (int ix = 0; ix <= nx; ++ix) {
        std::vector<FrenetState> col;
        col.reserve(ny + 1);
        march(row[ix], fy, hy, ny, 1, &col);
        for (int iy = 0; iy <= ny; ++iy) {
            patch.phi[static_cast<size_t>(ix) + static_cast<size_t>(patch.nx) * iy] = col[iy].p;
        }
    }

    // Half-step rerun along the bottom row and the final column bounds the
    // global error of the one-step scheme.
    std::vector<FrenetState> row2;
    row2.reserve(nx + 1);
    march(initial_state(ps), fx, hx, nx, 2, &row2);
    double err_x = 0.0;
    for (int ix = 0; ix <= nx; ++ix) err_x = std::max(err_x, norm(row[ix].p - row2[ix].p));
    std::vector<FrenetState> col1, col2;
    march(row[nx], fy, hy, ny, 1, &col1);
    march(row2[nx], fy, hy, ny, 2, &col2);
    double err_y = 0.0;
    for (int iy = 0; iy <= ny; ++iy) err_y = std::max(err_y, norm(col1[iy].p - col2[iy].p));
    patch.error_estimate = std::max(err_x / x_len, err_y / y_len);
    if (patch.error_estimate > err_tol) {
        throw StepTooLarge("frenet error estimate " + std::to_string(patch.error_estimate) +
                           " per unit length exceeds tolerance");
    }
    return patch;
}

Complex2 closed_form_frenet(const ProfileState& ps, double x, double y) {
    const double sa = std::sqrt(ps.alpha);
    const Complex c1 = Complex(0.0, ps.mu / (ps.a * sa)) *
                       std::exp(Complex(0.0, -ps.a * ps.alpha * x / ps.mu));
    const Complex rot2 = std::exp(Complex(0.0, ps.mu * ps.E * x / (ps.a * ps.alpha)));
    if (ps.branch == ProfileBranch::FlatCylinder) {
        const Complex circle =
            sa * (std::exp(Complex(0.0, 2.0 * ps.mu * x)) - 1.0) / Complex(0.0, 2.0 * ps.mu);
        return Complex2{Complex(0.0, ps.mu / (ps.a * sa)) + circle, Complex(sa * y, 0.0)};
    }
    if (ps.E > 0.0) {
        const double w = std::sqrt(ps.E);
        return Complex2{c1 * std::cosh(w * y), (sa / w) * std::sinh(w * y) * rot2};
    }
    const double w = std::sqrt(-ps.E);
    return Complex2{c1 * std::cos(w * y), (sa / w) * std::sin(w * y) * rot2};
}

Classification classify(const ProfileState& ps) {
    Classification out;
    out.branch = ps.branch;
    out.a = ps.a;
    const double mu2 = ps.mu * ps.mu;
    const double eps = 1e-9 * mu2;
    switch (ps.branch) {
        case ProfileBranch::BandEPositive: {
            if (ps.a > 0.0) {
                const double s2 = 2.0 * ps.a * ps.g0;
                if (!(s2 > 0.0)) throw OutOfRange("band shape needs 2a g(0) > 0");
                out.kind = FamilyKind::Phi;
                out.shape = std::asinh(std::sqrt(s2));
            } else {
                const double s2 = -2.0 * ps.a * ps.g0;
                if (!(s2 > 0.0) || s2 >= 1.0) {
                    throw OutOfRange(
                        "band shape with a < 0 needs 0 < g(0) < -1/(2a); measured " +
                        std::to_string(ps.g0));
                }
                out.kind = FamilyKind::Upsilon;
                out.shape = std::asin(std::sqrt(s2));
            }
            break;
        }
        case ProfileBranch::FlatCylinder: {
            if (ps.a > 0.0) throw OutOfRange("vanishing energy requires a < 0");
            out.kind = FamilyKind::Cylinder;
            out.shape = 0.0;
            break;
        }
        case ProfileBranch::ProductTorus: {
            out.kind = FamilyKind::Clifford;
            out.shape = 0.0;
            break;
        }
        case ProfileBranch::WaveENegative: {
            if (ps.a > 0.0) throw OutOfRange("negative energy requires a < 0");
            if (ps.E < -mu2 - eps) {
                throw OutOfRange("energy below the homogeneous bound -mu^2");
            }
            const double c2 = -2.0 * ps.a * ps.g0;
            if (!(c2 > 1.0)) {
                throw OutOfRange("wave shape needs g(0) > -1/(2a); measured " +
                                 std::to_string(ps.g0));
            }
            out.kind = FamilyKind::Psi;
            out.shape = std::acosh(std::sqrt(c2));
            break;
        }
    }
    return out;
}

namespace {

SurfaceModel rebuild_family(const Classification& c) {
    switch (c.kind) {
        case FamilyKind::Phi: return make_phi(c.a, c.shape);
        case FamilyKind::Upsilon: return make_upsilon(c.a, c.shape);
        case FamilyKind::Psi: return make_psi(c.a, c.shape);
        case FamilyKind::Cylinder: return make_cylinder(c.a);
        case FamilyKind::Clifford: return make_clifford(c.a);
        default: throw WrongFamily("no reconstruction for this kind");
    }
}

// Offsets (x, y) of a point from the anchor in the surface's profile frame.
std::array<double, 2> to_frame(const std::array<double, 2>& base, int axis, double s, double t) {
    if (axis == 0) return {t - base[1], s - base[0]};
    return {s - base[0], t - base[1]};
}

std::array<double, 2> from_frame(const std::array<double, 2>& base, int axis, double x,
                                 double y) {
    if (axis == 0) return {base[0] + y, base[1] + x};
    return {base[0] + x, base[1] + y};
}

}  // namespace

RoundTrip roundtrip_congruence(const SurfaceModel& surf, const ProfileOptions& opts) {
    const ProfileState ps = profile_from_family(surf, opts);
    RoundTrip rt;
    rt.cls = classify(ps);
    const SurfaceModel rebuilt = rebuild_family(rt.cls);
    const ProfileState pr = profile_from_family(rebuilt);

    const int ax_s = ps.profile_axis, ax_r = pr.profile_axis;
    std::vector<ParamPairing> candidates;
    for (double sx : {1.0, -1.0}) {
        for (double sy : {1.0, -1.0}) {
            candidates.push_back([=, base_s = ps.base, base_r = pr.base](double s, double t) {
                const auto xy = to_frame(base_s, ax_s, s, t);
                return from_frame(base_r, ax_r, sx * xy[0], sy * xy[1]);
            });
            if (ps.branch == ProfileBranch::ProductTorus) {
                for (auto off : {std::array<double, 2>{0.0, 0.5 * kPi},
                                 std::array<double, 2>{0.0, -0.5 * kPi},
                                 std::array<double, 2>{0.5 * kPi, 0.0},
                                 std::array<double, 2>{0.0, 0.0}}) {
                    candidates.push_back(
                        [=, base_s = ps.base, base_r = pr.base](double s, double t) {
                            const auto xy = to_frame(base_s, ax_s, s, t);
                            const double xr = sx * xy[0] + sy * xy[1] + off[0];
                            const double yr = sy * xy[1] - sx * xy[0] + off[1];
                            return from_frame(base_r, ax_r, xr, yr);
                        });
                }
            }
        }
    }

    rt.residual = std::numeric_limits<double>::infinity();
    for (const auto& pairing : candidates) {
        const Congruence c = unitary_congruence(surf, rebuilt, pairing, surf.cell, 8);
        if (c.residual < rt.residual) {
            rt.residual = c.residual;
            rt.congruence = c;
        }
    }
    return rt;
}

}  // namespace lagflow
