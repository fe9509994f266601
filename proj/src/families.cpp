#include "lagflow/families.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace lagflow {

std::string family_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::Phi: return "phi";
        case FamilyKind::Upsilon: return "upsilon";
        case FamilyKind::Psi: return "psi";
        case FamilyKind::Clifford: return "clifford";
        case FamilyKind::Cylinder: return "cylinder";
        case FamilyKind::Cone: return "cone";
        case FamilyKind::Custom: return "custom";
    }
    return "custom";
}

std::string quotient_name(Quotient q) {
    switch (q) {
        case Quotient::Plane: return "plane";
        case Quotient::Cylinder: return "cylinder";
        case Quotient::Moebius: return "moebius";
        case Quotient::Torus: return "torus";
        case Quotient::Klein: return "klein";
    }
    return "plane";
}

namespace {

constexpr double kPi = 3.14159265358979323846;
const Complex kI(0.0, 1.0);

std::string fmt_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

void check_finite(double x, const char* name) {
    if (!std::isfinite(x)) throw BadParams(std::string(name) + " must be finite");
}

// Band-type analytic jet: phi = (A cosh t e^{i w1 s}, B sinh t e^{i w2 s}).
std::function<Jet(double, double)> band_jet(Complex A, Complex B, double w1, double w2) {
    return [=](double s, double t) {
        Jet j;
        j.s = s;
        j.t = t;
        const Complex e1 = std::exp(kI * (w1 * s));
        const Complex e2 = std::exp(kI * (w2 * s));
        const Complex c1 = A * std::cosh(t) * e1, s1 = A * std::sinh(t) * e1;
        const Complex c2 = B * std::cosh(t) * e2, s2 = B * std::sinh(t) * e2;
        j.phi = {c1, s2};
        j.phi_s = {kI * w1 * c1, kI * w2 * s2};
        j.phi_t = {s1, c2};
        j.phi_ss = {-w1 * w1 * c1, -w2 * w2 * s2};
        j.phi_st = {kI * w1 * s1, kI * w2 * c2};
        j.phi_tt = {c1, s2};
        return j;
    };
}

// Wave-type analytic jet: phi = (A cos s e^{i w1 t}, B sin s e^{i w2 t}).
std::function<Jet(double, double)> wave_jet(Complex A, Complex B, double w1, double w2) {
    return [=](double s, double t) {
        Jet j;
        j.s = s;
        j.t = t;
        const Complex e1 = std::exp(kI * (w1 * t));
        const Complex e2 = std::exp(kI * (w2 * t));
        const Complex c1 = A * std::cos(s) * e1, s1 = A * std::sin(s) * e1;
        const Complex c2 = B * std::cos(s) * e2, s2 = B * std::sin(s) * e2;
        j.phi = {c1, s2};
        j.phi_s = {-s1, c2};
        j.phi_t = {kI * w1 * c1, kI * w2 * s2};
        j.phi_ss = {-c1, -s2};
        j.phi_st = {-kI * w1 * s1, kI * w2 * c2};
        j.phi_tt = {-w1 * w1 * c1, -w2 * w2 * s2};
        return j;
    };
}

void attach_eval(SurfaceModel& m) {
    auto a = m.analytic;
    m.eval = [a](double s, double t) { return a(s, t).phi; };
}

// Lattice of the band families: s-period 2 pi sqrt(pq) when resonant, plus a
// glide (s + half period, -t) exactly when p is odd and q is even.
void band_lattice(SurfaceModel& m, double t_half_width) {
    if (m.spec.resonance) {
        const double p = static_cast<double>(m.spec.resonance->p);
        const double q = static_cast<double>(m.spec.resonance->q);
        const double S = 2.0 * kPi * std::sqrt(p * q);
        ParamMap tr;
        tr.v = {S, 0.0};
        m.lattice.translations = {{S, 0.0}};
        m.lattice.generators = {tr};
        const bool glide_ok = (m.spec.resonance->p % 2 != 0) && (m.spec.resonance->q % 2 == 0);
        if (glide_ok) {
            ParamMap gl;
            gl.m = {1.0, 0.0, 0.0, -1.0};
            gl.v = {0.5 * S, 0.0};
            m.lattice.generators.push_back(gl);
            m.lattice.quotient = Quotient::Moebius;
        } else {
            m.lattice.quotient = Quotient::Cylinder;
        }
        m.cell = Cell::rect(0.0, S, -t_half_width, t_half_width, true, false);
    } else {
        m.lattice.quotient = Quotient::Plane;
        m.cell = Cell::rect(0.0, 2.0 * kPi, -t_half_width, t_half_width, false, false);
    }
}

SurfaceModel build_phi(double a, double delta, std::optional<Rational> forced) {
    check_finite(a, "a");
    check_finite(delta, "delta");
    if (a <= 0.0) throw BadParams("phi requires a > 0");
    if (delta <= 0.0) throw BadParams("phi requires delta > 0");
    const double K = 1.0 / std::sqrt(2.0 * a);
    const double cd = std::cosh(delta), sd = std::sinh(delta), td = std::tanh(delta);

    SurfaceModel m;
    m.spec.kind = FamilyKind::Phi;
    m.spec.a = a;
    m.spec.shape = delta;
    m.spec.resonance = forced ? forced : detect_rational(cd * cd);
    m.spec.label = "phi:a=" + fmt_num(a) + ",delta=" + fmt_num(delta);

    m.analytic = band_jet(kI * (K * sd), Complex(K * td), -1.0 / cd, cd);
    attach_eval(m);
    const double rate = sd * sd / cd;
    m.beta_gradient = [rate](double, double) { return std::array<double, 2>{rate, 0.0}; };
    band_lattice(m, 2.0);
    return m;
}

SurfaceModel build_upsilon(double a, double gamma, std::optional<Rational> forced) {
    check_finite(a, "a");
    check_finite(gamma, "gamma");
    if (a >= 0.0) throw BadParams("upsilon requires a < 0");
    if (gamma <= 0.0 || gamma >= 0.5 * kPi) throw BadParams("upsilon requires 0 < gamma < pi/2");
    const double K = 1.0 / std::sqrt(-2.0 * a);
    const double cg = std::cos(gamma), sg = std::sin(gamma), tg = std::tan(gamma);

    SurfaceModel m;
    m.spec.kind = FamilyKind::Upsilon;
    m.spec.a = a;
    m.spec.shape = gamma;
    m.spec.resonance = forced ? forced : detect_rational(cg * cg);
    m.spec.label = "upsilon:a=" + fmt_num(a) + ",gamma=" + fmt_num(gamma);

    m.analytic = band_jet(-kI * (K * sg), Complex(K * tg), 1.0 / cg, -cg);
    attach_eval(m);
    const double rate = sg * sg / cg;
    m.beta_gradient = [rate](double, double) { return std::array<double, 2>{rate, 0.0}; };
    band_lattice(m, 2.0);
    return m;
}

SurfaceModel build_psi(double a, double nu, std::optional<Rational> forced) {
    check_finite(a, "a");
    check_finite(nu, "nu");
    if (a >= 0.0) throw BadParams("psi requires a < 0");
    if (nu <= 0.0) throw BadParams("psi requires nu > 0");
    const double K = 1.0 / std::sqrt(-2.0 * a);
    const double cn = std::cosh(nu), sn = std::sinh(nu), tn = 1.0 / std::tanh(nu);

    SurfaceModel m;
    m.spec.kind = FamilyKind::Psi;
    m.spec.a = a;
    m.spec.shape = nu;
    m.spec.resonance = forced ? forced : detect_rational(sn * sn);
    m.spec.label = "psi:a=" + fmt_num(a) + ",nu=" + fmt_num(nu);

    m.analytic = wave_jet(Complex(K * cn), Complex(K * tn), 1.0 / sn, sn);
    attach_eval(m);
    const double rate = cn * cn / sn;
    m.beta_gradient = [rate](double, double) { return std::array<double, 2>{0.0, rate}; };

    ParamMap tr_s;
    tr_s.v = {2.0 * kPi, 0.0};
    if (m.spec.resonance) {
        const long long mm = m.spec.resonance->p, nn = m.spec.resonance->q;
        const double T = 2.0 * kPi * std::sqrt(static_cast<double>(mm) * static_cast<double>(nn));
        if (mm % 2 != 0 && nn % 2 != 0) {
            // Both odd: the skew half-cell translation closes the surface up
            // into a torus of half the naive area.
            ParamMap tr_skew;
            tr_skew.v = {kPi, 0.5 * T};
            m.lattice.translations = {{2.0 * kPi, 0.0}, {kPi, 0.5 * T}};
            m.lattice.generators = {tr_s, tr_skew};
            m.lattice.quotient = Quotient::Torus;
            Cell c;
            c.origin = {0.0, 0.0};
            c.u1 = {2.0 * kPi, 0.0};
            c.u2 = {kPi, 0.5 * T};
            c.periodic_u1 = true;
            c.periodic_u2 = true;
            m.cell = c;
        } else {
            ParamMap tr_t;
            tr_t.v = {0.0, T};
            m.lattice.translations = {{2.0 * kPi, 0.0}, {0.0, T}};
            m.lattice.generators = {tr_s, tr_t};
            ParamMap gl;
            gl.m = {-1.0, 0.0, 0.0, 1.0};
            gl.v = {(mm % 2 == 0) ? kPi : 0.0, 0.5 * T};
            m.lattice.generators.push_back(gl);
            m.lattice.quotient = Quotient::Klein;
            m.cell = Cell::rect(0.0, 2.0 * kPi, 0.0, T, true, true);
        }
    } else {
        m.lattice.translations = {{2.0 * kPi, 0.0}};
        m.lattice.generators = {tr_s};
        m.lattice.quotient = Quotient::Cylinder;
        m.cell = Cell::rect(0.0, 2.0 * kPi, 0.0, 2.0 * kPi, true, false);
    }
    return m;
}

void require_coprime_pair(long long p, long long q, const char* names) {
    if (p < 1 || q < 1) throw BadParams(std::string(names) + " must be positive integers");
    if (std::gcd(p, q) != 1) throw BadParams(std::string(names) + " must be coprime");
}

}  // namespace

std::optional<Rational> detect_rational(double x, long long max_den, double tol) {
    if (!std::isfinite(x)) return std::nullopt;
    const double sign = x < 0.0 ? -1.0 : 1.0;
    double y = std::abs(x);
    const double atol = tol * std::max(1.0, std::abs(x));

    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    for (int it = 0; it < 64; ++it) {
        const double fa = std::floor(y);
        if (fa > 9.0e17 || fa * static_cast<double>(q1) > 9.0e17) break;
        const long long a = static_cast<long long>(fa);
        const long long p2 = a * p1 + p0;
        const long long q2 = a * q1 + q0;
        if (q2 > max_den) break;
        const double approx = static_cast<double>(p2) / static_cast<double>(q2);
        const double err = std::abs(std::abs(x) - approx);
        // Generic continued-fraction convergents already achieve ~1/q^2, so a
        // plain tolerance would tag most irrationals rational near the
        // denominator cap. Demand quality far beyond that baseline, which
        // only values actually built from p/q (error ~ulp) can reach.
        const double generic = 1e-3 * std::max(1.0, std::abs(x)) /
                               (static_cast<double>(q2) * static_cast<double>(q2));
        if (err <= atol && err <= generic) {
            return Rational{static_cast<long long>(sign) * p2, q2};
        }
        const double frac = y - fa;
        if (frac < 1e-18) break;
        y = 1.0 / frac;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    return std::nullopt;
}

SurfaceModel make_phi(double a, double delta) { return build_phi(a, delta, std::nullopt); }

SurfaceModel make_phi(double a, long long p, long long q) {
    require_coprime_pair(p, q, "p, q");
    if (p <= q) throw BadParams("phi resonance requires p > q");
    const double ratio = static_cast<double>(p) / static_cast<double>(q);
    return build_phi(a, std::acosh(std::sqrt(ratio)), Rational{p, q});
}

SurfaceModel make_upsilon(double a, double gamma) { return build_upsilon(a, gamma, std::nullopt); }

SurfaceModel make_upsilon(double a, long long p, long long q) {
    require_coprime_pair(p, q, "p, q");
    if (p >= q) throw BadParams("upsilon resonance requires p < q");
    const double ratio = static_cast<double>(p) / static_cast<double>(q);
    return build_upsilon(a, std::acos(std::sqrt(ratio)), Rational{p, q});
}

SurfaceModel make_psi(double a, double nu) { return build_psi(a, nu, std::nullopt); }

SurfaceModel make_psi(double a, long long m, long long n) {
    require_coprime_pair(m, n, "m, n");
    const double ratio = static_cast<double>(m) / static_cast<double>(n);
    return build_psi(a, std::asinh(std::sqrt(ratio)), Rational{m, n});
}

SurfaceModel make_clifford(double a) {
    check_finite(a, "a");
    if (a >= 0.0) throw BadParams("clifford requires a < 0");
    const double r = 1.0 / std::sqrt(-2.0 * a);

    SurfaceModel m;
    m.spec.kind = FamilyKind::Clifford;
    m.spec.a = a;
    m.spec.label = "clifford:a=" + fmt_num(a);
    m.analytic = [r](double s, double t) {
        Jet j;
        j.s = s;
        j.t = t;
        const Complex e1 = r * std::exp(kI * s);
        const Complex e2 = r * std::exp(kI * t);
        j.phi = {e1, e2};
        j.phi_s = {kI * e1, 0.0};
        j.phi_t = {0.0, kI * e2};
        j.phi_ss = {-e1, 0.0};
        j.phi_st = {0.0, 0.0};
        j.phi_tt = {0.0, -e2};
        return j;
    };
    attach_eval(m);
    m.beta_gradient = [](double, double) { return std::array<double, 2>{1.0, 1.0}; };

    ParamMap t1, t2;
    t1.v = {2.0 * kPi, 0.0};
    t2.v = {0.0, 2.0 * kPi};
    m.lattice.translations = {{2.0 * kPi, 0.0}, {0.0, 2.0 * kPi}};
    m.lattice.generators = {t1, t2};
    m.lattice.quotient = Quotient::Torus;
    m.cell = Cell::rect(0.0, 2.0 * kPi, 0.0, 2.0 * kPi, true, true);
    return m;
}

SurfaceModel make_cylinder(double a) {
    check_finite(a, "a");
    if (a >= 0.0) throw BadParams("cylinder requires a < 0");
    const double r = 1.0 / std::sqrt(-2.0 * a);

    SurfaceModel m;
    m.spec.kind = FamilyKind::Cylinder;
    m.spec.a = a;
    m.spec.label = "cylinder:a=" + fmt_num(a);
    m.analytic = [r](double s, double t) {
        Jet j;
        j.s = s;
        j.t = t;
        const Complex e1 = r * std::exp(kI * s);
        j.phi = {e1, Complex(r * t)};
        j.phi_s = {kI * e1, 0.0};
        j.phi_t = {0.0, Complex(r)};
        j.phi_ss = {-e1, 0.0};
        j.phi_st = {0.0, 0.0};
        j.phi_tt = {0.0, 0.0};
        return j;
    };
    attach_eval(m);
    m.beta_gradient = [](double, double) { return std::array<double, 2>{1.0, 0.0}; };

    ParamMap t1;
    t1.v = {2.0 * kPi, 0.0};
    m.lattice.translations = {{2.0 * kPi, 0.0}};
    m.lattice.generators = {t1};
    m.lattice.quotient = Quotient::Cylinder;
    m.cell = Cell::rect(0.0, 2.0 * kPi, -2.0, 2.0, true, false);
    return m;
}

std::optional<double> closed_form_area(const SurfaceModel& surf) {
    const double a = surf.spec.a;
    if (surf.spec.kind == FamilyKind::Clifford) return -2.0 * kPi * kPi / a;
    if (surf.spec.kind == FamilyKind::Psi && surf.spec.resonance) {
        const double m = static_cast<double>(surf.spec.resonance->p);
        const double n = static_cast<double>(surf.spec.resonance->q);
        double area = kPi * kPi * (m + n) * (m + n) / (-a * std::sqrt(m * n));
        if (surf.spec.resonance->p % 2 != 0 && surf.spec.resonance->q % 2 != 0) area *= 0.5;
        return area;
    }
    return std::nullopt;
}

std::optional<double> closed_form_willmore(const SurfaceModel& surf) {
    if (surf.spec.kind == FamilyKind::Clifford) return 2.0 * kPi * kPi;
    if (surf.spec.kind == FamilyKind::Psi && surf.spec.resonance) {
        const double m = static_cast<double>(surf.spec.resonance->p);
        const double n = static_cast<double>(surf.spec.resonance->q);
        double w = kPi * kPi * (m + n) * (m + n) / std::sqrt(m * n);
        if (surf.spec.resonance->p % 2 != 0 && surf.spec.resonance->q % 2 != 0) w *= 0.5;
        return w;
    }
    return std::nullopt;
}

ConeSpec asymptotic_cone(const SurfaceModel& surf) {
    ConeSpec cone;
    cone.a = surf.spec.a;
    cone.resonance = surf.spec.resonance;
    if (surf.spec.kind == FamilyKind::Phi) {
        cone.c = std::cosh(surf.spec.shape);
        cone.pre1 = kI;
        cone.w1 = -1.0 / cone.c;
        cone.w2 = cone.c;
        return cone;
    }
    if (surf.spec.kind == FamilyKind::Upsilon) {
        cone.c = std::cos(surf.spec.shape);
        cone.pre1 = -kI;
        cone.w1 = 1.0 / cone.c;
        cone.w2 = -cone.c;
        return cone;
    }
    throw WrongFamily("asymptotic cone defined only for the non-compact band families");
}

double cone_distance(const ConeSpec& cone, const Complex2& p, int scan_n) {
    if (scan_n < 8) throw BadResolution("cone scan resolution must be at least 8");
    const double window = 2.0 * kPi * std::max(cone.c, 1.0 / cone.c);
    const double den = cone.c * cone.c + 1.0;
    double best = std::numeric_limits<double>::infinity();
    for (int sheet : {1, -1}) {
        for (int i = 0; i < scan_n; ++i) {
            const double s = window * i / scan_n;
            const Complex2 v = cone.direction(s, sheet);
            const double u = inner(p, v) / den;
            best = std::min(best, norm2(p - u * v));
        }
    }
    return std::sqrt(best);
}

double cone_gap(const SurfaceModel& surf, double t, int n_samples, int scan_n) {
    const ConeSpec cone = asymptotic_cone(surf);
    const double window = 2.0 * kPi * std::max(cone.c, 1.0 / cone.c);
    double worst = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const Complex2 p = surf.position(window * i / n_samples, t);
        worst = std::max(worst, cone_distance(cone, p, scan_n));
    }
    return worst / norm(surf.position(0.0, t));
}

SurfaceModel cone_surface(const ConeSpec& cone, int sheet) {
    if (sheet != 1 && sheet != -1) throw BadParams("cone sheet must be +1 or -1");
    const double n = std::sqrt(cone.c * cone.c + 1.0);
    const Complex A = cone.pre1 * (static_cast<double>(sheet) * cone.c / n);
    const Complex B(1.0 / n);
    const double w1 = cone.w1, w2 = cone.w2;

    SurfaceModel m;
    m.spec.kind = FamilyKind::Cone;
    m.spec.a = cone.a;
    m.spec.shape = cone.c;
    m.spec.resonance = cone.resonance;
    m.spec.label = "cone:a=" + fmt_num(cone.a) + ",c=" + fmt_num(cone.c);
    m.analytic = [=](double s, double rho) {
        Jet j;
        j.s = s;
        j.t = rho;
        const double er = std::exp(rho);
        const Complex z1 = A * er * std::exp(kI * (w1 * s));
        const Complex z2 = B * er * std::exp(kI * (w2 * s));
        j.phi = {z1, z2};
        j.phi_s = {kI * w1 * z1, kI * w2 * z2};
        j.phi_t = j.phi;
        j.phi_ss = {-w1 * w1 * z1, -w2 * w2 * z2};
        j.phi_st = j.phi_s;
        j.phi_tt = j.phi;
        return j;
    };
    attach_eval(m);
    const double rate = w1 + w2;
    m.beta_gradient = [rate](double, double) { return std::array<double, 2>{rate, 0.0}; };

    if (cone.resonance) {
        const double p = static_cast<double>(cone.resonance->p);
        const double q = static_cast<double>(cone.resonance->q);
        const double S = 2.0 * kPi * std::sqrt(p * q);
        ParamMap tr;
        tr.v = {S, 0.0};
        m.lattice.translations = {{S, 0.0}};
        m.lattice.generators = {tr};
        m.lattice.quotient = Quotient::Cylinder;
        m.cell = Cell::rect(0.0, S, -1.0, 1.0, true, false);
    } else {
        m.lattice.quotient = Quotient::Plane;
        m.cell = Cell::rect(0.0, 2.0 * kPi * std::max(cone.c, 1.0 / cone.c), -1.0, 1.0, false,
                            false);
    }
    return m;
}

Complex2 SeparatedForm::eval(double x, double theta) const {
    const double p1 = trig ? std::cos(x) : std::cosh(x);
    const double p2 = trig ? std::sin(x) : std::sinh(x);
    return {amp1 * p1 * std::exp(kI * (static_cast<double>(winding[0]) * theta)),
            amp2 * p2 * std::exp(kI * (static_cast<double>(winding[1]) * theta))};
}

SeparatedForm separated_form(const SurfaceModel& surf) {
    if (!surf.spec.resonance) {
        throw WrongFamily("separated form requires a resonant shape parameter");
    }
    const long long p = surf.spec.resonance->p;
    const long long q = surf.spec.resonance->q;
    const double a = surf.spec.a;
    SeparatedForm f;
    f.theta_scale = std::sqrt(static_cast<double>(p) * static_cast<double>(q));

    switch (surf.spec.kind) {
        case FamilyKind::Phi: {
            const double K = 1.0 / std::sqrt(2.0 * a);
            f.winding = {-q, p};
            f.angle_axis = 0;
            f.d1 = -kI;
            f.d2 = 1.0;
            f.amp1 = K * std::sinh(surf.spec.shape);
            f.amp2 = K * std::tanh(surf.spec.shape);
            f.trig = false;
            f.quadric = {-static_cast<double>(q), static_cast<double>(p),
                         static_cast<double>(q - p) / (2.0 * a)};
            f.embedded = (q == 1);
            return f;
        }
        case FamilyKind::Upsilon: {
            const double K = 1.0 / std::sqrt(-2.0 * a);
            f.winding = {q, -p};
            f.angle_axis = 0;
            f.d1 = kI;
            f.d2 = 1.0;
            f.amp1 = K * std::sin(surf.spec.shape);
            f.amp2 = K * std::tan(surf.spec.shape);
            f.trig = false;
            f.quadric = {static_cast<double>(q), -static_cast<double>(p),
                         static_cast<double>(q - p) / (-2.0 * a)};
            f.embedded = false;
            return f;
        }
        case FamilyKind::Psi: {
            const double K = 1.0 / std::sqrt(-2.0 * a);
            f.winding = {q, p};  // z1 winds n times, z2 winds m times
            f.angle_axis = 1;
            f.d1 = 1.0;
            f.d2 = 1.0;
            f.amp1 = K * std::cosh(surf.spec.shape);
            f.amp2 = K / std::tanh(surf.spec.shape);
            f.trig = true;
            f.quadric = {static_cast<double>(q), static_cast<double>(p),
                         static_cast<double>(p + q) / (-2.0 * a)};
            f.embedded = (p == 1 && q == 1);
            return f;
        }
        default:
            throw WrongFamily("separated form defined only for the three shape families");
    }
}

Congruence unitary_congruence(const SurfaceModel& a, const SurfaceModel& b,
                              const ParamPairing& pairing, const Cell& sample_cell, int n) {
    using Eigen::Matrix2cd;
    using Eigen::Vector2cd;
    std::vector<Vector2cd> va, vb;
    va.reserve(static_cast<size_t>(n) * n);
    vb.reserve(static_cast<size_t>(n) * n);
    Matrix2cd m = Matrix2cd::Zero();
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const auto st = sample_cell.map((i + 0.5) / n, (j + 0.5) / n);
            const Complex2 pa = a.position(st[0], st[1]);
            const auto st_b = pairing(st[0], st[1]);
            const Complex2 pb = b.position(st_b[0], st_b[1]);
            Vector2cd xa, xb;
            xa << pa.z1, pa.z2;
            xb << pb.z1, pb.z2;
            m += xb * xa.adjoint();
            va.push_back(xa);
            vb.push_back(xb);
        }
    }
    Eigen::JacobiSVD<Matrix2cd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix2cd u = svd.matrixU() * svd.matrixV().adjoint();

    double diam2 = 0.0;
    for (size_t i = 0; i < vb.size(); ++i) {
        for (size_t k = i + 1; k < vb.size(); ++k) {
            diam2 = std::max(diam2, (vb[i] - vb[k]).squaredNorm());
        }
    }
    const double diam = std::max(std::sqrt(diam2), 1e-300);

    Congruence out;
    out.u = {u(0, 0), u(0, 1), u(1, 0), u(1, 1)};
    double worst = 0.0;
    for (size_t i = 0; i < va.size(); ++i) {
        worst = std::max(worst, (u * va[i] - vb[i]).norm());
    }
    out.residual = worst / diam;
    return out;
}

namespace {

// Distance between parameter offsets modulo integer combinations of the
// lattice translations (searched over a small window of coefficients).
double lattice_reduced_dist(const std::array<double, 2>& d,
                            const std::vector<std::array<double, 2>>& tr) {
    double best = std::hypot(d[0], d[1]);
    const int w = 2;
    if (tr.size() == 1) {
        for (int k = -w; k <= w; ++k) {
            best = std::min(best, std::hypot(d[0] - k * tr[0][0], d[1] - k * tr[0][1]));
        }
    } else if (tr.size() >= 2) {
        for (int k1 = -w; k1 <= w; ++k1) {
            for (int k2 = -w; k2 <= w; ++k2) {
                best = std::min(best, std::hypot(d[0] - k1 * tr[0][0] - k2 * tr[1][0],
                                                 d[1] - k1 * tr[0][1] - k2 * tr[1][1]));
            }
        }
    }
    return best;
}

uint64_t bucket_key(const std::array<double, 4>& x, double h) {
    uint64_t key = 1469598103934665603ull;
    for (double c : x) {
        const auto v = static_cast<int64_t>(std::floor(c / h));
        key ^= static_cast<uint64_t>(v) + 0x9e3779b97f4a7c15ull;
        key *= 1099511628211ull;
    }
    return key;
}

}  // namespace

std::vector<DoublePoint> self_intersection_scan(const SurfaceModel& surf, const Cell& cell,
                                                int n) {
    if (n < 8) throw BadResolution("intersection scan resolution must be at least 8");
    const double diam = diameter(surf, cell, 48);
    if (!(diam > 0.0)) throw DegenerateMetric("surface image has zero diameter");

    const int na = cell.periodic_u1 ? n : n + 1;
    const int nb = cell.periodic_u2 ? n : n + 1;
    std::vector<std::array<double, 2>> params;
    std::vector<Complex2> pos;
    params.reserve(static_cast<size_t>(na) * nb);
    pos.reserve(static_cast<size_t>(na) * nb);
    for (int jb = 0; jb < nb; ++jb) {
        for (int ia = 0; ia < na; ++ia) {
            const auto st = cell.map(static_cast<double>(ia) / n, static_cast<double>(jb) / n);
            params.push_back({st[0], st[1]});
            pos.push_back(surf.position(st[0], st[1]));
        }
    }

    const double r_cap = 6.0 * diam / n;
    std::unordered_map<uint64_t, std::vector<int>> buckets;
    buckets.reserve(pos.size() * 2);
    for (size_t i = 0; i < pos.size(); ++i) {
        buckets[bucket_key(to_r4(pos[i]), r_cap)].push_back(static_cast<int>(i));
    }

    const double step_a = std::hypot(cell.u1[0], cell.u1[1]) / n;
    const double step_b = std::hypot(cell.u2[0], cell.u2[1]) / n;
    const double trivial_sep = 3.0 * std::max(step_a, step_b);
    const double accept_sep = 1e-5 * (std::hypot(cell.u1[0], cell.u1[1]) +
                                      std::hypot(cell.u2[0], cell.u2[1]));
    const auto& tr = surf.lattice.translations;

    auto refine = [&](std::array<double, 2> p, std::array<double, 2> q,
                      DoublePoint& out) -> bool {
        Eigen::Vector4d x;
        x << p[0], p[1], q[0], q[1];
        for (int it = 0; it < 12; ++it) {
            const Jet jp = surf.jet(x[0], x[1]);
            const Jet jq = surf.jet(x[2], x[3]);
            const Complex2 diff = jp.phi - jq.phi;
            Eigen::Vector4d f;
            const auto fr = to_r4(diff);
            f << fr[0], fr[1], fr[2], fr[3];
            if (f.norm() < 1e-13 * diam && it > 0) break;
            Eigen::Matrix4d jac;
            const auto c0 = to_r4(jp.phi_s), c1 = to_r4(jp.phi_t);
            const auto c2 = to_r4(jq.phi_s), c3 = to_r4(jq.phi_t);
            for (int r = 0; r < 4; ++r) {
                jac(r, 0) = c0[r];
                jac(r, 1) = c1[r];
                jac(r, 2) = -c2[r];
                jac(r, 3) = -c3[r];
            }
            const Eigen::Vector4d dx = jac.completeOrthogonalDecomposition().solve(f);
            x -= dx;
            if (dx.norm() > 1.0) return false;  // diverging
        }
        const Complex2 diff = surf.position(x[0], x[1]) - surf.position(x[2], x[3]);
        out.p = {x[0], x[1]};
        out.q = {x[2], x[3]};
        out.image_dist = norm(diff);
        return out.image_dist <= 1e-9 * diam;
    };

    std::vector<DoublePoint> found;
    std::unordered_set<std::string> seen;
    const std::array<double, 2> cell_det{cell.u1[0] * cell.u2[1] - cell.u1[1] * cell.u2[0], 0.0};
    auto canonical_key = [&](const DoublePoint& d) {
        // Cell coordinates of both parameters, wrapped along periodic
        // directions, rounded to a coarse grid so nearby refinements merge.
        auto coords = [&](const std::array<double, 2>& p) {
            const double det = cell_det[0];
            const double rel0 = p[0] - cell.origin[0], rel1 = p[1] - cell.origin[1];
            double ca = (rel0 * cell.u2[1] - rel1 * cell.u2[0]) / det;
            double cb = (cell.u1[0] * rel1 - cell.u1[1] * rel0) / det;
            if (cell.periodic_u1) ca -= std::floor(ca);
            if (cell.periodic_u2) cb -= std::floor(cb);
            return std::array<double, 2>{ca, cb};
        };
        auto ap = coords(d.p), aq = coords(d.q);
        if (std::tie(aq[0], aq[1]) < std::tie(ap[0], ap[1])) std::swap(ap, aq);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.4f|%.4f|%.4f|%.4f", ap[0], ap[1], aq[0], aq[1]);
        return std::string(buf);
    };

    const int off[3] = {-1, 0, 1};
    const int rows = static_cast<int>(pos.size());
    std::vector<std::vector<DoublePoint>> row_found(rows);
    detail::parallel_for(rows, [&](int irow) {
        const size_t i = static_cast<size_t>(irow);
        const auto xi = to_r4(pos[i]);
        std::vector<std::array<double, 2>> reps;
        for (int o0 : off) {
            for (int o1 : off) {
                for (int o2 : off) {
                    for (int o3 : off) {
                        const std::array<double, 4> probe{xi[0] + o0 * r_cap, xi[1] + o1 * r_cap,
                                                          xi[2] + o2 * r_cap, xi[3] + o3 * r_cap};
                        const auto it = buckets.find(bucket_key(probe, r_cap));
                        if (it == buckets.end()) continue;
                        for (int j : it->second) {
                            if (j <= static_cast<int>(i)) continue;
                            if (norm(pos[i] - pos[j]) > r_cap) continue;
                            const std::array<double, 2> dp{params[i][0] - params[j][0],
                                                           params[i][1] - params[j][1]};
                            if (lattice_reduced_dist(dp, tr) < trivial_sep) continue;
                            // Partners from the same sheet of the double locus
                            // refine to the same point; keep one per cluster.
                            bool clustered = false;
                            for (const auto& rep : reps) {
                                const std::array<double, 2> dr{params[j][0] - rep[0],
                                                               params[j][1] - rep[1]};
                                if (lattice_reduced_dist(dr, tr) < 2.0 * trivial_sep) {
                                    clustered = true;
                                    break;
                                }
                            }
                            if (clustered) continue;
                            reps.push_back(params[j]);
                            DoublePoint cand;
                            if (!refine(params[i], params[j], cand)) continue;
                            const std::array<double, 2> dr{cand.p[0] - cand.q[0],
                                                           cand.p[1] - cand.q[1]};
                            if (lattice_reduced_dist(dr, tr) < accept_sep) continue;
                            row_found[i].push_back(cand);
                        }
                    }
                }
            }
        }
    });
    for (const auto& row : row_found) {
        for (const auto& cand : row) {
            if (seen.insert(canonical_key(cand)).second) found.push_back(cand);
        }
    }
    std::sort(found.begin(), found.end(), [](const DoublePoint& a, const DoublePoint& b) {
        return std::tie(a.p[0], a.p[1], a.q[0], a.q[1]) <
               std::tie(b.p[0], b.p[1], b.q[0], b.q[1]);
    });
    return found;
}

namespace {

struct ParsedSpec {
    std::string name;
    std::unordered_map<std::string, std::string> kv;
};

ParsedSpec parse_spec_string(const std::string& text) {
    ParsedSpec out;
    const auto colon = text.find(':');
    out.name = text.substr(0, colon);
    if (out.name.empty()) throw BadParams("empty family name in '" + text + "'");
    if (colon == std::string::npos) return out;
    std::string rest = text.substr(colon + 1);
    size_t start = 0;
    while (start <= rest.size()) {
        auto comma = rest.find(',', start);
        if (comma == std::string::npos) comma = rest.size();
        const std::string item = rest.substr(start, comma - start);
        if (!item.empty()) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 >= item.size()) {
                throw BadParams("expected key=value, got '" + item + "'");
            }
            const std::string key = item.substr(0, eq);
            if (out.kv.count(key)) throw BadParams("duplicate key '" + key + "'");
            out.kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& key, const std::string& val) {
    try {
        size_t used = 0;
        const double x = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw BadParams("value of '" + key + "' is not a number: '" + val + "'");
    }
}

long long parse_int(const std::string& key, const std::string& val) {
    try {
        size_t used = 0;
        const long long x = std::stoll(val, &used);
        if (used != val.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw BadParams("value of '" + key + "' is not an integer: '" + val + "'");
    }
}

}  // namespace

SurfaceModel make_surface(const std::string& spec_string) {
    ParsedSpec ps = parse_spec_string(spec_string);
    auto kv = ps.kv;  // consumed key by key; leftovers are errors

    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto need_a = [&]() {
        auto v = take("a");
        if (!v) throw BadParams("family '" + ps.name + "' requires a=");
        return parse_double("a", *v);
    };
    auto finish = [&](SurfaceModel m) {
        if (!kv.empty()) {
            throw BadParams("unknown key '" + kv.begin()->first + "' for family '" + ps.name +
                            "'");
        }
        return m;
    };

    if (ps.name == "phi" || ps.name == "upsilon") {
        const bool is_phi = ps.name == "phi";
        const double a = need_a();
        const auto shape = take(is_phi ? "delta" : "gamma");
        const auto pv = take("p"), qv = take("q");
        if (shape && (pv || qv)) {
            throw BadParams("give either the shape parameter or p,q, not both");
        }
        if (shape) {
            const double x = parse_double(is_phi ? "delta" : "gamma", *shape);
            return finish(is_phi ? make_phi(a, x) : make_upsilon(a, x));
        }
        if (!pv || !qv) throw BadParams(ps.name + " requires delta/gamma= or p=,q=");
        const long long p = parse_int("p", *pv), q = parse_int("q", *qv);
        return finish(is_phi ? make_phi(a, p, q) : make_upsilon(a, p, q));
    }
    if (ps.name == "psi") {
        const double a = need_a();
        const auto shape = take("nu");
        const auto mv = take("m"), nv = take("n");
        if (shape && (mv || nv)) {
            throw BadParams("give either nu or m,n, not both");
        }
        if (shape) return finish(make_psi(a, parse_double("nu", *shape)));
        if (!mv || !nv) throw BadParams("psi requires nu= or m=,n=");
        return finish(make_psi(a, parse_int("m", *mv), parse_int("n", *nv)));
    }
    if (ps.name == "clifford") return finish(make_clifford(need_a()));
    if (ps.name == "cylinder") return finish(make_cylinder(need_a()));
    if (ps.name == "cone") {
        const double a = need_a();
        const auto dv = take("delta"), gv = take("gamma");
        const auto pv = take("p"), qv = take("q");
        SurfaceModel parent;
        if (dv) {
            if (gv || pv || qv) throw BadParams("cone takes exactly one of delta=, gamma= or p=,q=");
            parent = make_phi(a, parse_double("delta", *dv));
        } else if (gv) {
            if (pv || qv) throw BadParams("cone takes exactly one of delta=, gamma= or p=,q=");
            parent = make_upsilon(a, parse_double("gamma", *gv));
        } else if (pv && qv) {
            const long long p = parse_int("p", *pv), q = parse_int("q", *qv);
            parent = (a > 0.0) ? make_phi(a, p, q) : make_upsilon(a, p, q);
        } else {
            throw BadParams("cone requires delta=, gamma= or p=,q=");
        }
        return finish(cone_surface(asymptotic_cone(parent)));
    }
    throw BadParams("unknown family '" + ps.name + "'");
}

}  // namespace lagflow
