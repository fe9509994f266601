#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lagflow/geometry.hpp"
#include "lagflow/surface.hpp"

namespace lagflow {

// Rational p/q matched by x to within tol * max(1, |x|) with q <= max_den,
// found by continued fractions. A match must also beat the generic convergent
// quality 1e-3 / q^2 by a wide margin, so values that merely admit a good
// rational approximation (as every real does near the denominator cap) are
// not tagged; values computed from an actual fraction are.
std::optional<Rational> detect_rational(double x, long long max_den = 1000000,
                                        double tol = 1e-12);

// Shrinker family for a > 0, shape parameter delta > 0. The conjugacy
// invariant cosh^2(delta) decides resonance: when it equals p/q (reduced,
// p > q) the surface closes up over a parameter period in s.
SurfaceModel make_phi(double a, double delta);
SurfaceModel make_phi(double a, long long p, long long q);

// Expander-side family for a < 0, shape gamma in (0, pi/2); the invariant is
// cos^2(gamma) = p/q with p < q in the resonant case.
SurfaceModel make_upsilon(double a, double gamma);
SurfaceModel make_upsilon(double a, long long p, long long q);

// Doubly periodic family for a < 0, shape nu > 0; the invariant is
// sinh^2(nu) = m/n. Resonant surfaces are tori (m, n both odd) or have a
// Klein-bottle quotient (m + n odd).
SurfaceModel make_psi(double a, double nu);
SurfaceModel make_psi(double a, long long m, long long n);

// Product-of-circles torus and the flat cylinder, both for a < 0.
SurfaceModel make_clifford(double a);
SurfaceModel make_cylinder(double a);

// Total area / total Willmore energy of compact members (clifford and
// resonant psi); empty for non-compact surfaces.
std::optional<double> closed_form_area(const SurfaceModel& surf);
std::optional<double> closed_form_willmore(const SurfaceModel& surf);

// Asymptotic cone of the non-compact shrinker/expander families: the image
// accumulates, as |t| grows, on the two-sheeted cone |z1| = c |z2| swept by
// the direction field direction(s, sheet).
struct ConeSpec {
    double a = 0.0;
    double c = 1.0;        // slope of the cone: |z1| = c |z2|
    Complex pre1;          // constant phase on the z1 component
    double w1 = 0.0;       // phase rates of the two components in s
    double w2 = 0.0;
    std::optional<Rational> resonance;

    Complex2 direction(double s, int sheet) const {
        return {pre1 * (static_cast<double>(sheet) * c) *
                    std::exp(Complex(0.0, w1 * s)),
                std::exp(Complex(0.0, w2 * s))};
    }
};

ConeSpec asymptotic_cone(const SurfaceModel& surf);

// Distance from an ambient point to the cone: minimum over both sheets and a
// scan_n-point grid in the link parameter, with the radial coordinate
// eliminated in closed form.
double cone_distance(const ConeSpec& cone, const Complex2& p, int scan_n = 4096);

// max over n_samples points phi(s_i, t) of cone_distance, divided by the
// (s-independent) distance |phi(., t)| from the origin. Decays like e^{-2|t|}.
double cone_gap(const SurfaceModel& surf, double t, int n_samples = 16,
                int scan_n = 4096);

// One conformal sheet of the cone as a surface in its own right, parametrized
// by (s, rho) -> e^{rho} direction(s) / |direction|; conformal, Lagrangian,
// with harmonic angle, but not a self-similar soliton.
SurfaceModel cone_surface(const ConeSpec& cone, int sheet = 1);

// Separated normal form of a resonant family member: after the diagonal
// unitary diag(d1, d2) and the parameter scaling below, the immersion is
//   (amp1 P1(x) e^{i w1 theta}, amp2 P2(x) e^{i w2 theta})
// with integer windings (w1, w2) and real profile (P1, P2) = (cosh, sinh) or
// (cos, sin). The profile traces the conic c1 x1^2 + c2 x2^2 = rhs.
struct SeparatedForm {
    std::array<long long, 2> winding{0, 0};
    double theta_scale = 1.0;  // angular parameter = theta_scale * theta
    int angle_axis = 0;        // 0: s is the angular parameter, 1: t
    Complex d1{1.0, 0.0}, d2{1.0, 0.0};
    double amp1 = 0.0, amp2 = 0.0;
    bool trig = false;  // cos/sin profile instead of cosh/sinh
    std::array<double, 3> quadric{0.0, 0.0, 0.0};  // {c1, c2, rhs}
    bool embedded = false;

    // The normal form evaluated at (profile variable, theta).
    Complex2 eval(double x, double theta) const;
};

// Throws WrongFamily for kinds without a separated form or when the shape
// parameter is not resonant.
SeparatedForm separated_form(const SurfaceModel& surf);

// Best unitary U of C^2 with U a(p) ~ b(pairing(p)) over an n x n sample of
// cell, by the polar-decomposition least-squares fit. residual is the worst
// sample mismatch normalized by the diameter of b.
struct Congruence {
    std::array<Complex, 4> u{};  // row-major 2x2
    double residual = 0.0;

    Complex2 apply(const Complex2& v) const {
        return {u[0] * v.z1 + u[1] * v.z2, u[2] * v.z1 + u[3] * v.z2};
    }
};

using ParamPairing = std::function<std::array<double, 2>(double, double)>;

Congruence unitary_congruence(const SurfaceModel& a, const SurfaceModel& b,
                              const ParamPairing& pairing, const Cell& sample_cell,
                              int n = 8);

// A transversal self-intersection of the immersion restricted to cell:
// distinct parameters (mod lattice translations) with equal image.
struct DoublePoint {
    std::array<double, 2> p{0.0, 0.0};
    std::array<double, 2> q{0.0, 0.0};
    double image_dist = 0.0;
};

// Grid scan at resolution n plus Gauss-Newton refinement. Pairs equivalent
// under the lattice translation subgroup are discarded; glide-equivalent
// pairs count (they are genuine double points of the quotient immersion).
std::vector<DoublePoint> self_intersection_scan(const SurfaceModel& surf,
                                                const Cell& cell, int n = 256);

// "family:key=value,..." spec string used by the command line and the
// python bindings, e.g. "phi:a=0.25,p=2,q=1" or "psi:a=-0.5,nu=0.7".
SurfaceModel make_surface(const std::string& spec_string);

}  // namespace lagflow
