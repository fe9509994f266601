#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lagflow/jet.hpp"
#include "lagflow/types.hpp"

namespace lagflow {

enum class FamilyKind { Phi, Upsilon, Psi, Clifford, Cylinder, Cone, Custom };

std::string family_name(FamilyKind k);

// Reduced fraction p/q recovered from a floating-point value.
struct Rational {
    long long p = 0;
    long long q = 1;
    double value() const { return static_cast<double>(p) / static_cast<double>(q); }
};

// Affine self-map of the parameter plane, p -> M p + v. Used for lattice
// generators (translations and glide reflections).
struct ParamMap {
    std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
    std::array<double, 2> v{0.0, 0.0};

    std::array<double, 2> operator()(double s, double t) const {
        return {m[0] * s + m[1] * t + v[0], m[2] * s + m[3] * t + v[1]};
    }
    double det() const { return m[0] * m[3] - m[1] * m[2]; }
    bool orientation_reversing() const { return det() < 0.0; }
};

enum class Quotient { Plane, Cylinder, Moebius, Torus, Klein };

std::string quotient_name(Quotient q);

// Group of parameter-space symmetries under which the immersion is invariant.
// "generators" lists a minimal generating set; "translations" spans the
// finite-index translation subgroup used for equivalence tests on points.
struct SymmetryLattice {
    std::vector<ParamMap> generators;
    std::vector<std::array<double, 2>> translations;
    Quotient quotient = Quotient::Plane;
};

// Sampling window in the parameter plane: p(a, b) = origin + a u1 + b u2 with
// (a, b) in [0,1]^2. Non-orthogonal cells cover the skew fundamental domains.
struct Cell {
    std::array<double, 2> origin{0.0, 0.0};
    std::array<double, 2> u1{1.0, 0.0};
    std::array<double, 2> u2{0.0, 1.0};
    bool periodic_u1 = false;
    bool periodic_u2 = false;

    std::array<double, 2> map(double a, double b) const {
        return {origin[0] + a * u1[0] + b * u2[0], origin[1] + a * u1[1] + b * u2[1]};
    }
    double param_area() const { return std::abs(u1[0] * u2[1] - u1[1] * u2[0]); }

    static Cell rect(double s0, double s1, double t0, double t1, bool per_s = false,
                     bool per_t = false) {
        Cell c;
        c.origin = {s0, t0};
        c.u1 = {s1 - s0, 0.0};
        c.u2 = {0.0, t1 - t0};
        c.periodic_u1 = per_s;
        c.periodic_u2 = per_t;
        return c;
    }
};

// Identity of a constructed surface: which family, scaling constant a, and the
// family's shape parameter (when it has one), plus the detected rational form
// of the associated conjugacy invariant when the parameter is resonant.
struct FamilySpec {
    FamilyKind kind = FamilyKind::Custom;
    double a = 0.0;
    double shape = 0.0;  // delta / gamma / nu; ignored for clifford, cylinder
    std::optional<Rational> resonance;
    std::string label;
};

// Immersed surface given by evaluators. "eval" is always present; "analytic"
// supplies exact jets when the construction provides them, otherwise jets fall
// back to finite differences of eval. "beta_gradient" optionally supplies the
// closed-form gradient of the Lagrangian angle in parameter coordinates.
struct SurfaceModel {
    FamilySpec spec;
    SymmetryLattice lattice;
    Cell cell;

    EvalFn eval;
    std::function<Jet(double, double)> analytic;
    std::function<std::array<double, 2>(double, double)> beta_gradient;

    JetMode mode = JetMode::Analytic;
    double fd_step = 1e-4;

    Jet jet(double s, double t) const {
        if (mode == JetMode::Analytic && analytic) return analytic(s, t);
        return fd_jet(eval, s, t, fd_step);
    }
    Complex2 position(double s, double t) const { return eval(s, t); }
    bool has_analytic() const { return static_cast<bool>(analytic); }

    SurfaceModel with_mode(JetMode m, double h = 1e-4) const {
        SurfaceModel out = *this;
        out.mode = m;
        out.fd_step = h;
        return out;
    }
};

}  // namespace lagflow
