#pragma once

#include <array>
#include <optional>

#include "lagflow/jet.hpp"
#include "lagflow/surface.hpp"
#include "lagflow/types.hpp"

namespace lagflow {

// Induced first fundamental form at a jet.
struct MetricData {
    double g_ss = 0.0;
    double g_st = 0.0;
    double g_tt = 0.0;
    double det = 0.0;
    // Round-off aware conformality defect |g_ss - g_tt| + 2|g_st| relative to
    // trace; the conformal factor e^{2u} is meaningful only when this is small.
    double conformal_defect = 0.0;
    double conformal_factor = 0.0;
};

MetricData metric(const Jet& j);

// Throws DegenerateMetric when det g <= tol * (trace/2)^2.
void require_nondegenerate(const MetricData& g, double tol = 1e-12);

// max_{u,v in {s,t}} |omega(phi_u, phi_v)| normalized by the metric scale.
double lagrangian_defect(const Jet& j);

// Tangential/normal split of an ambient vector at the jet's point.
struct Split {
    Complex2 tangent;
    Complex2 normal;
    double c_s = 0.0;  // tangent = c_s phi_s + c_t phi_t
    double c_t = 0.0;
};

Split split_vector(const Jet& j, const Complex2& v);

// Mean curvature vector with the convention 2H = trace_g(second fundamental
// form), i.e. H = Delta phi / 2 for the induced Laplacian.
Complex2 mean_curvature(const Jet& j);

// |H - a phi^perp| at the jet, the pointwise defect of the self-similar
// soliton equation.
double self_similar_residual(const Jet& j, double a);

// Lagrangian angle beta via e^{i beta} = det_C(phi_s, phi_t) / sqrt(det g),
// principal value in (-pi, pi]. Throws NotLagrangian when |det_C| deviates
// from sqrt(det g) by more than lag_tol relatively.
double lagrangian_angle(const Jet& j, double lag_tol = 1e-6);

// |J grad beta - 2 H| given the closed-form angle gradient (d beta in
// parameter coordinates). Zero exactly when beta calibrates H.
double angle_gradient_defect(const Jet& j, const std::array<double, 2>& dbeta);

// Pullback of the primitive lambda = <J z, dz> of twice the Kaehler form:
// returns (lambda(phi_s), lambda(phi_t)).
std::array<double, 2> liouville_pullback(const Jet& j);

// |d beta + 2 a phi^*lambda| componentwise max: the exact first-order identity
// making beta monotone along lambda level directions on a soliton with
// constant a.
double angle_liouville_defect(const Jet& j, const std::array<double, 2>& dbeta, double a);

// Totally symmetric cubic C(u, v, w) = <sigma(u, v), J w> restricted to the
// coordinate frame, plus the largest deviation from total symmetry among index
// permutations (zero iff the immersion is Lagrangian to jet accuracy).
struct CubicForm {
    double sss = 0.0, sst = 0.0, stt = 0.0, ttt = 0.0;
    double symmetry_defect = 0.0;
};

CubicForm second_fundamental_cubic(const Jet& j);

// Conformal-gauge invariants at a jet of a conformal immersion:
//   h = 2 (J phi_zbar) . H           (C-bilinear dot, z = s + i t)
//   f = 4 sigma(phi_z, phi_z) . (J phi_z)
// together with the conformal factor e^{2u}. Throws NotConformal when the
// metric is not conformal to conf_tol (relative).
struct HopfForms {
    Complex f;
    Complex h;
    double e2u = 0.0;
};

HopfForms hopf_forms(const Jet& j, double conf_tol = 1e-6);

// Discrete check that the angle is harmonic: 5-point Laplace-Beltrami of the
// (branch-unwrapped) angle divided by e^{2u}, evaluated from eval() at spacing
// step. O(step^2) for smooth HSL surfaces.
double angle_laplacian(const SurfaceModel& surf, double s, double t, double step);

// |div(tangential part of phi) - 2 (1 + |H|^2 / a)|, the first-order balance
// satisfied by every self-similar soliton with constant a. Central differences
// at spacing step; O(step^2). Throws BadParams when the surface carries a = 0.
double divergence_identity_defect(const SurfaceModel& surf, double s, double t, double step);

// Trapezoid quadrature of sqrt(det g) over the cell; periodic directions use
// the midpoint-equivalent closed form (no doubled boundary row).
double area_integral(const SurfaceModel& surf, const Cell& cell, int n);

// Trapezoid quadrature of |H|^2 dA over the cell.
double willmore_integral(const SurfaceModel& surf, const Cell& cell, int n);

// Max |phi(p) - phi(q)| over an n x n sample of the cell (extrinsic diameter
// lower bound, used to normalize congruence and intersection tolerances).
double diameter(const SurfaceModel& surf, const Cell& cell, int n = 48);

namespace detail {

// Simple chunked parallel loop honouring LAGFLOW_THREADS (default: hardware
// concurrency, at least 1). body(i) must be safe to run concurrently.
int thread_budget();
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace detail

}  // namespace lagflow
