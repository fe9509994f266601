#pragma once

#include <map>
#include <string>
#include <vector>

#include "lagflow/families.hpp"
#include "lagflow/geometry.hpp"
#include "lagflow/surface.hpp"

namespace lagflow {

// The four regimes of the first integral E of the profile ODE. E > 0 gives
// the noncompact bands; E = 0 the flat cylinder; -mu^2 < E < 0 the doubly
// periodic wave surfaces; E = -mu^2 the homogeneous product torus.
enum class ProfileBranch { BandEPositive, FlatCylinder, WaveENegative, ProductTorus };

std::string branch_name(ProfileBranch b);

// Invariants of a surface whose conformal factor depends on one coordinate
// only ("the profile"): the cubic-form magnitude mu = |h|, the conformal
// factor alpha = e^{2u} at the canonical base (a critical point of g = |phi|^2
// with minimal g), the squared base distance g0 = g(base), and the conserved
// energy E = a*alpha*(2 + a*alpha/mu^2). The profile functions g, g' and e2u
// are closed forms in (E, mu, a, g0).
struct ProfileState {
    double a = 0.0;
    double mu = 0.0;
    double alpha = 0.0;
    double E = 0.0;
    double g0 = 0.0;
    std::array<double, 2> base{0.0, 0.0};  // (s, t) of the canonical base
    int profile_axis = 1;                  // 0: profile runs along s, 1: along t, -1: none
    double h_phase = 0.0;                  // arg h; rotating z by -h_phase makes h real
    ProfileBranch branch = ProfileBranch::BandEPositive;

    double g(double y) const;
    double g_prime(double y) const;
    double e2u(double y) const;
};

struct ProfileOptions {
    double h_tol_rel = 1e-8;   // NotHSL when |h - h_base| exceeds this times mu
    double conf_tol = 1e-6;    // conformality gate forwarded to the gauge forms
    int grid = 24;             // sampling resolution over the cell
    double eps_E_rel = 1e-9;   // branch collar: eps_E = eps_E_rel * mu^2
};

// Extract the profile invariants from a surface. Throws NotHSL when the cubic
// form magnitude is not constant to tolerance, NoExtremum when g has no
// critical point along the profile inside the cell, OutOfRange when the
// measured energy lies outside [-mu^2, +inf) or E <= 0 comes with a > 0.
ProfileState profile_from_family(const SurfaceModel& surf, const ProfileOptions& opts = {});

// Pointwise absolute residuals of the full set of profile structure
// equations (Gauss equation, cubic-form growth, the g / u / f interlocking
// identities and both first integrals), keyed by short names. Derivatives of
// exact quantities along the profile use five-point differences at fd_step.
std::map<std::string, double> structure_defects(const SurfaceModel& surf,
                                                const ProfileState& ps, double s, double t,
                                                double fd_step = 1e-3);

// Patch produced by integrating the moving-frame system
//   phi_xx = -u' phi_y + (2mu - k) J phi_x,   k = (mu E / a) e^{-2u}
//   phi_xy =  u' phi_x + k J phi_y
//   phi_yy =  u' phi_y + k J phi_x
// together with the profile ODE for u, from canonical initial data at the
// base: phi = (i mu/(a sqrt(alpha)), 0), phi_x = sqrt(alpha) e1, phi_y =
// sqrt(alpha) e2.
struct FrenetPatch {
    int nx = 0, ny = 0;   // node counts including both endpoints
    double step = 0.0;
    std::vector<Complex2> phi;  // row-major, index ix + nx * iy
    double error_estimate = 0.0;

    const Complex2& at(int ix, int iy) const { return phi[static_cast<size_t>(ix) + static_cast<size_t>(nx) * iy]; }
};

// Classical fourth-order integration over [0, x_len] x [0, y_len] at the
// given step (x first along y = 0, then each column in y). The error estimate
// compares against a half-step rerun; StepTooLarge when it exceeds err_tol
// per unit parameter length.
FrenetPatch integrate_frenet(const ProfileState& ps, double x_len, double y_len, double step,
                             double err_tol = 1e-6);

// Closed-form solution of the same initial value problem: trigonometric or
// hyperbolic in y depending on the sign of E, circular times linear at E = 0.
Complex2 closed_form_frenet(const ProfileState& ps, double x, double y);

// Branch decision plus recovered family parameters.
struct Classification {
    ProfileBranch branch = ProfileBranch::BandEPositive;
    FamilyKind kind = FamilyKind::Custom;
    double a = 0.0;
    double shape = 0.0;  // delta / gamma / nu; zero for the shapeless members
};

// Map a profile to the family it belongs to. Throws OutOfRange when the
// recovered shape parameter violates its branch constraint (band with a < 0
// requires 0 < -2a g0 < 1; wave requires -2a g0 > 1).
Classification classify(const ProfileState& ps);

// Rebuild the classified family and fit a unitary taking it onto the input
// over a pairing of parameter domains anchored at both canonical bases.
// Residual is relative to the extrinsic diameter.
struct RoundTrip {
    Classification cls;
    Congruence congruence;
    double residual = 0.0;
};

RoundTrip roundtrip_congruence(const SurfaceModel& surf, const ProfileOptions& opts = {});

}  // namespace lagflow
