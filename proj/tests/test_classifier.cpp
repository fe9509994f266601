#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "lagflow/classifier.hpp"
#include "lagflow/families.hpp"
#include "lagflow/geometry.hpp"

using namespace lagflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Same surface with the second coordinate stretched by one percent: stays a
// surface, stops being conformal/soliton, and feeds the negative controls.
SurfaceModel stretched_second_axis(SurfaceModel base, double factor) {
    auto inner_jet = base.analytic;
    base.analytic = [inner_jet, factor](double s, double t) {
        Jet j = inner_jet(s, t);
        for (Complex2* f : {&j.phi, &j.phi_s, &j.phi_t, &j.phi_ss, &j.phi_st, &j.phi_tt}) {
            f->z2 *= factor;
        }
        return j;
    };
    auto inner_eval = base.eval;
    base.eval = [inner_eval, factor](double s, double t) {
        Complex2 p = inner_eval(s, t);
        p.z2 *= factor;
        return p;
    };
    base.spec.kind = FamilyKind::Custom;
    base.spec.label = "perturbed";
    return base;
}

double max_defect(const std::map<std::string, double>& m) {
    double worst = 0.0;
    for (const auto& [k, v] : m) worst = std::max(worst, v);
    return worst;
}

}  // namespace

TEST_CASE("profile invariants of the named families") {
    {
        const ProfileState ps = profile_from_family(make_phi(0.25, 2, 1));
        CHECK(ps.mu == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
        CHECK(ps.alpha == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(ps.g0 == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(ps.profile_axis == 1);
        CHECK(std::abs(ps.base[1]) < 1e-12);
        CHECK(ps.branch == ProfileBranch::BandEPositive);
    }
    {
        const double d = 1.0, sh2 = std::sinh(d) * std::sinh(d);
        const ProfileState ps = profile_from_family(make_phi(1.0, d));
        CHECK(ps.mu == doctest::Approx(sh2 / (2.0 * std::cosh(d))).epsilon(1e-12));
        CHECK(ps.alpha == doctest::Approx(std::tanh(d) * std::tanh(d) / 2.0).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(ps.g0 == doctest::Approx(sh2 / 2.0).epsilon(1e-12));
    }
    {
        const ProfileState ps = profile_from_family(make_upsilon(-0.5, kPi / 3.0));
        CHECK(ps.mu == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(ps.alpha == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(ps.g0 == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(ps.branch == ProfileBranch::BandEPositive);
    }
    {
        // Above the self-dual shape the canonical base sits at the other
        // critical circle, so the dual invariants are recovered.
        const double nu = 1.0, coth2 = 1.0 / (std::tanh(nu) * std::tanh(nu));
        const ProfileState ps = profile_from_family(make_psi(-0.5, nu));
        CHECK(ps.profile_axis == 0);
        CHECK(ps.mu ==
              doctest::Approx(std::cosh(nu) * std::cosh(nu) / (2.0 * std::sinh(nu))).epsilon(1e-12));
        CHECK(ps.g0 == doctest::Approx(coth2).epsilon(1e-12));
        CHECK(ps.alpha == doctest::Approx(std::cosh(nu) * std::cosh(nu)).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(-1.0).epsilon(1e-10));
        CHECK(ps.branch == ProfileBranch::WaveENegative);
    }
    {
        const ProfileState ps = profile_from_family(make_psi(-0.5, 0.5));
        CHECK(ps.g0 == doctest::Approx(std::cosh(0.5) * std::cosh(0.5)).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(-1.0).epsilon(1e-10));
    }
    {
        const ProfileState ps = profile_from_family(make_clifford(-0.5));
        CHECK(ps.profile_axis == -1);
        CHECK(ps.mu == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(ps.E == doctest::Approx(-0.5).epsilon(1e-10));
        CHECK(ps.branch == ProfileBranch::ProductTorus);
        CHECK(ps.g0 == doctest::Approx(2.0).epsilon(1e-12));
    }
    {
        const ProfileState ps = profile_from_family(make_psi(-0.5, 1, 1));
        CHECK(ps.branch == ProfileBranch::ProductTorus);
        CHECK(ps.E == doctest::Approx(-1.0).epsilon(1e-10));
    }
    {
        const ProfileState ps = profile_from_family(make_cylinder(-0.5));
        CHECK(ps.branch == ProfileBranch::FlatCylinder);
        CHECK(std::abs(ps.E) < 1e-10);
        CHECK(ps.g0 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ps.alpha == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("closed profile functions match the sampled surface") {
    {
        const SurfaceModel surf = make_phi(1.0, 1.0);
        const ProfileState ps = profile_from_family(surf);
        for (double y : {-1.2, -0.4, 0.0, 0.7, 1.5}) {
            const Jet j = surf.jet(0.77, ps.base[1] + y);
            CHECK(ps.g(y) == doctest::Approx(norm2(j.phi)).epsilon(1e-10));
            CHECK(ps.g_prime(y) == doctest::Approx(2.0 * inner(j.phi, j.phi_t)).epsilon(1e-9));
            CHECK(ps.e2u(y) == doctest::Approx(metric(j).conformal_factor).epsilon(1e-10));
        }
    }
    {
        const SurfaceModel surf = make_psi(-0.5, 1.0);
        const ProfileState ps = profile_from_family(surf);
        for (double y : {-0.9, 0.3, 1.1}) {
            const Jet j = surf.jet(ps.base[0] + y, 0.31);
            CHECK(ps.g(y) == doctest::Approx(norm2(j.phi)).epsilon(1e-10));
            CHECK(ps.e2u(y) == doctest::Approx(metric(j).conformal_factor).epsilon(1e-10));
        }
    }
    {
        const SurfaceModel surf = make_cylinder(-0.5);
        const ProfileState ps = profile_from_family(surf);
        for (double y : {-1.5, 0.6}) {
            const Jet j = surf.jet(0.2, ps.base[1] + y);
            CHECK(ps.g(y) == doctest::Approx(norm2(j.phi)).epsilon(1e-10));
        }
    }
}

TEST_CASE("energy, base distance and the quartic first integral hang together") {
    for (const auto& surf :
         {make_phi(0.25, 2, 1), make_phi(1.0, 1.0), make_upsilon(-0.5, kPi / 3.0),
          make_psi(-0.5, 1.0), make_psi(-1.0, 1, 2), make_clifford(-0.5), make_cylinder(-1.0)}) {
        CAPTURE(surf.spec.label);
        const ProfileState ps = profile_from_family(surf);
        const double mu2 = ps.mu * ps.mu, a = ps.a;
        // The base distance is pinned by the invariants.
        CHECK(ps.g0 == doctest::Approx(mu2 / (a * a * ps.alpha)).epsilon(1e-10));
        // Quadratic in g on the right of g'^2 = P(g): discriminant and P(0).
        const double A = 4.0 * ps.E, B = -8.0 * mu2 / a, C = -4.0 * mu2 / (a * a);
        const double disc = B * B - 4.0 * A * C;
        CHECK(disc == doctest::Approx(64.0 * mu2 * (mu2 + ps.E) / (a * a)).epsilon(1e-10));
        CHECK(C < 0.0);
        // First integral along the closed-form profile.
        for (double y : {-0.8, 0.2, 1.0}) {
            const double g = ps.g(y), gp = ps.g_prime(y);
            CHECK(std::abs(gp * gp - (A * g * g + B * g + C)) < 1e-8 * (1.0 + g * g));
        }
    }
}

TEST_CASE("structure equations hold on the families") {
    const auto fixtures = {make_phi(1.0, 1.0),         make_phi(0.25, 2, 1),
                           make_upsilon(-0.5, kPi / 3.0), make_psi(-0.5, 1.0),
                           make_psi(-0.5, 1, 2),       make_clifford(-0.5),
                           make_cylinder(-0.5)};
    for (const auto& surf : fixtures) {
        CAPTURE(surf.spec.label);
        const ProfileState ps = profile_from_family(surf);
        for (int j = 0; j < 5; ++j) {
            for (int i = 0; i < 5; ++i) {
                const auto st = surf.cell.map(0.1 + 0.17 * i, 0.1 + 0.17 * j);
                const auto res = structure_defects(surf, ps, st[0], st[1]);
                CHECK(res.size() == 15);
                CHECK(max_defect(res) < 1e-8);
            }
        }
    }
}

TEST_CASE("a one-percent stretch is rejected or exposed") {
    const SurfaceModel pert = stretched_second_axis(make_psi(-0.5, 1.0), 1.01);

    // Strict gates refuse the profile outright.
    CHECK_THROWS_AS((void)profile_from_family(pert), NotConformal);
    ProfileOptions conf_only;
    conf_only.conf_tol = 0.05;
    CHECK_THROWS_AS((void)profile_from_family(pert, conf_only), NotHSL);

    // With every gate opened, the structure residuals expose the defect.
    ProfileOptions lenient;
    lenient.conf_tol = 0.05;
    lenient.h_tol_rel = 10.0;
    const ProfileState ps = profile_from_family(pert, lenient);
    double worst = 0.0;
    for (double s : {0.4, 1.0, 2.2}) {
        for (double t : {0.2, 0.9}) {
            worst = std::max(worst, max_defect(structure_defects(pert, ps, s, t)));
        }
    }
    CHECK(worst > 1e-3);

    // The unperturbed surface passes the same sweep.
    const SurfaceModel clean = make_psi(-0.5, 1.0);
    const ProfileState cps = profile_from_family(clean);
    double clean_worst = 0.0;
    for (double s : {0.4, 1.0, 2.2}) {
        for (double t : {0.2, 0.9}) {
            clean_worst = std::max(clean_worst, max_defect(structure_defects(clean, cps, s, t)));
        }
    }
    CHECK(clean_worst < 1e-8);
}

TEST_CASE("profile energy derivative chain is consistent") {
    // d/dy of the u first integral equals 2u' times the second-order form,
    // as a calculus identity independent of the surface being exact.
    const SurfaceModel pert = stretched_second_axis(make_psi(-0.5, 1.0), 1.01);
    ProfileOptions lenient;
    lenient.conf_tol = 0.05;
    lenient.h_tol_rel = 10.0;
    const ProfileState ps = profile_from_family(pert, lenient);
    const double mu2 = ps.mu * ps.mu, a = ps.a, E = ps.E;

    const double t0 = 0.37;
    auto u_of = [&](double y) {
        const Jet j = pert.jet(y, t0);
        return 0.5 * std::log(inner(j.phi_t, j.phi_t));
    };
    auto up_of = [&](double y) {
        const Jet j = pert.jet(y, t0);
        return inner(j.phi_t, j.phi_st) / inner(j.phi_t, j.phi_t);
    };
    auto e22 = [&](double y) {
        const double up = up_of(y), e2u = std::exp(2.0 * u_of(y));
        return up * up - (2.0 * mu2 * E / a) / e2u + (mu2 * E * E / (a * a)) / (e2u * e2u) - E;
    };
    const double y0 = 0.9, h = 1e-4;
    const double d22 = (e22(y0 + h) - e22(y0 - h)) / (2.0 * h);
    const double up = up_of(y0), e2u = std::exp(2.0 * u_of(y0));
    const double upp = (up_of(y0 + h) - up_of(y0 - h)) / (2.0 * h);
    const double e23 = upp + (2.0 * mu2 * E / a) / e2u - (2.0 * mu2 * E * E / (a * a)) / (e2u * e2u);
    CHECK(d22 == doctest::Approx(2.0 * up * e23).epsilon(1e-6));
}

TEST_CASE("frenet integration reproduces the closed forms and the band itself") {
    {
        const SurfaceModel surf = make_phi(0.25, 2, 1);
        const ProfileState ps = profile_from_family(surf);
        const FrenetPatch patch = integrate_frenet(ps, 1.0, 1.0, 1e-3);
        double worst_cf = 0.0, worst_surf = 0.0;
        for (int iy = 0; iy < patch.ny; iy += 50) {
            for (int ix = 0; ix < patch.nx; ix += 50) {
                const double x = ix * 1e-3, y = iy * 1e-3;
                worst_cf = std::max(worst_cf, norm(patch.at(ix, iy) - closed_form_frenet(ps, x, y)));
                worst_surf = std::max(worst_surf, norm(patch.at(ix, iy) - surf.position(x, y)));
            }
        }
        CHECK(worst_cf < 1e-6);
        CHECK(worst_surf < 1e-6);
        CHECK(patch.error_estimate < 1e-9);
    }
    {
        const ProfileState ps = profile_from_family(make_psi(-0.5, 1.0));
        const FrenetPatch patch = integrate_frenet(ps, 1.0, 1.0, 2e-3);
        double worst = 0.0;
        for (int iy = 0; iy < patch.ny; iy += 25) {
            for (int ix = 0; ix < patch.nx; ix += 25) {
                worst = std::max(worst,
                                 norm(patch.at(ix, iy) - closed_form_frenet(ps, ix * 2e-3, iy * 2e-3)));
            }
        }
        CHECK(worst < 1e-6);
    }
    {
        const ProfileState ps = profile_from_family(make_cylinder(-1.0));
        const FrenetPatch patch = integrate_frenet(ps, 1.0, 1.0, 2e-3);
        double worst = 0.0;
        for (int iy = 0; iy < patch.ny; iy += 25) {
            for (int ix = 0; ix < patch.nx; ix += 25) {
                worst = std::max(worst,
                                 norm(patch.at(ix, iy) - closed_form_frenet(ps, ix * 2e-3, iy * 2e-3)));
            }
        }
        CHECK(worst < 1e-8);
    }
    {
        // Too coarse a step must be reported, not silently accepted.
        const ProfileState ps = profile_from_family(make_psi(-0.5, 1.0));
        CHECK_THROWS_AS((void)integrate_frenet(ps, 3.0, 3.0, 0.5), StepTooLarge);
    }
}

TEST_CASE("closed-form reconstructions are honest surfaces") {
    for (const auto& seed :
         {make_phi(0.25, 2, 1), make_psi(-0.5, 1.0), make_cylinder(-1.0), make_clifford(-0.5)}) {
        CAPTURE(seed.spec.label);
        const ProfileState ps = profile_from_family(seed);
        SurfaceModel rec;
        rec.spec.kind = FamilyKind::Custom;
        rec.spec.a = ps.a;
        rec.eval = [ps](double x, double y) { return closed_form_frenet(ps, x, y); };
        rec.mode = JetMode::FiniteDifference;
        rec.fd_step = 1e-4;
        for (double x : {0.2, 0.8}) {
            for (double y : {0.3, 0.9}) {
                const Jet j = rec.jet(x, y);
                CHECK(lagrangian_defect(j) < 1e-7);
                CHECK(metric(j).conformal_defect < 1e-5);
                CHECK(self_similar_residual(j, ps.a) < 1e-5);
            }
        }
    }
}

TEST_CASE("classification recovers the family and shape") {
    {
        const Classification c = classify(profile_from_family(make_phi(0.3, 0.7)));
        CHECK(c.kind == FamilyKind::Phi);
        CHECK(c.branch == ProfileBranch::BandEPositive);
        CHECK(c.shape == doctest::Approx(0.7).epsilon(1e-9));
    }
    {
        const Classification c = classify(profile_from_family(make_upsilon(-0.7, 0.9)));
        CHECK(c.kind == FamilyKind::Upsilon);
        CHECK(c.shape == doctest::Approx(0.9).epsilon(1e-9));
    }
    {
        // Below the self-dual point the shape returns untouched.
        const Classification c = classify(profile_from_family(make_psi(-0.5, 0.6)));
        CHECK(c.kind == FamilyKind::Psi);
        CHECK(c.shape == doctest::Approx(0.6).epsilon(1e-9));
    }
    {
        // Above it the canonical representative is the dual shape.
        const Classification c = classify(profile_from_family(make_psi(-0.4, 1.3)));
        CHECK(c.kind == FamilyKind::Psi);
        CHECK(c.shape == doctest::Approx(std::asinh(1.0 / std::sinh(1.3))).epsilon(1e-9));
    }
    {
        const Classification c = classify(profile_from_family(make_clifford(-0.5)));
        CHECK(c.kind == FamilyKind::Clifford);
    }
    {
        const Classification c = classify(profile_from_family(make_cylinder(-1.0)));
        CHECK(c.kind == FamilyKind::Cylinder);
    }
}

TEST_CASE("classification is independent of the sampling resolution") {
    for (int grid : {17, 24, 37}) {
        ProfileOptions opts;
        opts.grid = grid;
        const Classification c = classify(profile_from_family(make_psi(-0.5, 1.2), opts));
        CHECK(c.shape == doctest::Approx(std::asinh(1.0 / std::sinh(1.2))).epsilon(1e-9));
    }
}

TEST_CASE("invalid profiles are refused") {
    ProfileState bad;
    bad.a = -0.5;
    bad.mu = 1.0;
    bad.E = -1.5;  // below the homogeneous bound
    bad.g0 = 2.0;
    bad.branch = ProfileBranch::WaveENegative;
    CHECK_THROWS_AS((void)classify(bad), OutOfRange);

    ProfileState band;
    band.a = -0.5;
    band.mu = 0.75;
    band.E = 1.0;
    band.g0 = 1.2;  // at or above -1/(2a): no band shape exists
    band.branch = ProfileBranch::BandEPositive;
    CHECK_THROWS_AS((void)classify(band), OutOfRange);

    ProfileState cyl;
    cyl.a = 0.5;
    cyl.mu = 1.0;
    cyl.E = 0.0;
    cyl.branch = ProfileBranch::FlatCylinder;
    CHECK_THROWS_AS((void)classify(cyl), OutOfRange);

    ProfileState wave;
    wave.a = -0.5;
    wave.mu = 1.0;
    wave.E = -0.5;
    wave.g0 = 0.9;  // inside the forbidden disc
    wave.branch = ProfileBranch::WaveENegative;
    CHECK_THROWS_AS((void)classify(wave), OutOfRange);

    // The asymptotic cone has no critical point of |phi|^2 along its profile.
    const SurfaceModel cone = cone_surface(asymptotic_cone(make_phi(1.0, 1.0)));
    CHECK_THROWS_AS((void)profile_from_family(cone), NoExtremum);
}

TEST_CASE("roundtrip congruence closes on every family") {
    struct Case {
        SurfaceModel surf;
        double bound;
    };
    const Case cases[] = {
        {make_phi(0.3, 0.7), 1e-6},    {make_phi(0.25, 3, 2), 1e-6},
        {make_upsilon(-0.7, 0.9), 1e-6}, {make_psi(-0.4, 1.3), 1e-6},
        {make_psi(-0.5, 1, 2), 1e-6},  {make_cylinder(-1.0), 1e-8},
        {make_clifford(-0.5), 1e-8},   {make_psi(-0.5, 1, 1), 1e-6},
    };
    for (const auto& c : cases) {
        CAPTURE(c.surf.spec.label);
        const RoundTrip rt = roundtrip_congruence(c.surf);
        CHECK(rt.residual < c.bound);
    }
    // The square member really lands on the product torus branch.
    const RoundTrip sq = roundtrip_congruence(make_psi(-0.5, 1, 1));
    CHECK(sq.cls.kind == FamilyKind::Clifford);
}
