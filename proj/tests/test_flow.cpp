#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "lagflow/families.hpp"
#include "lagflow/flow.hpp"

using namespace lagflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

SurfaceModel flat_plane() {
    SurfaceModel m;
    m.spec.kind = FamilyKind::Custom;
    m.spec.a = 0.0;
    m.spec.label = "plane";
    m.eval = [](double s, double t) { return Complex2{Complex(s, 0.0), Complex(t, 0.0)}; };
    m.mode = JetMode::FiniteDifference;
    m.cell = Cell::rect(0.0, 1.0, 0.0, 1.0, false, false);
    return m;
}

// Worst node error of the discrete operator against the exact H = -phi/2 of
// the unit-radius torus.
double clifford_curvature_error(int n) {
    FlowState st = init_flow(make_clifford(-0.5), n, n);
    const auto H = discrete_mean_curvature(st);
    double worst = 0.0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            worst = std::max(worst, norm(H[static_cast<size_t>(i) + static_cast<size_t>(n) * j] +
                                         0.5 * st.at(i, j)));
    return worst;
}

// Tangential fraction of the discrete curvature against central-difference
// tangents, maximized over interior nodes.
double normality_defect(const SurfaceModel& surf, int ns, int nt) {
    FlowState st = init_flow(surf, ns, nt);
    const auto H = discrete_mean_curvature(st);
    double worst = 0.0;
    for (int j = 1; j < nt - 1; ++j) {
        for (int i = 0; i < ns; ++i) {
            const Complex2& h = H[static_cast<size_t>(i) + static_cast<size_t>(ns) * j];
            const double hn = norm(h);
            if (hn < 1e-14) continue;
            const Complex2 es =
                (0.5 / st.ds) * (st.at((i + 1) % ns, j) - st.at((i + ns - 1) % ns, j));
            const Complex2 et = (0.5 / st.dtp) * (st.at(i, j + 1) - st.at(i, j - 1));
            const double frac = (std::abs(inner(h, es)) / norm(es) + std::abs(inner(h, et)) / norm(et)) / hn;
            worst = std::max(worst, frac);
        }
    }
    return worst;
}

const FlowSample& sample_at(const FlowSummary& sum, double t, double tol) {
    for (const auto& s : sum.samples)
        if (std::abs(s.time - t) <= tol) return s;
    REQUIRE(false);
    return sum.samples.front();
}

}  // namespace

TEST_CASE("flat plane grid carries zero curvature") {
    FlowState st = init_flow(flat_plane(), 17, 13);
    const auto H = discrete_mean_curvature(st);
    double worst = 0.0;
    for (const auto& h : H) worst = std::max(worst, norm(h));
    CHECK(worst <= 1e-10);
    CHECK(grid_area(st) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("discrete curvature is second order on the unit torus") {
    const double e32 = clifford_curvature_error(32);
    const double e64 = clifford_curvature_error(64);
    const double e128 = clifford_curvature_error(128);
    CHECK(e64 <= 2e-3);
    const double p1 = std::log2(e32 / e64);
    const double p2 = std::log2(e64 / e128);
    CHECK(p1 == doctest::Approx(2.0).epsilon(0.15));
    CHECK(p2 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("discrete curvature is normal to the discrete tangents") {
    const SurfaceModel psi = make_psi(-0.5, 0.7);
    const double d48 = normality_defect(psi, 48, 49);
    const double d96 = normality_defect(psi, 96, 97);
    CHECK(d48 <= 1e-2);
    CHECK(d96 <= d48 / 2.5);
}

TEST_CASE("grid sampling, spacing and covers") {
    FlowState st = init_flow(make_clifford(-0.5), 64, 64);
    CHECK(st.periodic_s);
    CHECK(st.periodic_t);
    CHECK(st.ds == doctest::Approx(2.0 * kPi / 64));
    CHECK(grid_area(st) == doctest::Approx(4.0 * kPi * kPi).epsilon(5e-3));
    CHECK(st.initial_det_ratio == doctest::Approx(1.0).epsilon(1e-10));

    // Doubly periodic surface on a skew cell flows on the rectangular
    // translation cover.
    FlowState cover = init_flow(make_psi(-0.5, 1, 2), 32, 45);
    CHECK(cover.periodic_s);
    CHECK(cover.periodic_t);
    CHECK(cover.ds * 32 == doctest::Approx(2.0 * kPi));
    CHECK(cover.dtp * 45 == doctest::Approx(2.0 * kPi * std::sqrt(2.0)));

    CHECK_THROWS_AS(init_flow(make_clifford(-0.5), 16, 64), BadResolution);
    CHECK_THROWS_AS(init_flow(make_clifford(-0.5), 64, 16), BadResolution);
    CHECK_THROWS_AS(init_flow(flat_plane(), 3, 9), BadResolution);
}

TEST_CASE("shrinking torus follows the exact homothety to extinction") {
    FlowState st = init_flow(make_clifford(-0.5), 64, 64);
    const double area0 = grid_area(st);
    FlowOptions opts;
    opts.dt = 1e-4;
    FlowSummary sum = run_flow(st, 2.0, opts);

    CHECK(sum.termination == "cfl_limit");
    CHECK(st.time > 0.9);
    REQUIRE(sum.extinction_estimate.has_value());
    CHECK(*sum.extinction_estimate == doctest::Approx(1.0).epsilon(0.02));

    CHECK(sum.samples.front().ss_error <= 1e-12);
    double prev_area = sum.samples.front().area;
    for (const auto& s : sum.samples) {
        CHECK(s.area <= prev_area + 1e-10 * prev_area);
        prev_area = s.area;
        if (s.time <= 0.9) CHECK(s.area / area0 == doctest::Approx(1.0 - s.time).epsilon(0.02));
        if (s.time <= 0.7) CHECK(s.ss_error <= 0.01);
    }
}

TEST_CASE("extinction estimate is stable under time-step halving") {
    auto estimate = [](double dt) {
        FlowState st = init_flow(make_clifford(-0.5), 36, 36);
        FlowOptions opts;
        opts.dt = dt;
        FlowSummary sum = run_flow(st, 0.5, opts);
        REQUIRE(sum.termination == "t_end");
        REQUIRE(sum.extinction_estimate.has_value());
        return *sum.extinction_estimate;
    };
    const double e1 = estimate(1e-4);
    const double e2 = estimate(5e-5);
    CHECK(std::abs(e1 - e2) <= 0.005 * e1);
    CHECK(e1 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("self-similarity error shrinks under refinement and flags extinction") {
    // Coarse run doubling as the clean-extinction path: stop once the area
    // has halved.
    FlowState coarse = init_flow(make_clifford(-0.5), 32, 32);
    FlowOptions opts;
    opts.dt = 1e-4;
    opts.extinction_area_ratio = 0.5;
    FlowSummary csum = run_flow(coarse, 5.0, opts);
    CHECK(csum.termination == "extinct");
    CHECK(coarse.time == doctest::Approx(0.5).epsilon(0.1));

    FlowState fine = init_flow(make_clifford(-0.5), 64, 64);
    FlowOptions fopts;
    fopts.dt = 1e-4;
    FlowSummary fsum = run_flow(fine, 0.5, fopts);
    const double ss_fine = fsum.samples.back().ss_error;
    const double ss_coarse = csum.samples.back().ss_error;
    CHECK(ss_fine > 0.0);
    CHECK(ss_coarse >= 1.5 * ss_fine);
}

TEST_CASE("doubly periodic shrinker stays on the scaled surface") {
    FlowState st = init_flow(make_psi(-0.5, 1, 1), 64, 64);
    FlowOptions opts;
    opts.dt = 1e-4;
    FlowSummary sum = run_flow(st, 0.5, opts);
    REQUIRE(sum.termination == "t_end");
    for (const auto& s : sum.samples) CHECK(s.ss_error <= 0.01);
    CHECK(self_similarity_error(st) <= 0.01);
}

TEST_CASE("expanding band tracks the growing homothety with pinned rows") {
    FlowState st = init_flow(make_phi(0.25, 2, 1), 48, 33);
    CHECK(st.periodic_s);
    CHECK_FALSE(st.periodic_t);
    const double area0 = grid_area(st);
    FlowOptions opts;
    opts.dt = 5e-4;
    FlowSummary sum = run_flow(st, 1.0, opts);
    REQUIRE(sum.termination == "t_end");
    CHECK_FALSE(sum.extinction_estimate.has_value());

    const auto& half = sample_at(sum, 0.5, 1e-6);
    CHECK(half.area / area0 == doctest::Approx(1.25).epsilon(0.02));
    const auto& last = sum.samples.back();
    CHECK(last.time == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(last.area / area0 == doctest::Approx(1.5).epsilon(0.02));
    for (const auto& s : sum.samples) CHECK(s.ss_error <= 0.01);
}

TEST_CASE("stability and singularity guards") {
    FlowState st = init_flow(make_clifford(-0.5), 64, 64);
    FlowOptions big;
    big.dt = 0.1;
    CHECK_THROWS_AS(step(st, big), StepTooLarge);

    // A grid shrunk far below unit scale carries curvature ~ 1/r past the
    // blowup threshold; disable the CFL guard to reach it.
    FlowState tiny = init_flow(make_clifford(-0.5), 32, 32);
    for (auto& x : tiny.grid) x *= 1e-7;
    FlowOptions loose;
    loose.dt = 1e-20;
    loose.cfl_factor = 1e30;
    CHECK_THROWS_AS(step(tiny, loose), Blowup);

    // Pinned rows cannot follow the homothety past 2at+1 = 0.
    FlowState band = init_flow(make_upsilon(-0.5, 0.9), 33, 33);
    band.time = 0.9995;
    FlowOptions small;
    small.dt = 1e-3;
    small.cfl_factor = 10.0;  // reach the homothety guard regardless of mesh
    CHECK_THROWS_AS(step(band, small), ScaleCollapse);
    band.time = 1.5;
    CHECK_THROWS_AS(self_similarity_error(band), ScaleCollapse);

    FlowState flat = init_flow(flat_plane(), 9, 9);
    for (auto& x : flat.grid) x = Complex2{};
    CHECK_THROWS_AS(discrete_mean_curvature(flat), DegenerateMetric);
}
