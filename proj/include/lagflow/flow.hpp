#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lagflow/geometry.hpp"
#include "lagflow/surface.hpp"

namespace lagflow {

struct FlowOptions {
    double dt = 1e-4;
    double cfl_factor = 0.2;        // dt <= cfl * min(spacing)^2 * min e^{2u}
    double blowup_threshold = 1e6;  // max |H| before the run aborts
    double distortion_limit = 100.0;  // allowed degradation of min/max det g
    double extinction_area_ratio = 1e-6;
    int sample_interval = 0;  // steps between samples; 0 picks ~200 per run
};

// Explicit parametric mean curvature flow on a rectangular cell grid.
// Periodic directions wrap by the lattice translations; non-periodic
// directions are pinned: their rows follow the exact homothety
// sqrt(2at+1) * phi. Doubly periodic surfaces on a parallelogram cell flow on
// the rectangular translation cover instead.
struct FlowState {
    SurfaceModel surf;  // reference surface frozen at time zero
    int ns = 0, nt = 0;
    bool periodic_s = false, periodic_t = false;
    double s0 = 0.0, t0 = 0.0, ds = 0.0, dtp = 0.0;
    double time = 0.0;
    std::vector<Complex2> grid;     // row-major, index i + ns * j
    std::vector<Complex2> initial;  // positions at time zero
    double initial_area = 0.0;
    double initial_det_ratio = 1.0;  // min/max det g over the initial grid

    Complex2& at(int i, int j) { return grid[static_cast<size_t>(i) + static_cast<size_t>(ns) * j]; }
    const Complex2& at(int i, int j) const {
        return grid[static_cast<size_t>(i) + static_cast<size_t>(ns) * j];
    }
    std::array<double, 2> param(int i, int j) const { return {s0 + i * ds, t0 + j * dtp}; }
};

// Sample the surface on an ns x nt grid over its cell. Compact (periodic)
// directions need at least 32 nodes; BadResolution otherwise.
FlowState init_flow(const SurfaceModel& surf, int ns, int nt);

// Conservative Laplace-Beltrami mean curvature: half-point metric-weighted
// fluxes differenced back to the nodes, H = (1/2) div flux / sqrt(det g).
// Pinned boundary rows carry zero. Throws DegenerateMetric with the node
// location when the discrete metric collapses.
std::vector<Complex2> discrete_mean_curvature(const FlowState& state);

// One forward-Euler step. Throws StepTooLarge when dt violates the parabolic
// stability bound, Blowup past the curvature threshold, ScaleCollapse when a
// pinned run reaches 2at+1 <= 0.
void step(FlowState& state, const FlowOptions& opts = {});

struct FlowSample {
    double time = 0.0;
    double area = 0.0;
    double max_H = 0.0;
    double ss_error = 0.0;
    double det_ratio = 0.0;  // min/max det g over the grid
};

struct FlowSummary {
    std::vector<FlowSample> samples;
    std::string termination;  // t_end | extinct | cfl_limit | distortion
    std::optional<double> extinction_estimate;
};

// March to t_end, sampling area / max |H| / self-similarity error along the
// way. Stops cleanly (with the reason recorded) when the stability bound
// overtakes dt, the area has effectively vanished, or the mesh degrades; the
// extinction estimate extrapolates the last few area samples linearly.
FlowSummary run_flow(FlowState& state, double t_end, const FlowOptions& opts = {});

// Distance of the evolved grid from the exact solution sqrt(2at+1) * phi,
// maximized over nodes, normalized by the current extrinsic diameter.
// Nearest-point matching against a refined sample of the scaled surface plus
// a few Gauss-Newton projection steps absorb tangential drift.
double self_similarity_error(const FlowState& state);

// Discrete area of the grid (midpoint metric determinant per cell).
double grid_area(const FlowState& state);

}  // namespace lagflow
