#pragma once

#include <map>
#include <string>

#include "lagflow/surface.hpp"

namespace lagflow {

struct ResidualEntry {
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Aggregated verification sweep: worst-case pointwise residuals over a grid
// sample of the cell, judged against per-residual tolerances.
struct GeometryReport {
    std::string label;
    std::string family;
    std::string mode;  // analytic | fd
    double a = 0.0;
    int grid = 0;
    std::map<std::string, ResidualEntry> residuals;
    bool pass = false;
};

// Run every residual that applies to the surface's kind: Lagrangian and
// conformal defects always; soliton, angle monotonicity and the divergence
// balance for the self-similar families; cubic-form constancy and the
// profile structure equations where a profile exists. Tolerances are the
// per-mode defaults overridden by name.
GeometryReport verify_surface(const SurfaceModel& surf, int grid = 64,
                              const std::map<std::string, double>& tol_overrides = {});

// Deterministic JSON rendering (sorted keys, round-trip floats).
std::string report_json(const GeometryReport& rep, int indent = 2);

}  // namespace lagflow
