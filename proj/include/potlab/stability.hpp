#pragma once

#include <cstdint>
#include <vector>

#include "potlab/optimizer.hpp"

namespace potlab {

// Minimal l1 distance from V to the registry; *nearest receives the entry
// index when non-null. Throws EmptyRegistry.
double dist_to_registry(const Potential& V, const OptimalSetRegistry& reg, int* nearest = nullptr);

// Random admissible V at exact l1 distance delta from entry base_index:
// mass delta/2 removed from cells of the entry's set, delta/2 added on cells
// where the entry vanishes, so the two sides never overlap and the distance
// is exact by construction (audited to 1e-12 * |Omega|). Samples whose
// nearest registry entry is not base_index are redrawn.
Potential sample_shell(const GridDomain& grid, const OptimalSetRegistry& reg, int base_index,
                       double delta, Rng& rng);

struct ShellSample {
    double delta = 0.0;
    int sample_id = 0;
    int base_index = 0;
    double lambda = 0.0;
    double gap = 0.0;   // lambda - lambda_bar
    double ratio = 0.0; // gap / delta^2
    bool descended = false;
};

struct PerDeltaStats {
    double delta = 0.0;
    double min_ratio = 0.0;
    double median_ratio = 0.0;
    double min_gap = 0.0;
    double raw_min_gap = 0.0; // before local descent, visible next to min_gap
    int n = 0;
};

struct StabilityReport {
    std::vector<ShellSample> samples;
    std::vector<PerDeltaStats> per_delta;
    double lambda_bar = 0.0;
    double estimated_C = 0.0;  // min ratio over all samples
    double loglog_slope = 0.0; // fit of log(min gap) against log(delta)
    bool invalid_registry = false;
    std::uint64_t seed = 0;
};

struct StabilityOptions {
    std::vector<double> deltas; // absolute mass distances; empty = default grid
    int n_per_delta = 100;
    bool local_descent = true;
    int descent_steps = 2;
    double eigen_tol = 1e-9;
    std::uint64_t seed = 0;
    int workers = 1;
};

// Default delta grid: log-spaced between the two-cell floor 2h^2 and 0.2*V0.
std::vector<double> default_delta_grid(const GridDomain& grid, double V0, int count = 6);

// Shell-constrained linearized descent step: rebuilds the sample with the
// delta/2 removal placed on the set cells of smallest u^2 and the delta/2
// addition on the outside cells of largest u^2 (the exact minimizer of the
// linearized gap on the shell). Deterministic given the entry and u.
Potential shell_linearized_step(const GridDomain& grid, const RegistryEntry& base, double delta,
                                const ScalarField& u);

StabilityReport estimate_constant(const GridDomain& grid, const OptimalSetRegistry& reg,
                                  const StabilityOptions& opts);

} // namespace potlab
