#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "potlab/bathtub.hpp"
#include "potlab/grid.hpp"
#include "potlab/rng.hpp"
#include "potlab/spectral.hpp"

namespace potlab {

struct DescentStep {
    double lambda = 0.0;
    double fixed_point_residual = 0.0; // l1 distance to the next iterate
};

struct DescentHistory {
    std::vector<DescentStep> steps;
    bool converged = false;
};

struct OptimizerOptions {
    double fp_tol = -1.0;  // < 0 means the one-cell floor h^2
    int max_iter = 200;
    double eigen_tol = 1e-9;
    std::optional<double> shift; // pass dirichlet eigenvalue - 2 when known
};

struct OptimizeResult {
    Potential V;
    EigenPair pair; // eigenpair of the returned V
    DescentHistory history;
};

// Fixed-point iteration V <- bathtub_projection(u_V, V0): each step is the
// exact minimizer of the linearized eigenvalue over the admissible class, so
// lambda decreases up to twice the eigen tolerance per step.
OptimizeResult optimize_potential(const GridDomain& grid, const Potential& init,
                                  const OptimizerOptions& opts = {});

// Random bang-bang element of the admissible class: booster indicators on 1-4
// random rectangles, tie-broken by a smooth random bump field, clipped to
// mass V0 by the bathtub projection.
Potential random_bangbang(const GridDomain& grid, double V0, Rng& rng);

struct MultiplierInfo {
    double value = 0.0;  // -(mean of squared interface values of u)
    double spread = 0.0; // max - min of those squares; optimality diagnostic
};

// Interface pairs are 4-neighbor pairs with the set indicator (rounded value)
// differing; u is evaluated at pair midpoints.
MultiplierInfo lagrange_multiplier(const GridDomain& grid, const Potential& set,
                                   const ScalarField& u);

// Nondegeneracy floor: min(interface value of u, level-line steepness of u at
// the set's mass).
double hopf_constant(const GridDomain& grid, const Potential& set, const ScalarField& u);

struct RegistryEntry {
    Potential V;
    EigenPair pair;
    double lambda = 0.0;
    double mu = 0.0;
    double multiplier = 0.0;
    double multiplier_spread = 0.0;
    double hopf = 0.0;
    double perimeter = 0.0;
    double fixed_point_residual = 0.0;
};

struct OptimalSetRegistry {
    std::vector<RegistryEntry> entries; // lambda ascending
    double lambda_bar = 0.0;
    double V0 = 0.0;
    double beta = 0.0;        // dedupe radius, pairwise l1 distance floor
    double cluster_tol = 0.0; // lambda admission window above lambda_bar
    double dirichlet_lambda = 0.0;
    int failed_starts = 0;
};

struct EnumerateOptions {
    int n_starts = 8;
    double beta_fraction = 0.05;        // of |Omega|
    double cluster_tol_fraction = 1e-6; // of |lambda_1^D|
    OptimizerOptions opt;
    std::uint64_t seed = 0;
    int workers = 1;
};

OptimalSetRegistry enumerate_optima(const GridDomain& grid, double V0,
                                    const EnumerateOptions& opts = {});

// Smooth compactly supported deformation fields for the level-set check.
struct VectorFieldSpec {
    enum class Kind { RadialBump, Rotation };
    Kind kind = Kind::RadialBump;
    double cx = 0.0, cy = 0.0;
    double support = 1.0;   // cutoff radius; zero outside
    double amplitude = 1.0;

    void eval(double x, double y, double& px, double& py) const;
};

struct ShapeCheckCase {
    double t = 0.0;
    double lambda = 0.0;
    double volume = 0.0;
    double lagrangian = 0.0; // lambda - multiplier * volume
};

struct ShapeCheckReport {
    std::vector<ShapeCheckCase> cases;
    double fd_slope = 0.0;   // linear term of the quadratic fit in t
    double multiplier = 0.0; // Lambda used in the Lagrangian
};

// Deforms the base set through its nearest-neighbor signed distance function:
// psi_t(x) = psi(x - t*phi(x)), rethresholded at zero with no volume
// renormalization, then reports the Lagrangian along t_values. Throws
// DeformationEscapes if a deformed set reaches the domain boundary.
ShapeCheckReport shape_derivative_check(const GridDomain& grid, const Potential& base_set,
                                        double multiplier, const VectorFieldSpec& phi,
                                        const std::vector<double>& t_values,
                                        const EigenOptions& eig = {});

// First-variation surface integral for an analytic ball base set:
//   -oint u^2 (phi . nu) dsigma - Lambda * oint (phi . nu) dsigma,
// quadrature on the true circle with u interpolated bilinearly.
double surface_formula_ball(const GridDomain& grid, const ScalarField& u_ball, double multiplier,
                            double ball_cx, double ball_cy, double ball_r,
                            const VectorFieldSpec& phi, int n_quad = 4096);

// Bang-bang ball of mass V0 centered at (cx, cy): bathtub projection of the
// negated distance to the center.
Potential centered_ball(const GridDomain& grid, double V0, double cx, double cy);

} // namespace potlab
