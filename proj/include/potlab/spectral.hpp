#pragma once

#include <optional>

#include "potlab/grid.hpp"

namespace potlab {

// Principal eigenpair of -Laplacian_h - diag(V) on the grid interior.
// u is strictly positive, h^2-normalized; residual is the h^2-weighted
// l2 norm of (A - lambda)u.
struct EigenPair {
    double lambda = 0.0;
    ScalarField u;
    double residual = 0.0;
    int iterations = 0;
};

struct EigenOptions {
    double tol = 1e-9;                    // residual target
    int max_outer = 400;                  // inverse-iteration sweeps
    int max_cg = 50000;                   // guard per inner solve
    std::optional<double> shift;          // defaults to -2, always below the spectrum
                                          // for 0 <= V <= 1; hot paths pass
                                          // dirichlet_ground_eigenvalue(grid) - 2
    const ScalarField* warm_start = nullptr;
};

// Conjugate gradients on the shifted operator y -> (-Lap - V - shift) y.
// Plain dot products: the h^2 weights cancel. Returns iterations used.
int cg_solve_shifted(const GridDomain& grid, const std::vector<double>& V, double shift,
                     const std::vector<double>& b, std::vector<double>& x,
                     double rel_tol, int max_iter);

double rayleigh_quotient(const GridDomain& grid, const ScalarField& u, const ScalarField& V);

EigenPair principal_eigenpair(const GridDomain& grid, const ScalarField& V,
                              const EigenOptions& opts = {});

// Ground eigenvalue of the Dirichlet Laplacian (V == 0); the canonical shift
// origin. Not cached: callers in hot loops compute it once and pass
// opts.shift themselves.
double dirichlet_ground_eigenvalue(const GridDomain& grid, double tol = 1e-10);

} // namespace potlab
