#pragma once

#include <cstdint>
#include <vector>

#include "potlab/optimizer.hpp"

namespace potlab {

// Piecewise-constant control path: slice k acts on (t_k, t_{k+1}], dt = T/nt.
struct ControlTrajectory {
    const GridDomain* grid = nullptr;
    double T = 0.0;
    int nt = 0;
    double dt = 0.0;
    std::vector<Potential> slices; // size nt

    static ControlTrajectory constant(const GridDomain& g, double T, int nt, const Potential& V);
};

struct InitialStateSpec {
    enum class Kind { Uniform, Gaussian, Indicator };
    Kind kind = Kind::Uniform;
    double cx = 0.0, cy = 0.0, width = 0.2;   // gaussian
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;    // indicator rectangle
};

ScalarField make_initial_state(const GridDomain& grid, const InitialStateSpec& spec);

// Implicit Euler: (I + dt(-Lap - V_k)) y_{k+1} = y_k, solved by CG (the
// operator is an M-matrix, so exact steps preserve positivity; iterates are
// asserted nonnegative to solver noise). Returns states at t_0..t_nt.
std::vector<ScalarField> forward_solve(const GridDomain& grid, const ControlTrajectory& traj,
                                       const ScalarField& y0, double cg_tol = 1e-14);

// Exact discrete adjoint: the step matrices are symmetric, so the adjoint
// runs the same solves backwards from p(T) = terminal (default 1). Satisfies
// <p(0), y0> == h^2 sum y(T) to solver precision.
std::vector<ScalarField> adjoint_solve(const GridDomain& grid, const ControlTrajectory& traj,
                                       const ScalarField* terminal = nullptr,
                                       double cg_tol = 1e-14);

// Objective gradient with respect to slice k: dt * y_{k+1} (.) p_k, the exact
// derivative of the discrete objective through the implicit scheme.
std::vector<ScalarField> control_gradient(const GridDomain& grid,
                                          const std::vector<ScalarField>& states,
                                          const std::vector<ScalarField>& adjoints, double dt);

double objective(const GridDomain& grid, const std::vector<ScalarField>& states);

struct DecayFit {
    double slope = 0.0;
    double intercept = 0.0;
    double window_start = 0.0; // fit uses t >= window_start
    double implied_lambda = 0.0; // (exp(-slope*dt) - 1)/dt, the bias-corrected rate
};

struct GronwallData {
    double margin = 0.0;
    std::vector<double> slice_lambda; // principal eigenvalue per slice
};

// Discrete Gronwall audit: ||y(T)||^2 <= B0 * prod (1 + dt*lambda_1(s))^-2
// holds exactly for implicit Euler, so
//   margin = log B0 - 2 sum log(1 + dt*lambda_1(s)) - log ||y(T)||^2
// is nonnegative up to eigen/CG tolerance. The per-slice rate
// log(1+dt*lambda)/dt replaces lambda itself: that is the scheme's own decay
// rate, and the continuous inequality is recovered as dt -> 0.
GronwallData gronwall_check(const GridDomain& grid, const ControlTrajectory& traj,
                            const ScalarField& y0, double eigen_tol = 1e-9,
                            double shift = -2.0);

double turnpike_integral(const ControlTrajectory& traj, const OptimalSetRegistry& reg);

struct TurnpikeReport {
    double T = 0.0;
    double objective = 0.0;
    double turnpike_integral = 0.0;
    std::vector<double> per_slice_dist;
    std::vector<double> per_slice_lambda;
    double A0 = 0.0; // overlap of y0 with the optimal eigenfunction
    DecayFit decay_fit; // fitted on the static optimal-control trajectory
    double static_objective = 0.0;
    double gronwall_margin = 0.0;
    bool no_improvement = false;
    int fw_iterations = 0;
};

struct ControlOptions {
    int max_iter = 30;
    double cg_tol = 1e-14;
    double eigen_tol = 1e-9;
    double gap_rel_tol = 1e-7; // stop when the linear gap falls below this * J
    int max_backtracks = 30;
    double armijo = 1e-4;
};

struct ControlResult {
    ControlTrajectory traj;
    TurnpikeReport report;
    std::vector<double> objective_history; // nondecreasing across accepted steps
};

// Frank-Wolfe ascent of h^2 sum y(T) over per-slice admissible controls,
// initialized at the uniform potential V0/|Omega|. The per-slice linear
// maximizer is the bathtub projection of y_{k+1} (.) p_k.
ControlResult optimize_control(const GridDomain& grid, const OptimalSetRegistry& reg, double T,
                               int nt, const ScalarField& y0, const ControlOptions& opts = {});

struct SweepResult {
    std::vector<TurnpikeReport> reports;
    double growth_slope = 0.0; // LS slope of integral vs T over the top half of T_list
    double slope_tol = 0.0;    // 5% of integral(T_min)/T_min
    bool saturated = false;
};

SweepResult horizon_sweep(const GridDomain& grid, const OptimalSetRegistry& reg,
                          const std::vector<double>& T_list, int nt_per_unit,
                          const ScalarField& y0, const ControlOptions& opts = {},
                          int workers = 1);

} // namespace potlab
