#include "potlab/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "potlab/parallel.hpp"
#include "potlab/stability.hpp"

namespace potlab {

namespace {

// (I + dt*(-Lap - V)) y = b rewritten as (A - (-1/dt)) y = b/dt for the
// shifted-operator CG; the shift -1/dt sits below the spectrum whenever the
// step operator is positive definite, which holds for every dt here.
void step_solve(const GridDomain& grid, const std::vector<double>& V, double dt,
                const std::vector<double>& b, std::vector<double>& y, double cg_tol, int max_cg) {
    std::vector<double> scaled(b.size());
    const double inv_dt = 1.0 / dt;
    for (std::size_t i = 0; i < b.size(); ++i) scaled[i] = b[i] * inv_dt;
    cg_solve_shifted(grid, V, -inv_dt, scaled, y, cg_tol, max_cg);
}

void assert_nonnegative(const std::vector<double>& y, const char* where) {
    double hi = 0.0;
    for (double v : y) hi = std::max(hi, std::abs(v));
    double floor = -1e-11 * (hi > 0.0 ? hi : 1.0);
    for (double v : y)
        if (v < floor)
            throw Error(std::string(where) + ": positivity lost beyond solver noise");
}

double linear_fit_slope(const std::vector<double>& x, const std::vector<double>& y,
                        double* intercept) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (!(std::abs(denom) > 0.0)) throw Error("fit: degenerate abscissa");
    double slope = (n * sxy - sx * sy) / denom;
    if (intercept) *intercept = (sy - slope * sx) / n;
    return slope;
}

} // namespace

ControlTrajectory ControlTrajectory::constant(const GridDomain& g, double T, int nt,
                                              const Potential& V) {
    if (!(T > 0.0) || nt < 1) throw Error("trajectory: T and nt must be positive");
    ControlTrajectory traj;
    traj.grid = &g;
    traj.T = T;
    traj.nt = nt;
    traj.dt = T / nt;
    traj.slices.assign(static_cast<std::size_t>(nt), V);
    return traj;
}

ScalarField make_initial_state(const GridDomain& grid, const InitialStateSpec& spec) {
    ScalarField y(grid);
    switch (spec.kind) {
    case InitialStateSpec::Kind::Uniform:
        for (double& v : y.values) v = 1.0;
        break;
    case InitialStateSpec::Kind::Gaussian:
        for (int k = 0; k < grid.size(); ++k) {
            double dx = grid.cx(k) - spec.cx, dy = grid.cy(k) - spec.cy;
            y.values[static_cast<std::size_t>(k)] =
                std::exp(-(dx * dx + dy * dy) / (2.0 * spec.width * spec.width));
        }
        break;
    case InitialStateSpec::Kind::Indicator:
        for (int k = 0; k < grid.size(); ++k) {
            double x = grid.cx(k), yy = grid.cy(k);
            if (x >= spec.x0 && x <= spec.x1 && yy >= spec.y0 && yy <= spec.y1)
                y.values[static_cast<std::size_t>(k)] = 1.0;
        }
        break;
    }
    double mass = integrate(grid, y);
    if (!(mass > 0.0)) throw ZeroField("initial state vanishes on the grid");
    return y;
}

std::vector<ScalarField> forward_solve(const GridDomain& grid, const ControlTrajectory& traj,
                                       const ScalarField& y0, double cg_tol) {
    if (traj.grid != &grid || y0.grid != &grid) throw GridMismatch("forward_solve");
    if (static_cast<int>(traj.slices.size()) != traj.nt)
        throw Error("forward_solve: slice count mismatch");
    std::vector<ScalarField> states;
    states.reserve(static_cast<std::size_t>(traj.nt) + 1);
    states.push_back(y0);
    std::vector<double> y = y0.values;
    for (int k = 0; k < traj.nt; ++k) {
        const auto& V = traj.slices[static_cast<std::size_t>(k)].field.values;
        std::vector<double> next = y; // warm start: y moves O(dt) per step
        step_solve(grid, V, traj.dt, y, next, cg_tol, 100000);
        assert_nonnegative(next, "forward_solve");
        states.emplace_back(grid);
        states.back().values = next;
        y = std::move(next);
    }
    return states;
}

std::vector<ScalarField> adjoint_solve(const GridDomain& grid, const ControlTrajectory& traj,
                                       const ScalarField* terminal, double cg_tol) {
    if (traj.grid != &grid) throw GridMismatch("adjoint_solve");
    std::vector<ScalarField> adj(static_cast<std::size_t>(traj.nt) + 1);
    ScalarField pT(grid, 1.0);
    if (terminal != nullptr) {
        if (terminal->grid != &grid) throw GridMismatch("adjoint_solve terminal");
        pT = *terminal;
    }
    adj[static_cast<std::size_t>(traj.nt)] = pT;
    std::vector<double> p = pT.values;
    for (int k = traj.nt - 1; k >= 0; --k) {
        const auto& V = traj.slices[static_cast<std::size_t>(k)].field.values;
        std::vector<double> prev = p;
        step_solve(grid, V, traj.dt, p, prev, cg_tol, 100000);
        adj[static_cast<std::size_t>(k)] = ScalarField(grid);
        adj[static_cast<std::size_t>(k)].values = prev;
        p = std::move(prev);
    }
    return adj;
}

std::vector<ScalarField> control_gradient(const GridDomain& grid,
                                          const std::vector<ScalarField>& states,
                                          const std::vector<ScalarField>& adjoints, double dt) {
    if (states.size() != adjoints.size() || states.size() < 2)
        throw Error("control_gradient: states/adjoints length mismatch");
    std::vector<ScalarField> g(states.size() - 1);
    for (std::size_t k = 0; k + 1 < states.size(); ++k) {
        if (states[k].grid != &grid || adjoints[k].grid != &grid)
            throw GridMismatch("control_gradient");
        g[k] = ScalarField(grid);
        for (int i = 0; i < grid.size(); ++i) {
            auto ii = static_cast<std::size_t>(i);
            g[k].values[ii] = dt * states[k + 1].values[ii] * adjoints[k].values[ii];
        }
    }
    return g;
}

double objective(const GridDomain& grid, const std::vector<ScalarField>& states) {
    if (states.empty()) throw Error("objective: no states");
    return integrate(grid, states.back());
}

GronwallData gronwall_check(const GridDomain& grid, const ControlTrajectory& traj,
                            const ScalarField& y0, double eigen_tol, double shift) {
    if (traj.grid != &grid || y0.grid != &grid) throw GridMismatch("gronwall_check");
    auto states = forward_solve(grid, traj, y0);
    double B0 = dot_h2(y0, y0);
    double yT2 = dot_h2(states.back(), states.back());
    if (!(B0 > 0.0) || !(yT2 > 0.0)) throw ZeroField("gronwall_check: vanishing state");

    GronwallData out;
    out.slice_lambda.reserve(traj.slices.size());
    EigenOptions eo;
    eo.tol = eigen_tol;
    eo.shift = shift;
    EigenPair pair;
    CompensatedSum rate;
    for (std::size_t k = 0; k < traj.slices.size(); ++k) {
        eo.warm_start = k == 0 ? nullptr : &pair.u;
        pair = principal_eigenpair(grid, traj.slices[k].field, eo);
        out.slice_lambda.push_back(pair.lambda);
        rate.add(std::log1p(traj.dt * pair.lambda));
    }
    out.margin = std::log(B0) - 2.0 * rate.value() - std::log(yT2);
    return out;
}

double turnpike_integral(const ControlTrajectory& traj, const OptimalSetRegistry& reg) {
    CompensatedSum s;
    for (const auto& slice : traj.slices) {
        double d = dist_to_registry(slice, reg);
        s.add(d * d);
    }
    return traj.dt * s.value();
}

ControlResult optimize_control(const GridDomain& grid, const OptimalSetRegistry& reg, double T,
                               int nt, const ScalarField& y0, const ControlOptions& opts) {
    if (y0.grid != &grid) throw GridMismatch("optimize_control");
    if (reg.entries.empty()) throw EmptyRegistry("optimize_control needs a registry");
    const double V0 = reg.V0;
    require_admissible_mass(grid, V0);

    ScalarField uniform(grid, V0 / grid.measure());
    Potential Vu = Potential::checked(uniform, V0);
    ControlTrajectory traj = ControlTrajectory::constant(grid, T, nt, Vu);

    auto states = forward_solve(grid, traj, y0, opts.cg_tol);
    double J = objective(grid, states);

    ControlResult out;
    out.objective_history.push_back(J);
    bool no_improvement = false;
    int iters = 0;

    for (int it = 0; it < opts.max_iter; ++it) {
        auto adjoints = adjoint_solve(grid, traj, nullptr, opts.cg_tol);
        auto grads = control_gradient(grid, states, adjoints, traj.dt);

        // per-slice linear maximizer and Frank-Wolfe gap
        std::vector<Potential> vertices;
        vertices.reserve(grads.size());
        CompensatedSum gap_sum;
        for (std::size_t k = 0; k < grads.size(); ++k) {
            Potential w = bathtub_projection(grid, grads[k], V0);
            CompensatedSum s;
            for (int i = 0; i < grid.size(); ++i) {
                auto ii = static_cast<std::size_t>(i);
                s.add(grads[k].values[ii] *
                      (w.field.values[ii] - traj.slices[k].field.values[ii]));
            }
            gap_sum.add(grid.cell_area() * s.value());
            vertices.push_back(std::move(w));
        }
        double gap = gap_sum.value();
        if (gap <= opts.gap_rel_tol * std::max(J, std::numeric_limits<double>::min())) break;

        // backtracking line search with a sufficient-increase test
        double s = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < opts.max_backtracks; ++bt, s *= 0.5) {
            ControlTrajectory cand = traj;
            for (std::size_t k = 0; k < cand.slices.size(); ++k) {
                ScalarField f(grid);
                for (int i = 0; i < grid.size(); ++i) {
                    auto ii = static_cast<std::size_t>(i);
                    f.values[ii] = (1.0 - s) * traj.slices[k].field.values[ii] +
                                   s * vertices[k].field.values[ii];
                }
                cand.slices[k] = Potential::checked(std::move(f), V0);
            }
            auto cand_states = forward_solve(grid, cand, y0, opts.cg_tol);
            double Jc = objective(grid, cand_states);
            if (Jc >= J + opts.armijo * s * gap) {
                traj = std::move(cand);
                states = std::move(cand_states);
                J = Jc;
                accepted = true;
                break;
            }
        }
        ++iters;
        if (!accepted) {
            no_improvement = true;
            break;
        }
        out.objective_history.push_back(J);
    }

    // report assembly against the registry
    const RegistryEntry& star = reg.entries.front();
    TurnpikeReport rep;
    rep.T = T;
    rep.objective = J;
    rep.no_improvement = no_improvement;
    rep.fw_iterations = iters;
    rep.per_slice_dist.reserve(traj.slices.size());
    for (const auto& slice : traj.slices)
        rep.per_slice_dist.push_back(dist_to_registry(slice, reg));
    CompensatedSum ts;
    for (double d : rep.per_slice_dist) ts.add(d * d);
    rep.turnpike_integral = traj.dt * ts.value();
    rep.A0 = dot_h2(y0, star.pair.u);

    GronwallData gron = gronwall_check(grid, traj, y0, opts.eigen_tol, reg.dirichlet_lambda - 2.0);
    rep.gronwall_margin = gron.margin;
    rep.per_slice_lambda = std::move(gron.slice_lambda);

    // static benchmark: hold the best entry fixed and fit the decay rate
    ControlTrajectory static_traj = ControlTrajectory::constant(grid, T, nt, star.V);
    auto static_states = forward_solve(grid, static_traj, y0, opts.cg_tol);
    rep.static_objective = objective(grid, static_states);
    double window = std::min(2.0, T / 2.0);
    std::vector<double> ft, fm;
    for (int k = 0; k <= nt; ++k) {
        double t = traj.dt * k;
        if (t + 1e-12 < window) continue;
        double m = integrate(grid, static_states[static_cast<std::size_t>(k)]);
        if (!(m > 0.0)) throw ZeroField("static decay fit: mass vanished");
        ft.push_back(t);
        fm.push_back(std::log(m));
    }
    rep.decay_fit.window_start = window;
    rep.decay_fit.slope = linear_fit_slope(ft, fm, &rep.decay_fit.intercept);
    rep.decay_fit.implied_lambda = (std::exp(-rep.decay_fit.slope * traj.dt) - 1.0) / traj.dt;

    out.traj = std::move(traj);
    out.report = std::move(rep);
    return out;
}

SweepResult horizon_sweep(const GridDomain& grid, const OptimalSetRegistry& reg,
                          const std::vector<double>& T_list, int nt_per_unit,
                          const ScalarField& y0, const ControlOptions& opts, int workers) {
    if (T_list.empty()) throw Error("horizon_sweep: empty T list");
    for (std::size_t i = 1; i < T_list.size(); ++i)
        if (!(T_list[i] > T_list[i - 1])) throw Error("horizon_sweep: T list must increase");

    SweepResult sweep;
    sweep.reports.resize(T_list.size());
    std::vector<ControlResult> results(T_list.size());
    parallel_for(static_cast<int>(T_list.size()), workers, [&](int i) {
        double T = T_list[static_cast<std::size_t>(i)];
        int nt = std::max(1, static_cast<int>(std::lround(T * nt_per_unit)));
        results[static_cast<std::size_t>(i)] = optimize_control(grid, reg, T, nt, y0, opts);
    });
    for (std::size_t i = 0; i < T_list.size(); ++i)
        sweep.reports[i] = std::move(results[i].report);

    // saturation: integral growth over the top half of the horizons
    std::size_t start = T_list.size() / 2;
    if (T_list.size() - start < 2) start = T_list.size() >= 2 ? T_list.size() - 2 : 0;
    std::vector<double> xs, ys;
    for (std::size_t i = start; i < T_list.size(); ++i) {
        xs.push_back(T_list[i]);
        ys.push_back(sweep.reports[i].turnpike_integral);
    }
    sweep.growth_slope = xs.size() >= 2 ? linear_fit_slope(xs, ys, nullptr) : 0.0;
    sweep.slope_tol = 0.05 * sweep.reports.front().turnpike_integral / T_list.front();
    sweep.saturated = sweep.growth_slope <= sweep.slope_tol;
    return sweep;
}

} // namespace potlab
