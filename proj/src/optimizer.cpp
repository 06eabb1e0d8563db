#include "potlab/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "potlab/parallel.hpp"

namespace potlab {

namespace {

// 4-neighbor pairs with the rounded set indicator differing; first index is
// the inside cell.
std::vector<std::pair<int, int>> interface_pairs(const GridDomain& grid, const Potential& set) {
    std::vector<std::pair<int, int>> pairs;
    const int n = grid.size();
    for (int k = 0; k < n; ++k) {
        if (set.field.values[static_cast<std::size_t>(k)] < 0.5) continue;
        for (int d = 0; d < 4; ++d) {
            std::int32_t m = grid.neighbor[k][d];
            if (m >= 0 && set.field.values[static_cast<std::size_t>(m)] < 0.5)
                pairs.emplace_back(k, m);
        }
    }
    return pairs;
}

// Bilinear interpolation on the full lattice (nx*ny values, site-ordered).
double interp_lattice(const GridDomain& grid, const std::vector<double>& site_values, double x,
                      double y) {
    double gx = x / grid.h;
    double gy = y / grid.h;
    int i0 = static_cast<int>(std::floor(gx));
    int j0 = static_cast<int>(std::floor(gy));
    i0 = std::clamp(i0, 0, grid.nx - 2);
    j0 = std::clamp(j0, 0, grid.ny - 2);
    double fx = std::clamp(gx - i0, 0.0, 1.0);
    double fy = std::clamp(gy - j0, 0.0, 1.0);
    auto at = [&](int i, int j) {
        return site_values[static_cast<std::size_t>(j) * grid.nx + i];
    };
    return (1 - fx) * (1 - fy) * at(i0, j0) + fx * (1 - fy) * at(i0 + 1, j0) +
           (1 - fx) * fy * at(i0, j0 + 1) + fx * fy * at(i0 + 1, j0 + 1);
}

std::vector<double> to_full_lattice(const GridDomain& grid, const ScalarField& f, double outside) {
    std::vector<double> full(static_cast<std::size_t>(grid.nx) * grid.ny, outside);
    for (int k = 0; k < grid.size(); ++k)
        full[static_cast<std::size_t>(grid.interior_site[k])] = f.values[static_cast<std::size_t>(k)];
    return full;
}

} // namespace

OptimizeResult optimize_potential(const GridDomain& grid, const Potential& init,
                                  const OptimizerOptions& opts) {
    if (init.field.grid != &grid) throw GridMismatch("optimize_potential");
    const double fp_tol = opts.fp_tol < 0.0 ? grid.cell_area() : opts.fp_tol;

    EigenOptions eig;
    eig.tol = opts.eigen_tol;
    eig.shift = opts.shift;

    OptimizeResult out;
    out.V = init;
    EigenPair pair;

    for (int it = 0; it < opts.max_iter; ++it) {
        eig.warm_start = (it == 0) ? nullptr : &pair.u;
        pair = principal_eigenpair(grid, out.V.field, eig);
        Potential next = bathtub_projection(grid, pair.u, init.target_mass);
        double res = l1_distance(next.field, out.V.field);
        out.history.steps.push_back({pair.lambda, res});
        if (res <= fp_tol) {
            out.history.converged = true;
            out.pair = std::move(pair);
            return out; // V is already the fixed point within tolerance
        }
        out.V = std::move(next);
    }
    // iteration budget exhausted; surface the history for diagnosis
    throw NoConvergence("optimize_potential: fixed point not reached in " +
                            std::to_string(opts.max_iter) + " iterations",
                        out.history.steps.empty() ? 0.0
                                                  : out.history.steps.back().fixed_point_residual);
}

Potential random_bangbang(const GridDomain& grid, double V0, Rng& rng) {
    require_admissible_mass(grid, V0);
    const double W = grid.shape.bbox_width();
    const double H = grid.shape.bbox_height();

    ScalarField f(grid);
    // smooth tie-breaker: a few random bumps, amplitude below the indicator step
    int n_bumps = 3 + static_cast<int>(rng.index(4));
    std::vector<double> bx(static_cast<std::size_t>(n_bumps)), by(bx.size()), bw(bx.size()),
        ba(bx.size());
    for (int b = 0; b < n_bumps; ++b) {
        bx[static_cast<std::size_t>(b)] = rng.uniform(0.0, W);
        by[static_cast<std::size_t>(b)] = rng.uniform(0.0, H);
        bw[static_cast<std::size_t>(b)] = rng.uniform(0.08, 0.35) * std::max(W, H);
        ba[static_cast<std::size_t>(b)] = rng.uniform(0.2, 1.0);
    }
    int n_rects = 1 + static_cast<int>(rng.index(4));
    std::vector<std::array<double, 4>> rects;
    for (int r = 0; r < n_rects; ++r) {
        double x0 = rng.uniform(0.0, W), y0 = rng.uniform(0.0, H);
        double w = rng.uniform(0.1, 0.6) * W, h = rng.uniform(0.1, 0.6) * H;
        rects.push_back({x0, y0, std::min(x0 + w, W), std::min(y0 + h, H)});
    }
    for (int k = 0; k < grid.size(); ++k) {
        double x = grid.cx(k), y = grid.cy(k);
        double val = 0.0;
        for (const auto& r : rects)
            if (x >= r[0] && x <= r[2] && y >= r[1] && y <= r[3]) val += 3.0;
        for (int b = 0; b < n_bumps; ++b) {
            auto i = static_cast<std::size_t>(b);
            double dx = x - bx[i], dy = y - by[i];
            val += ba[i] * std::exp(-(dx * dx + dy * dy) / (2.0 * bw[i] * bw[i]));
        }
        f.values[static_cast<std::size_t>(k)] = val;
    }
    return bathtub_projection(grid, f, V0);
}

MultiplierInfo lagrange_multiplier(const GridDomain& grid, const Potential& set,
                                   const ScalarField& u) {
    if (set.field.grid != &grid || u.grid != &grid) throw GridMismatch("lagrange_multiplier");
    auto pairs = interface_pairs(grid, set);
    if (pairs.empty()) throw Error("lagrange_multiplier: set has no interface");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    CompensatedSum sum;
    for (auto [a, b] : pairs) {
        double mid = 0.5 * (u.values[static_cast<std::size_t>(a)] +
                            u.values[static_cast<std::size_t>(b)]);
        double m2 = mid * mid;
        sum.add(m2);
        lo = std::min(lo, m2);
        hi = std::max(hi, m2);
    }
    MultiplierInfo info;
    info.value = -sum.value() / static_cast<double>(pairs.size());
    info.spread = hi - lo;
    return info;
}

double hopf_constant(const GridDomain& grid, const Potential& set, const ScalarField& u) {
    if (set.field.grid != &grid || u.grid != &grid) throw GridMismatch("hopf_constant");
    auto pairs = interface_pairs(grid, set);
    if (pairs.empty()) throw Error("hopf_constant: set has no interface");
    double min_val = std::numeric_limits<double>::infinity();
    for (auto [a, b] : pairs)
        min_val = std::min(min_val, 0.5 * (u.values[static_cast<std::size_t>(a)] +
                                           u.values[static_cast<std::size_t>(b)]));
    LevelSetInfo info = level_threshold(grid, u, set.target_mass);
    double steep = boundary_steepness(grid, u, info);
    return std::min(min_val, steep);
}

OptimalSetRegistry enumerate_optima(const GridDomain& grid, double V0,
                                    const EnumerateOptions& opts) {
    require_admissible_mass(grid, V0);
    OptimalSetRegistry reg;
    reg.V0 = V0;
    reg.beta = opts.beta_fraction * grid.measure();
    reg.dirichlet_lambda = dirichlet_ground_eigenvalue(grid);
    reg.cluster_tol = opts.cluster_tol_fraction * std::abs(reg.dirichlet_lambda);

    OptimizerOptions run_opts = opts.opt;
    if (!run_opts.shift) run_opts.shift = reg.dirichlet_lambda - 2.0;

    std::vector<std::optional<OptimizeResult>> results(static_cast<std::size_t>(opts.n_starts));
    std::atomic<int> failed{0};
    parallel_for(opts.n_starts, opts.workers, [&](int s) {
        Rng rng(opts.seed, "optimizer/start", static_cast<std::uint64_t>(s));
        Potential init = random_bangbang(grid, V0, rng);
        try {
            results[static_cast<std::size_t>(s)] = optimize_potential(grid, init, run_opts);
        } catch (const NoConvergence&) {
            failed.fetch_add(1);
        }
    });
    reg.failed_starts = failed.load();

    std::vector<OptimizeResult*> ok;
    for (auto& r : results)
        if (r) ok.push_back(&*r);
    if (ok.empty()) throw NoConvergence("enumerate_optima: every start failed", 0.0);

    reg.lambda_bar = std::numeric_limits<double>::infinity();
    for (auto* r : ok) reg.lambda_bar = std::min(reg.lambda_bar, r->pair.lambda);

    std::vector<OptimizeResult*> kept;
    for (auto* r : ok)
        if (r->pair.lambda <= reg.lambda_bar + reg.cluster_tol) kept.push_back(r);
    std::stable_sort(kept.begin(), kept.end(),
                     [](auto* a, auto* b) { return a->pair.lambda < b->pair.lambda; });

    for (auto* r : kept) {
        bool dup = false;
        for (const auto& e : reg.entries)
            if (l1_distance(r->V.field, e.V.field) < reg.beta) {
                dup = true; // an already-kept entry with lower lambda represents it
                break;
            }
        if (dup) continue;
        RegistryEntry e;
        e.fixed_point_residual =
            r->history.steps.empty() ? 0.0 : r->history.steps.back().fixed_point_residual;
        e.V = std::move(r->V);
        e.pair = std::move(r->pair);
        e.lambda = e.pair.lambda;
        e.mu = level_threshold(grid, e.pair.u, V0).mu;
        MultiplierInfo mi = lagrange_multiplier(grid, e.V, e.pair.u);
        e.multiplier = mi.value;
        e.multiplier_spread = mi.spread;
        e.hopf = hopf_constant(grid, e.V, e.pair.u);
        e.perimeter = discrete_perimeter(grid, e.V);
        reg.entries.push_back(std::move(e));
    }
    return reg;
}

void VectorFieldSpec::eval(double x, double y, double& px, double& py) const {
    double dx = x - cx, dy = y - cy;
    double rho2 = (dx * dx + dy * dy) / (support * support);
    if (rho2 >= 1.0) {
        px = py = 0.0;
        return;
    }
    double cut = (1.0 - rho2) * (1.0 - rho2);
    switch (kind) {
    case Kind::RadialBump:
        px = amplitude * dx * cut;
        py = amplitude * dy * cut;
        break;
    case Kind::Rotation:
        px = -amplitude * dy * cut;
        py = amplitude * dx * cut;
        break;
    }
}

namespace {

// Signed nearest-interface distance on the full lattice, negative inside the
// set. Interface points are midpoints of the set's crossing pairs.
std::vector<double> signed_distance_lattice(const GridDomain& grid, const Potential& set) {
    auto pairs = interface_pairs(grid, set);
    if (pairs.empty()) throw Error("signed_distance: set has no interface");
    std::vector<double> mx(pairs.size()), my(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        mx[p] = 0.5 * (grid.cx(pairs[p].first) + grid.cx(pairs[p].second));
        my[p] = 0.5 * (grid.cy(pairs[p].first) + grid.cy(pairs[p].second));
    }
    std::vector<double> psi(static_cast<std::size_t>(grid.nx) * grid.ny);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            double x = i * grid.h, y = j * grid.h;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < mx.size(); ++p) {
                double dx = x - mx[p], dy = y - my[p];
                best = std::min(best, dx * dx + dy * dy);
            }
            std::int32_t k = grid.site_to_interior[static_cast<std::size_t>(j) * grid.nx + i];
            bool inside = k >= 0 && set.field.values[static_cast<std::size_t>(k)] >= 0.5;
            psi[static_cast<std::size_t>(j) * grid.nx + i] =
                (inside ? -1.0 : 1.0) * std::sqrt(best);
        }
    }
    return psi;
}

// least-squares quadratic a + b t + c t^2; returns b
double quadratic_slope(const std::vector<double>& t, const std::vector<double>& y) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double ti = t[i], ti2 = ti * ti;
        s0 += 1; s1 += ti; s2 += ti2; s3 += ti2 * ti; s4 += ti2 * ti2;
        b0 += y[i]; b1 += y[i] * ti; b2 += y[i] * ti2;
    }
    // normal equations, 3x3 Cramer
    double m[3][3] = {{s0, s1, s2}, {s1, s2, s3}, {s2, s3, s4}};
    double rhs[3] = {b0, b1, b2};
    auto det3 = [](double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
               a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    double D = det3(m);
    if (std::abs(D) < 1e-300) throw Error("quadratic fit: degenerate t grid");
    double mb[3][3];
    for (int c = 0; c < 3; ++c) {
        for (int r = 0; r < 3; ++r)
            for (int q = 0; q < 3; ++q) mb[r][q] = m[r][q];
        for (int r = 0; r < 3; ++r) mb[r][c] = rhs[r];
        if (c == 1) return det3(mb) / D;
    }
    return 0.0;
}

} // namespace

ShapeCheckReport shape_derivative_check(const GridDomain& grid, const Potential& base_set,
                                        double multiplier, const VectorFieldSpec& phi,
                                        const std::vector<double>& t_values,
                                        const EigenOptions& eig_in) {
    if (base_set.field.grid != &grid) throw GridMismatch("shape_derivative_check");
    if (t_values.size() < 3) throw Error("shape_derivative_check: need at least 3 t values");
    std::vector<double> psi = signed_distance_lattice(grid, base_set);

    ShapeCheckReport rep;
    rep.multiplier = multiplier;

    EigenOptions eig = eig_in;
    EigenPair warm;
    bool have_warm = false;

    for (double t : t_values) {
        ScalarField set_t(grid);
        long count = 0;
        for (int k = 0; k < grid.size(); ++k) {
            double x = grid.cx(k), y = grid.cy(k);
            double px, py;
            phi.eval(x, y, px, py);
            double val = interp_lattice(grid, psi, x - t * px, y - t * py);
            if (val < 0.0) {
                set_t.values[static_cast<std::size_t>(k)] = 1.0;
                ++count;
                if (grid.touches_boundary(k))
                    throw DeformationEscapes("deformed set reaches the domain boundary at t = " +
                                             std::to_string(t));
            }
        }
        if (count == 0) throw Error("shape_derivative_check: deformed set vanished");
        eig.warm_start = have_warm ? &warm.u : nullptr;
        EigenPair pair = principal_eigenpair(grid, set_t, eig);
        warm = pair;
        have_warm = true;
        double vol = grid.cell_area() * static_cast<double>(count);
        rep.cases.push_back({t, pair.lambda, vol, pair.lambda - multiplier * vol});
    }

    std::vector<double> ts, ys;
    for (const auto& c : rep.cases) {
        ts.push_back(c.t);
        ys.push_back(c.lagrangian);
    }
    rep.fd_slope = quadratic_slope(ts, ys);
    return rep;
}

double surface_formula_ball(const GridDomain& grid, const ScalarField& u_ball, double multiplier,
                            double ball_cx, double ball_cy, double ball_r,
                            const VectorFieldSpec& phi, int n_quad) {
    if (u_ball.grid != &grid) throw GridMismatch("surface_formula_ball");
    std::vector<double> full = to_full_lattice(grid, u_ball, 0.0);
    const double two_pi = 2.0 * 3.14159265358979323846;
    CompensatedSum flux_u2, flux;
    for (int q = 0; q < n_quad; ++q) {
        double th = two_pi * (q + 0.5) / n_quad;
        double nx = std::cos(th), ny = std::sin(th);
        double x = ball_cx + ball_r * nx, y = ball_cy + ball_r * ny;
        double px, py;
        phi.eval(x, y, px, py);
        double vn = px * nx + py * ny;
        double uv = interp_lattice(grid, full, x, y);
        flux_u2.add(uv * uv * vn);
        flux.add(vn);
    }
    double w = two_pi * ball_r / n_quad;
    return -w * flux_u2.value() - multiplier * w * flux.value();
}

Potential centered_ball(const GridDomain& grid, double V0, double cx, double cy) {
    ScalarField f(grid);
    for (int k = 0; k < grid.size(); ++k) {
        double dx = grid.cx(k) - cx, dy = grid.cy(k) - cy;
        f.values[static_cast<std::size_t>(k)] = -std::sqrt(dx * dx + dy * dy);
    }
    return bathtub_projection(grid, f, V0);
}

} // namespace potlab
