#include "potlab/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace potlab {

namespace {

void apply_shifted(const GridDomain& grid, const std::vector<double>& V, double shift,
                   const std::vector<double>& x, std::vector<double>& out) {
    laplacian_apply_into(grid, x, out);
    const int n = grid.size();
    for (int k = 0; k < n; ++k) out[k] -= (V[k] + shift) * x[k];
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

} // namespace

int cg_solve_shifted(const GridDomain& grid, const std::vector<double>& V, double shift,
                     const std::vector<double>& b, std::vector<double>& x,
                     double rel_tol, int max_iter) {
    const std::size_t n = b.size();
    std::vector<double> r(n), p(n), q(n);
    if (x.size() != n) x.assign(n, 0.0);

    apply_shifted(grid, V, shift, x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    p = r;
    double rs = dot(r, r);
    const double bb = dot(b, b);
    const double target = rel_tol * rel_tol * (bb > 0.0 ? bb : 1.0);
    if (rs <= target) return 0;

    for (int it = 1; it <= max_iter; ++it) {
        apply_shifted(grid, V, shift, p, q);
        double pq = dot(p, q);
        if (!(pq > 0.0))
            throw LinearSolveFailure("cg: operator not positive definite (shift above spectrum?)");
        double alpha = rs / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        double rs2 = dot(r, r);
        if (rs2 <= target) return it;
        double beta = rs2 / rs;
        rs = rs2;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    throw LinearSolveFailure("cg: stagnated at relative residual " +
                             std::to_string(std::sqrt(rs / (bb > 0.0 ? bb : 1.0))));
}

double rayleigh_quotient(const GridDomain& grid, const ScalarField& u, const ScalarField& V) {
    if (u.grid != &grid || V.grid != &grid) throw GridMismatch("rayleigh_quotient");
    double uu = dot(u.values, u.values);
    if (!(uu > 0.0)) throw ZeroField("rayleigh_quotient: zero trial field");
    std::vector<double> Au(u.values.size());
    apply_shifted(grid, V.values, 0.0, u.values, Au);
    return dot(Au, u.values) / uu;
}

EigenPair principal_eigenpair(const GridDomain& grid, const ScalarField& V,
                              const EigenOptions& opts) {
    if (V.grid != &grid) throw GridMismatch("principal_eigenpair: V not on this grid");
    const int n = grid.size();
    const double h2 = grid.cell_area();

    // Gershgorin gives lambda_min >= -max(V) >= -1 for admissible V, so the
    // default shift -2 keeps A - shift positive definite; a shift near
    // lambda_1 - 2 tightens the power-iteration contraction considerably.
    const double shift = opts.shift.value_or(-2.0);

    std::vector<double> x;
    if (opts.warm_start != nullptr && opts.warm_start->grid == &grid &&
        static_cast<int>(opts.warm_start->values.size()) == n) {
        x = opts.warm_start->values;
    } else {
        x.assign(static_cast<std::size_t>(n), 1.0);
    }
    auto normalize = [&](std::vector<double>& v) {
        double nrm = std::sqrt(h2 * dot(v, v));
        if (!(nrm > 0.0)) throw ZeroField("principal_eigenpair: iterate collapsed");
        double inv = 1.0 / nrm;
        for (double& t : v) t *= inv;
    };
    normalize(x);

    std::vector<double> Ax(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    auto residual_of = [&](const std::vector<double>& v, double& lam_out) {
        apply_shifted(grid, V.values, 0.0, v, Ax);
        double lam = h2 * dot(Ax, v); // v is h^2-normalized
        CompensatedSum rr;
        for (int k = 0; k < n; ++k) {
            double d = Ax[k] - lam * v[k];
            rr.add(d * d);
        }
        lam_out = lam;
        return std::sqrt(h2 * rr.value());
    };

    double lam = 0.0;
    double res = residual_of(x, lam);
    int sweeps = 0;
    std::vector<double> res_hist{res};

    for (int it = 1; it <= opts.max_outer; ++it) {
        if (res <= opts.tol) break;
        sweeps = it;
        // inexact inverse iteration: a relative inner residual eta leaks
        // eta * (lambda - shift) back into the eigen residual, so the inner
        // target must absorb the shift distance
        double gap_scale = std::max(lam - shift, 1.0);
        double inner = std::clamp(0.05 * res / gap_scale, 0.01 * opts.tol, 1e-2);
        y = x; // warm start; solution direction barely moves between sweeps
        for (double& t : y) t /= std::max(lam - shift, 1e-3);
        cg_solve_shifted(grid, V.values, shift, x, y, inner, opts.max_cg);
        x = y;
        normalize(x);
        res = residual_of(x, lam);
        res_hist.push_back(res);

        // Each sweep contracts the residual by roughly (lambda_1 - shift) /
        // (lambda_2 - shift). Less than 2% total progress across 8 sweeps
        // means the spectral gap is too small for this shift to resolve.
        if (res > opts.tol && res_hist.size() >= 9 &&
            res > 0.98 * res_hist[res_hist.size() - 9])
            throw Degenerate("principal_eigenpair: residual stagnated, "
                             "spectral gap too small to resolve");
        if (it == opts.max_outer && res > opts.tol)
            throw NoConvergence("principal_eigenpair: residual above tolerance", res);
    }

    // Perron vector is one-signed on a connected grid; fix the sign by mass.
    double mass = 0.0;
    for (double t : x) mass += t;
    if (mass < 0.0)
        for (double& t : x) t = -t;
    for (double t : x)
        if (!(t > 0.0))
            throw Degenerate("principal_eigenpair: converged vector not strictly positive");

    EigenPair out;
    out.u = ScalarField(grid);
    out.u.values = std::move(x);
    out.residual = residual_of(out.u.values, out.lambda);
    out.iterations = sweeps;
    return out;
}

double dirichlet_ground_eigenvalue(const GridDomain& grid, double tol) {
    ScalarField zero(grid, 0.0);
    EigenOptions o;
    o.tol = tol;
    o.shift = -2.0;
    return principal_eigenpair(grid, zero, o).lambda;
}

} // namespace potlab
