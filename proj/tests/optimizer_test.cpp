#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "potlab/bathtub.hpp"
#include "potlab/grid.hpp"
#include "potlab/optimizer.hpp"
#include "potlab/rng.hpp"
#include "potlab/spectral.hpp"

using namespace potlab;

namespace {

int mirror_index(const GridDomain& grid, int k) {
    int i = grid.site_i(k), j = grid.site_j(k);
    int m = grid.site_to_interior[static_cast<std::size_t>(j) * grid.nx + (grid.nx - 1 - i)];
    REQUIRE(m >= 0);
    return m;
}

ScalarField mirror_field(const GridDomain& grid, const ScalarField& f) {
    ScalarField g(grid);
    for (int k = 0; k < grid.size(); ++k) g[mirror_index(grid, k)] = f[k];
    return g;
}

} // namespace

TEST_CASE("centered ball fills cells by distance") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 32);
    double V0 = 0.2 * grid.measure();
    auto ball = centered_ball(grid, V0, 0.5, 0.5);
    CHECK(integrate(grid, ball.field) == doctest::Approx(V0).epsilon(1e-13));

    double max_in = 0.0, min_out = 1e9;
    for (int k = 0; k < grid.size(); ++k) {
        double dx = grid.cx(k) - 0.5, dy = grid.cy(k) - 0.5;
        double d = std::sqrt(dx * dx + dy * dy);
        if (ball.field[k] == 1.0) max_in = std::max(max_in, d);
        if (ball.field[k] == 0.0) min_out = std::min(min_out, d);
    }
    CHECK(max_in <= min_out + 1e-12);

    // four-fold symmetry of the domain center
    ScalarField mirrored = mirror_field(grid, ball.field);
    for (int k = 0; k < grid.size(); ++k) CHECK(mirrored[k] == ball.field[k]);
}

TEST_CASE("random bang-bang starts are admissible and varied") {
    auto grid = build_grid(Shape::disk(0.5), 20);
    double V0 = 0.35 * grid.measure();
    Rng a(3, "optimizer/start", 0), b(3, "optimizer/start", 1);
    auto Va = random_bangbang(grid, V0, a);
    auto Vb = random_bangbang(grid, V0, b);
    CHECK(integrate(grid, Va.field) == doctest::Approx(V0).epsilon(1e-13));
    for (int k = 0; k < grid.size(); ++k) {
        CHECK(Va.field[k] >= 0.0);
        CHECK(Va.field[k] <= 1.0);
    }
    CHECK(l1_distance(Va.field, Vb.field) > 0.0);
}

TEST_CASE("multiplier and hopf constant on a slab with a linear field") {
    const int res = 16;
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), res);
    const double h = grid.h;
    const int ncol = res - 1; // 15 interior columns
    ScalarField u(grid);
    for (int k = 0; k < grid.size(); ++k) u[k] = grid.cx(k);

    // right slab of 4 columns: threshold between columns 11 and 12
    double V0 = 4 * ncol * h * h;
    auto set = bathtub_projection(grid, u, V0);
    for (int k = 0; k < grid.size(); ++k)
        CHECK(set.field[k] == (grid.site_i(k) >= 12 ? 1.0 : 0.0));

    // every interface midpoint sees u = 11.5 h exactly
    auto mi = lagrange_multiplier(grid, set, u);
    double mid = 11.5 * h;
    CHECK(mi.value == doctest::Approx(-mid * mid).epsilon(1e-13));
    CHECK(mi.spread == doctest::Approx(0.0).scale(mid * mid));

    // interface value 11.5h < unit slope, so the floor is the interface value
    CHECK(hopf_constant(grid, set, u) == doctest::Approx(mid).epsilon(1e-13));
}

TEST_CASE("fixed-point descent is monotone and terminates at the fixed point") {
    auto grid = build_grid(Shape::disk(0.5), 24);
    double V0 = 0.3 * grid.measure();
    Rng rng(11, "optimizer/start", 2);
    auto init = random_bangbang(grid, V0, rng);

    auto res = optimize_potential(grid, init);
    REQUIRE(res.history.converged);
    const auto& steps = res.history.steps;
    REQUIRE(!steps.empty());
    for (std::size_t s = 1; s < steps.size(); ++s)
        CHECK(steps[s].lambda <= steps[s - 1].lambda + 2e-9);
    CHECK(steps.back().fixed_point_residual <= grid.cell_area());

    // feeding the fixed point back converges in one evaluation
    auto again = optimize_potential(grid, res.V);
    CHECK(again.history.steps.size() == 1);
    CHECK(l1_distance(again.V.field, res.V.field) == 0.0);
    CHECK(again.pair.lambda == doctest::Approx(res.pair.lambda).epsilon(1e-11));

    // the eigenpair reported belongs to the returned potential
    auto direct = principal_eigenpair(grid, res.V.field);
    CHECK(res.pair.lambda == doctest::Approx(direct.lambda).epsilon(1e-10));
}

TEST_CASE("descent respects the mirror symmetry of the problem") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 20);
    double V0 = 0.25 * grid.measure();
    Rng rng(17, "optimizer/start", 5);
    auto init = random_bangbang(grid, V0, rng);
    auto mirrored_init = Potential::checked(mirror_field(grid, init.field), V0);

    auto a = optimize_potential(grid, init);
    auto b = optimize_potential(grid, mirrored_init);
    CHECK(a.pair.lambda == doctest::Approx(b.pair.lambda).epsilon(1e-7));
    CHECK(l1_distance(mirror_field(grid, a.V.field), b.V.field) <=
          1e-6 * grid.measure());
}

TEST_CASE("iteration cap surfaces as a no-convergence error") {
    auto grid = build_grid(Shape::disk(0.5), 24);
    double V0 = 0.3 * grid.measure();
    Rng rng(23, "optimizer/start", 1);
    auto init = random_bangbang(grid, V0, rng);
    OptimizerOptions opts;
    opts.max_iter = 1;
    opts.fp_tol = 1e-15; // unreachable from a random start in one step
    CHECK_THROWS_AS(optimize_potential(grid, init, opts), NoConvergence);
}

TEST_CASE("enumeration builds a deterministic ordered registry") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 24);
    double V0 = 0.25 * grid.measure();
    EnumerateOptions opts;
    opts.n_starts = 6;
    opts.seed = 7;

    auto reg = enumerate_optima(grid, V0, opts);
    REQUIRE(!reg.entries.empty());
    CHECK(reg.V0 == V0);
    CHECK(reg.failed_starts == 0);

    double lam_d = dirichlet_ground_eigenvalue(grid);
    CHECK(reg.dirichlet_lambda == doctest::Approx(lam_d).epsilon(1e-10));
    CHECK(reg.lambda_bar >= lam_d - 1.0 - 1e-8);
    CHECK(reg.lambda_bar <= lam_d + 1e-8);
    CHECK(reg.lambda_bar == reg.entries.front().lambda);

    for (std::size_t i = 0; i < reg.entries.size(); ++i) {
        const auto& e = reg.entries[i];
        CHECK(e.lambda <= reg.lambda_bar + reg.cluster_tol);
        if (i > 0) CHECK(e.lambda >= reg.entries[i - 1].lambda);
        CHECK(e.fixed_point_residual <= grid.cell_area());
        CHECK(e.multiplier < 0.0);
        CHECK(std::abs(e.multiplier + e.mu * e.mu) <= e.multiplier_spread + 1e-12);
        CHECK(e.hopf > 0.0);
        CHECK(e.perimeter > 0.0);
        CHECK(integrate(grid, e.V.field) == doctest::Approx(V0).epsilon(1e-13));
        for (std::size_t j = 0; j < i; ++j)
            CHECK(l1_distance(e.V.field, reg.entries[j].V.field) >= reg.beta);
    }

    // a deliberately bad competitor cannot beat the registry floor
    auto corner = centered_ball(grid, V0, 0.1, 0.1);
    auto corner_pair = principal_eigenpair(grid, corner.field);
    CHECK(reg.lambda_bar <= corner_pair.lambda + 1e-9);

    auto reg2 = enumerate_optima(grid, V0, opts);
    CHECK(reg2.lambda_bar == reg.lambda_bar);
    REQUIRE(reg2.entries.size() == reg.entries.size());
    for (std::size_t i = 0; i < reg.entries.size(); ++i)
        CHECK(l1_distance(reg2.entries[i].V.field, reg.entries[i].V.field) == 0.0);
}

TEST_CASE("deforming along a rotation leaves a ball invariant") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 40);
    double V0 = 0.15 * grid.measure();
    auto ball = centered_ball(grid, V0, 0.5, 0.5);
    auto pair = principal_eigenpair(grid, ball.field);
    auto mi = lagrange_multiplier(grid, ball, pair.u);

    VectorFieldSpec rot;
    rot.kind = VectorFieldSpec::Kind::Rotation;
    rot.cx = 0.5;
    rot.cy = 0.5;
    rot.support = 0.45;
    rot.amplitude = 0.5;

    double h = grid.h;
    std::vector<double> ts = {-h, -0.5 * h, 0.0, 0.5 * h, h};
    auto rep = shape_derivative_check(grid, ball, mi.value, rot, ts);
    REQUIRE(rep.cases.size() == ts.size());

    long rounded = 0;
    for (int k = 0; k < grid.size(); ++k) rounded += ball.field[k] >= 0.5;
    double lam0 = 0.0;
    for (const auto& c : rep.cases) {
        if (c.t == 0.0) {
            CHECK(c.volume == doctest::Approx(rounded * grid.cell_area()).epsilon(1e-14));
            lam0 = c.lambda;
        }
    }
    for (const auto& c : rep.cases)
        CHECK(c.lambda == doctest::Approx(lam0).epsilon(1e-5));

    // the analytic flux of a rotation through its own center circle vanishes
    double radius = std::sqrt(V0 / 3.14159265358979323846);
    double formula = surface_formula_ball(grid, pair.u, mi.value, 0.5, 0.5, radius, rot);
    CHECK(formula == doctest::Approx(0.0).scale(std::abs(mi.value)).epsilon(1e-10));
}

TEST_CASE("deformation reaching the boundary is rejected") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 32);
    double V0 = 0.2 * grid.measure();
    auto ball = centered_ball(grid, V0, 0.72, 0.5); // close to the right wall
    VectorFieldSpec push;
    push.kind = VectorFieldSpec::Kind::RadialBump;
    push.cx = 0.5;
    push.cy = 0.5;
    push.support = 1.0;
    push.amplitude = 1.0;
    std::vector<double> ts = {0.0, 0.15, 0.3};
    CHECK_THROWS_AS(shape_derivative_check(grid, ball, -0.1, push, ts), DeformationEscapes);
}

TEST_CASE("finite differences track the surface formula off optimum") {
    auto grid = build_grid(Shape::disk(0.5), 48);
    double V0 = 0.18 * grid.measure();
    // off-center ball: not a critical shape, so the derivative is visibly nonzero
    double cx = 0.42, cy = 0.5;
    auto ball = centered_ball(grid, V0, cx, cy);
    auto pair = principal_eigenpair(grid, ball.field);
    auto mi = lagrange_multiplier(grid, ball, pair.u);

    VectorFieldSpec phi;
    phi.kind = VectorFieldSpec::Kind::RadialBump;
    phi.cx = cx;
    phi.cy = cy;
    phi.support = 0.4;
    phi.amplitude = 0.3;

    double h = grid.h;
    std::vector<double> ts = {-2 * h, -h, 0.0, h, 2 * h};
    auto rep = shape_derivative_check(grid, ball, mi.value, phi, ts);

    double radius = std::sqrt(V0 / 3.14159265358979323846);
    double formula = surface_formula_ball(grid, pair.u, mi.value, cx, cy, radius, phi);
    CHECK(formula != 0.0);
    CHECK(rep.fd_slope == doctest::Approx(formula).epsilon(0.35));
}
