#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "potlab/bathtub.hpp"
#include "potlab/grid.hpp"
#include "potlab/rng.hpp"
#include "potlab/spectral.hpp"

using namespace potlab;

namespace {
constexpr double kPi = 3.14159265358979323846;

// closed-form ground eigenvalue of the discrete Dirichlet Laplacian on the
// unit square with spacing h
double square_lambda(double h) { return (4.0 / (h * h)) * (1.0 - std::cos(kPi * h)); }

ScalarField random_admissible(const GridDomain& grid, Rng& rng) {
    ScalarField V(grid);
    for (int k = 0; k < grid.size(); ++k) V[k] = rng.uniform();
    return V;
}
} // namespace

TEST_CASE("free laplacian ground state on the square matches the closed form") {
    for (int res : {16, 32}) {
        auto grid = build_grid(Shape::rectangle(1.0, 1.0), res);
        ScalarField zero(grid);
        auto pair = principal_eigenpair(grid, zero);
        double expect = square_lambda(grid.h);
        CHECK(pair.lambda == doctest::Approx(expect).epsilon(1e-10));
        CHECK(pair.residual <= 1e-9);
        CHECK(pair.iterations > 0);

        // normalized, strictly positive
        CHECK(dot_h2(pair.u, pair.u) == doctest::Approx(1.0).epsilon(1e-12));
        for (int k = 0; k < grid.size(); ++k) CHECK(pair.u[k] > 0.0);

        // eigenfunction is the product sine up to normalization
        ScalarField s(grid);
        for (int k = 0; k < grid.size(); ++k)
            s[k] = std::sin(kPi * grid.cx(k)) * std::sin(kPi * grid.cy(k));
        double cos_sim = dot_h2(pair.u, s) / std::sqrt(dot_h2(s, s));
        CHECK(cos_sim == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("dirichlet ground eigenvalue helper agrees with the closed form") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 24);
    CHECK(dirichlet_ground_eigenvalue(grid) ==
          doctest::Approx(square_lambda(grid.h)).epsilon(1e-10));
}

TEST_CASE("rectangle 2x1 approaches five quarters pi squared") {
    auto grid = build_grid(Shape::rectangle(2.0, 1.0), 48);
    ScalarField zero(grid);
    auto pair = principal_eigenpair(grid, zero);
    CHECK(pair.lambda == doctest::Approx(1.25 * kPi * kPi).epsilon(2e-3));
}

TEST_CASE("disk ground eigenvalue approaches the squared bessel zero") {
    auto grid = build_grid(Shape::disk(1.0), 64);
    ScalarField zero(grid);
    auto pair = principal_eigenpair(grid, zero);
    CHECK(pair.lambda == doctest::Approx(5.783185962946785).epsilon(0.03));
}

TEST_CASE("adding a constant shifts the eigenvalue down exactly") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 24);
    Rng rng(5, "spectral/shift");
    for (int rep = 0; rep < 6; ++rep) {
        ScalarField V = random_admissible(grid, rng);
        double c = rng.uniform(0.05, 0.5);
        ScalarField Vc(grid);
        for (int k = 0; k < grid.size(); ++k) Vc[k] = V[k] + c;
        auto a = principal_eigenpair(grid, V);
        EigenOptions opts;
        opts.shift = -3.0; // V + c can exceed 1, keep the shift below the spectrum
        auto b = principal_eigenpair(grid, Vc, opts);
        CHECK(b.lambda == doctest::Approx(a.lambda - c).epsilon(1e-8));
    }
}

TEST_CASE("eigenvalue obeys the potential sandwich bounds") {
    auto grid = build_grid(Shape::disk(0.5), 24);
    double lam_d = dirichlet_ground_eigenvalue(grid);
    Rng rng(17, "spectral/bounds");
    for (int rep = 0; rep < 4; ++rep) {
        ScalarField V = random_admissible(grid, rng);
        auto pair = principal_eigenpair(grid, V);
        CHECK(pair.lambda >= lam_d - 1.0 - 1e-8);
        CHECK(pair.lambda <= lam_d + 1e-8);
    }

    // saturated potential: exactly the lower endpoint
    ScalarField ones(grid, 1.0);
    auto full = principal_eigenpair(grid, ones);
    CHECK(full.lambda == doctest::Approx(lam_d - 1.0).epsilon(1e-9));
}

TEST_CASE("pointwise larger potentials lower the eigenvalue") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 20);
    Rng rng(23, "spectral/monotone");
    ScalarField V = random_admissible(grid, rng);
    for (int k = 0; k < grid.size(); ++k) V[k] *= 0.5;
    ScalarField W(grid);
    for (int k = 0; k < grid.size(); ++k) W[k] = V[k] + 0.4 * rng.uniform();
    auto a = principal_eigenpair(grid, V);
    auto b = principal_eigenpair(grid, W);
    CHECK(b.lambda <= a.lambda + 1e-9);
}

TEST_CASE("rayleigh quotient dominates the principal eigenvalue") {
    auto grid = build_grid(Shape::disk(0.5), 20);
    Rng rng(31, "spectral/variational");
    ScalarField V = random_admissible(grid, rng);
    auto pair = principal_eigenpair(grid, V);
    for (int rep = 0; rep < 50; ++rep) {
        ScalarField w(grid);
        for (int k = 0; k < grid.size(); ++k) w[k] = rng.uniform(-1.0, 1.0);
        CHECK(rayleigh_quotient(grid, w, V) >= pair.lambda - 1e-9);
    }
    CHECK(rayleigh_quotient(grid, pair.u, V) ==
          doctest::Approx(pair.lambda).epsilon(1e-10));

    ScalarField z(grid);
    CHECK_THROWS_AS(rayleigh_quotient(grid, z, V), ZeroField);
}

TEST_CASE("warm starts converge immediately at the solution") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 32);
    Rng rng(41, "spectral/warm");
    ScalarField V = random_admissible(grid, rng);
    auto cold = principal_eigenpair(grid, V);
    EigenOptions opts;
    opts.warm_start = &cold.u;
    auto warm = principal_eigenpair(grid, V, opts);
    CHECK(warm.lambda == doctest::Approx(cold.lambda).epsilon(1e-10));
    CHECK(warm.iterations <= 2);
    CHECK(warm.iterations < cold.iterations);
}

TEST_CASE("iteration budget exhaustion reports no convergence") {
    auto grid = build_grid(Shape::rectangle(1.0, 1.0), 32);
    ScalarField zero(grid);
    EigenOptions opts;
    opts.max_outer = 1;
    CHECK_THROWS_AS(principal_eigenpair(grid, zero, opts), NoConvergence);
    try {
        principal_eigenpair(grid, zero, opts);
    } catch (const NoConvergence& e) {
        CHECK(e.best_residual > 0.0);
    }
}

TEST_CASE("plain cg solves the shifted system") {
    auto grid = build_grid(Shape::disk(0.5), 16);
    Rng rng(53, "spectral/cg");
    std::vector<double> V(grid.size());
    for (auto& v : V) v = rng.uniform();
    std::vector<double> b(grid.size()), x(grid.size(), 0.0);
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    cg_solve_shifted(grid, V, -2.0, b, x, 1e-12, 10000);

    // residual check against a hand-rolled operator application
    ScalarField xf(grid);
    xf.values = x;
    ScalarField Lx = laplacian_apply(grid, xf);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
        double r = Lx[k] - V[k] * x[k] + 2.0 * x[k] - b[k];
        num += r * r;
        den += b[k] * b[k];
    }
    CHECK(std::sqrt(num / den) <= 1e-10);
}
