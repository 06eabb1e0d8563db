#include "potlab/grid.hpp"

#include <cmath>
#include <queue>

namespace potlab {

Shape Shape::rectangle(double w, double h) {
    Shape s;
    s.kind = Kind::Rectangle;
    s.width = w;
    s.height = h;
    return s;
}

Shape Shape::disk(double r) {
    Shape s;
    s.kind = Kind::Disk;
    s.radius = r;
    return s;
}

Shape Shape::bitmap(std::vector<std::vector<bool>> m) {
    Shape s;
    s.kind = Kind::Mask;
    s.mask = std::move(m);
    return s;
}

double Shape::bbox_width() const {
    switch (kind) {
    case Kind::Rectangle: return width;
    case Kind::Disk: return 2.0 * radius;
    case Kind::Mask: return mask.empty() ? 0.0 : static_cast<double>(mask[0].size());
    }
    return 0.0;
}

double Shape::bbox_height() const {
    switch (kind) {
    case Kind::Rectangle: return height;
    case Kind::Disk: return 2.0 * radius;
    case Kind::Mask: return static_cast<double>(mask.size());
    }
    return 0.0;
}

bool Shape::contains(double x, double y) const {
    switch (kind) {
    case Kind::Rectangle:
        return x > 0.0 && x < width && y > 0.0 && y < height;
    case Kind::Disk: {
        double dx = x - radius, dy = y - radius;
        return dx * dx + dy * dy < radius * radius;
    }
    case Kind::Mask: {
        if (x <= 0.0 || y <= 0.0 || x >= bbox_width() || y >= bbox_height()) return false;
        auto col = static_cast<std::size_t>(x);
        auto row = static_cast<std::size_t>(y);
        if (row >= mask.size() || col >= mask[row].size()) return false;
        return mask[row][col];
    }
    }
    return false;
}

GridDomain build_grid(const Shape& shape, int resolution) {
    if (resolution < 2) throw GridError("build_grid: resolution must be at least 2");
    double W = shape.bbox_width();
    double H = shape.bbox_height();
    if (!(W > 0.0) || !(H > 0.0)) throw GridError("EmptyInterior: degenerate shape");
    if (shape.kind == Shape::Kind::Disk && !(shape.radius > 0.0))
        throw GridError("EmptyInterior: degenerate shape");

    GridDomain g;
    g.shape = shape;
    g.resolution = resolution;
    double longest = std::max(W, H);
    g.h = longest / resolution;
    // lattice sites i*h covering [0, W] x [0, H]; +1e-9*h guards against
    // W/h = integer landing one ulp short
    g.nx = static_cast<int>(std::floor(W / g.h + 1e-9)) + 1;
    g.ny = static_cast<int>(std::floor(H / g.h + 1e-9)) + 1;

    g.site_to_interior.assign(static_cast<std::size_t>(g.nx) * g.ny, -1);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            if (shape.contains(i * g.h, j * g.h)) {
                g.site_to_interior[static_cast<std::size_t>(j) * g.nx + i] =
                    static_cast<std::int32_t>(g.interior_site.size());
                g.interior_site.push_back(static_cast<std::int32_t>(j * g.nx + i));
            }
        }
    }
    if (g.interior_site.empty()) throw GridError("EmptyInterior: no cell center inside shape");

    g.neighbor.resize(g.interior_site.size());
    for (int k = 0; k < g.size(); ++k) {
        int i = g.site_i(k), j = g.site_j(k);
        auto at = [&](int ii, int jj) -> std::int32_t {
            if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) return -1;
            return g.site_to_interior[static_cast<std::size_t>(jj) * g.nx + ii];
        };
        g.neighbor[k] = {at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)};
    }

    // 4-connectivity sweep
    std::vector<char> seen(g.interior_site.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!q.empty()) {
        int k = q.front();
        q.pop();
        for (int d = 0; d < 4; ++d) {
            std::int32_t n = g.neighbor[k][d];
            if (n >= 0 && !seen[n]) {
                seen[n] = 1;
                ++reached;
                q.push(n);
            }
        }
    }
    if (reached != g.interior_site.size())
        throw GridError("Disconnected: interior is not 4-connected");
    return g;
}

void require_same_grid(const ScalarField& a, const ScalarField& b) {
    if (a.grid == nullptr || b.grid == nullptr || a.grid != b.grid)
        throw GridMismatch("fields belong to different grids");
}

void laplacian_apply_into(const GridDomain& grid, const std::vector<double>& u, std::vector<double>& out) {
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    const int n = grid.size();
    out.resize(u.size());
    for (int k = 0; k < n; ++k) {
        const auto& nb = grid.neighbor[k];
        double s = 4.0 * u[k];
        if (nb[0] >= 0) s -= u[nb[0]];
        if (nb[1] >= 0) s -= u[nb[1]];
        if (nb[2] >= 0) s -= u[nb[2]];
        if (nb[3] >= 0) s -= u[nb[3]];
        out[k] = s * inv_h2;
    }
}

ScalarField laplacian_apply(const GridDomain& grid, const ScalarField& u) {
    if (u.grid != &grid) throw GridMismatch("laplacian_apply: field not on this grid");
    ScalarField out(grid);
    laplacian_apply_into(grid, u.values, out.values);
    return out;
}

double integrate(const GridDomain& grid, const ScalarField& u) {
    if (u.grid != &grid) throw GridMismatch("integrate: field not on this grid");
    return grid.cell_area() * compensated_sum(u.values);
}

double l1_distance(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b);
    CompensatedSum s;
    for (std::size_t k = 0; k < a.values.size(); ++k) s.add(std::abs(a.values[k] - b.values[k]));
    return a.grid->cell_area() * s.value();
}

double dot_h2(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a, b);
    CompensatedSum s;
    for (std::size_t k = 0; k < a.values.size(); ++k) s.add(a.values[k] * b.values[k]);
    return a.grid->cell_area() * s.value();
}

double norm_h2(const ScalarField& a) { return std::sqrt(dot_h2(a, a)); }

Potential Potential::checked(ScalarField f, double target_mass) {
    if (f.grid == nullptr) throw InvalidPotential("potential has no grid");
    require_admissible_mass(*f.grid, target_mass);
    const double snap = 1e-12;
    for (double& v : f.values) {
        if (v < 0.0) {
            if (v < -snap) throw InvalidPotential("potential value below 0");
            v = 0.0;
        } else if (v > 1.0) {
            if (v > 1.0 + snap) throw InvalidPotential("potential value above 1");
            v = 1.0;
        }
    }
    double mass = integrate(*f.grid, f);
    if (std::abs(mass - target_mass) > 1e-12 * f.grid->measure())
        throw InvalidPotential("potential mass off target by " + std::to_string(mass - target_mass));
    Potential p;
    p.field = std::move(f);
    p.target_mass = target_mass;
    return p;
}

void require_admissible_mass(const GridDomain& grid, double V0) {
    if (!(V0 > 0.0) || !(V0 < grid.measure()))
        throw MassOutOfRange("mass target must lie strictly inside (0, |Omega|)");
}

} // namespace potlab
