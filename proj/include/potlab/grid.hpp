#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "potlab/common.hpp"

namespace potlab {

// Shapes are placed with the bounding box origin at (0,0). For a mask, one
// bitmap pixel spans a 1x1 block of the bounding box, row 0 at the bottom.
struct Shape {
    enum class Kind { Rectangle, Disk, Mask };
    Kind kind = Kind::Rectangle;
    double width = 1.0;   // rectangle
    double height = 1.0;  // rectangle
    double radius = 0.5;  // disk
    std::vector<std::vector<bool>> mask; // mask[row][col], row-major bottom-up

    static Shape rectangle(double w, double h);
    static Shape disk(double r);
    static Shape bitmap(std::vector<std::vector<bool>> m);

    double bbox_width() const;
    double bbox_height() const;
    bool contains(double x, double y) const; // strict interior test
};

// Uniform Cartesian grid. Cells are h x h squares centered on lattice points
// (i*h, j*h); a cell is interior iff its center lies strictly inside the
// shape. Missing neighbors of interior cells carry the implicit Dirichlet
// value 0, so for box-aligned domains the zero line falls exactly on the
// boundary. Interior cells are ordered row-major (j outer, i inner).
class GridDomain {
public:
    Shape shape;
    int resolution = 0;  // cells across the longest bounding-box side
    double h = 0.0;      // lattice spacing, cell area h*h
    int nx = 0, ny = 0;  // lattice sites per axis spanning the bounding box

    std::vector<std::int32_t> site_to_interior;        // nx*ny, -1 outside
    std::vector<std::int32_t> interior_site;           // interior index -> site index
    std::vector<std::array<std::int32_t, 4>> neighbor; // W,E,S,N interior indices, -1 = Dirichlet

    int size() const { return static_cast<int>(interior_site.size()); }
    double cell_area() const { return h * h; }
    double measure() const { return cell_area() * size(); } // |Omega|_discrete

    int site_i(int k) const { return interior_site[k] % nx; }
    int site_j(int k) const { return interior_site[k] / nx; }
    double cx(int k) const { return site_i(k) * h; }
    double cy(int k) const { return site_j(k) * h; }
    bool touches_boundary(int k) const {
        const auto& nb = neighbor[k];
        return nb[0] < 0 || nb[1] < 0 || nb[2] < 0 || nb[3] < 0;
    }
};

// Throws GridError("EmptyInterior") when no cell center lands strictly inside
// and GridError("Disconnected") when the interior is not 4-connected.
GridDomain build_grid(const Shape& shape, int resolution);

// Values on interior cells, in grid order. The grid must outlive the field.
struct ScalarField {
    const GridDomain* grid = nullptr;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(const GridDomain& g, double fill = 0.0)
        : grid(&g), values(static_cast<std::size_t>(g.size()), fill) {}

    double& operator[](int k) { return values[static_cast<std::size_t>(k)]; }
    double operator[](int k) const { return values[static_cast<std::size_t>(k)]; }
    int size() const { return static_cast<int>(values.size()); }
};

void require_same_grid(const ScalarField& a, const ScalarField& b);

// 5-point Dirichlet Laplacian: (4*u(k) - sum of present neighbors) / h^2.
ScalarField laplacian_apply(const GridDomain& grid, const ScalarField& u);
void laplacian_apply_into(const GridDomain& grid, const std::vector<double>& u, std::vector<double>& out);

double integrate(const GridDomain& grid, const ScalarField& u); // h^2 * compensated sum
double l1_distance(const ScalarField& a, const ScalarField& b);
double dot_h2(const ScalarField& a, const ScalarField& b);      // h^2-weighted inner product
double norm_h2(const ScalarField& a);

// Element of the admissible class: 0 <= V <= 1 with integral target_mass.
// checked() is the validating constructor used at module boundaries; values
// within 1e-12 of the box are snapped, anything worse throws.
struct Potential {
    ScalarField field;
    double target_mass = 0.0;

    static Potential checked(ScalarField f, double target_mass);
};

// V0 must lie strictly between 0 and |Omega|_discrete.
void require_admissible_mass(const GridDomain& grid, double V0);

} // namespace potlab
