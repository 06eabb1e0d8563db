#include "potlab/bathtub.hpp"

#include <algorithm>
#include <cmath>

namespace potlab {

LevelSetInfo level_threshold(const GridDomain& grid, const ScalarField& f, double V0) {
    if (f.grid != &grid) throw GridMismatch("level_threshold");
    require_admissible_mass(grid, V0);
    const double a = grid.cell_area();

    std::vector<double> v = f.values;
    std::sort(v.begin(), v.end(), std::greater<double>());

    // walk plateaus until the closed mass strictly exceeds V0
    std::size_t pos = 0;
    double below = 0.0; // closed mass strictly above the current plateau
    LevelSetInfo info;
    while (pos < v.size()) {
        double val = v[pos];
        std::size_t end = pos;
        while (end < v.size() && v[end] == val) ++end;
        double closed = a * static_cast<double>(end);
        if (closed > V0) {
            info.mu = val;
            info.strict_mass = below;
            info.closed_mass = closed;
            info.tie_fraction = (V0 - below) / (closed - below);
            return info;
        }
        below = closed;
        pos = end;
    }
    // unreachable: V0 < |Omega| = closed mass of the smallest value
    throw MassOutOfRange("level_threshold: mass target not bracketed");
}

Potential bathtub_projection(const GridDomain& grid, const ScalarField& f, double V0) {
    LevelSetInfo info = level_threshold(grid, f, V0);
    ScalarField V(grid);
    for (int k = 0; k < grid.size(); ++k) {
        double fv = f.values[static_cast<std::size_t>(k)];
        if (fv > info.mu)
            V.values[static_cast<std::size_t>(k)] = 1.0;
        else if (fv == info.mu)
            V.values[static_cast<std::size_t>(k)] = info.tie_fraction;
    }
    return Potential::checked(std::move(V), V0);
}

RearrangementProfile decreasing_rearrangement(const GridDomain& grid, const ScalarField& f) {
    if (f.grid != &grid) throw GridMismatch("decreasing_rearrangement");
    RearrangementProfile prof;
    prof.sorted_values = f.values;
    std::sort(prof.sorted_values.begin(), prof.sorted_values.end(), std::greater<double>());
    prof.cumulative_measure.resize(prof.sorted_values.size());
    const double a = grid.cell_area();
    // closed measure: within a tie plateau every entry reports the plateau end
    std::size_t pos = 0;
    while (pos < prof.sorted_values.size()) {
        std::size_t end = pos;
        while (end < prof.sorted_values.size() && prof.sorted_values[end] == prof.sorted_values[pos])
            ++end;
        for (std::size_t r = pos; r < end; ++r)
            prof.cumulative_measure[r] = a * static_cast<double>(end);
        pos = end;
    }
    return prof;
}

double boundary_steepness(const GridDomain& grid, const ScalarField& f, const LevelSetInfo& info) {
    if (f.grid != &grid) throw GridMismatch("boundary_steepness");
    double best = 0.0;
    bool found = false;
    for (int k = 0; k < grid.size(); ++k) {
        double fk = f.values[static_cast<std::size_t>(k)];
        if (!(fk > info.mu)) continue;
        for (int d = 0; d < 4; ++d) {
            std::int32_t njd = grid.neighbor[k][d];
            if (njd < 0) continue;
            double fn = f.values[static_cast<std::size_t>(njd)];
            if (fn > info.mu) continue;
            double slope = (fk - fn) / grid.h;
            if (!found || slope < best) {
                best = slope;
                found = true;
            }
        }
    }
    return found ? best : 0.0;
}

double bathtub_stability_ratio(const GridDomain& grid, const ScalarField& f, const Potential& V) {
    if (f.grid != &grid || V.field.grid != &grid) throw GridMismatch("bathtub_stability_ratio");
    Potential Vf = bathtub_projection(grid, f, V.target_mass);
    double dist = l1_distance(V.field, Vf.field);
    if (!(dist > 0.0))
        throw DegenerateDistance("bathtub_stability_ratio: V equals the projection");
    CompensatedSum s;
    for (int k = 0; k < grid.size(); ++k) {
        auto i = static_cast<std::size_t>(k);
        s.add(f.values[i] * (Vf.field.values[i] - V.field.values[i]));
    }
    double gap = grid.cell_area() * s.value();
    return gap / (dist * dist);
}

double discrete_perimeter(const GridDomain& grid, const Potential& set) {
    if (set.field.grid != &grid) throw GridMismatch("discrete_perimeter");
    const int n = grid.size();
    std::vector<char> in(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        in[static_cast<std::size_t>(k)] = set.field.values[static_cast<std::size_t>(k)] >= 0.5;

    long cross = 0;
    long rim = 0;
    for (int k = 0; k < n; ++k) {
        const auto& nb = grid.neighbor[k];
        // count each interior pair once via E and N
        for (int d : {1, 3}) {
            if (nb[d] >= 0 && in[static_cast<std::size_t>(k)] != in[static_cast<std::size_t>(nb[d])])
                ++cross;
        }
        if (in[static_cast<std::size_t>(k)] && grid.touches_boundary(k)) ++rim;
    }
    return grid.h * static_cast<double>(cross + rim);
}

} // namespace potlab
