#pragma once

#include <vector>

#include "potlab/grid.hpp"

namespace potlab {

// Level data of the superlevel-set threshold for a prescribed mass.
// mu is the largest cell value whose closed superlevel mass strictly exceeds
// V0, so {f > mu} underfills and {f >= mu} overfills:
//   strict_mass <= V0 <= closed_mass, and
//   strict_mass + tie_fraction * (closed_mass - strict_mass) == V0.
struct LevelSetInfo {
    double mu = 0.0;
    double strict_mass = 0.0;   // h^2 * #{f > mu}
    double closed_mass = 0.0;   // h^2 * #{f >= mu}
    double tie_fraction = 0.0;  // value placed on the tie level {f == mu}
};

LevelSetInfo level_threshold(const GridDomain& grid, const ScalarField& f, double V0);

// Pointwise maximizer of integral(f * V) over the admissible class: indicator
// of {f > mu} with the tie level filled fractionally so the mass is exact.
Potential bathtub_projection(const GridDomain& grid, const ScalarField& f, double V0);

// Distribution data: sorted_values descending with cumulative_measure[r] the
// closed superlevel measure of sorted_values[r] (ties share one plateau).
struct RearrangementProfile {
    std::vector<double> sorted_values;
    std::vector<double> cumulative_measure;
};

RearrangementProfile decreasing_rearrangement(const GridDomain& grid, const ScalarField& f);

// Steepest-descent proxy at the level line: minimum of |f(a)-f(b)|/h over
// 4-neighbor pairs with f(a) > mu >= f(b). Zero when no pair crosses.
double boundary_steepness(const GridDomain& grid, const ScalarField& f, const LevelSetInfo& info);

// gap / dist^2 with gap = integral(f*(V_f - V)) >= 0 and dist = l1(V, V_f),
// V_f the bathtub projection of f at V's mass. Throws DegenerateDistance when
// V is the projection itself.
double bathtub_stability_ratio(const GridDomain& grid, const ScalarField& f, const Potential& V);

// Staircase perimeter of the set {rounded value == 1}: h * (# opposite-side
// 4-neighbor pairs) + h * (# set cells with a missing neighbor). Overshoots
// smooth boundaries by up to 4/pi (Manhattan bias).
double discrete_perimeter(const GridDomain& grid, const Potential& set);

} // namespace potlab
