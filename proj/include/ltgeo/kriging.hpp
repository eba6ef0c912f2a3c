#pragma once

#include <vector>

#include "ltgeo/geo.hpp"
#include "ltgeo/types.hpp"

namespace ltgeo {

// Exponential variogram gamma(h) = nugget + sill*(1 - exp(-h/range_deg)).
// Distances are Euclidean in degree space.
struct VariogramModel {
  double sill = 1.0;
  double range_deg = 1.0;
  double nugget = 0.0;

  double operator()(double h) const;
};

// Least-squares fit of the empirical variogram (binned pairwise squared
// half-differences) over a range grid, sill solved in closed form per range.
// A flat field (all values equal) degenerates to sill=1 with the mean
// pairwise distance as range, which reduces kriging to smooth geometric
// weighting.
VariogramModel fit_variogram(const std::vector<GeoCoord>& coords,
                             const Vec& values);

// Ordinary kriging weights for one target: solves the (k+1) system with the
// unbiasedness constraint (weights sum to 1). Coords must be distinct.
Vec kriging_weights(const std::vector<GeoCoord>& coords,
                    const VariogramModel& vg, const GeoCoord& target);

// BLUE estimate at target. Duplicate sample coords are averaged before the
// solve; a still-singular system throws NumericalError. Exact at sample
// points when the nugget is zero.
double kriging_interpolate(const std::vector<GeoCoord>& coords,
                           const Vec& values, const GeoCoord& target);

}  // namespace ltgeo
