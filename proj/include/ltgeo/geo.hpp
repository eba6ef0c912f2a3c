#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltgeo/types.hpp"

namespace ltgeo {

// Latitude/longitude in decimal degrees, WGS84-agnostic plate carree.
// Validation happens at construction sites via validate().
struct GeoCoord {
  double lat = 0.0;
  double lon = 0.0;
};

void validate(const GeoCoord& c);

// Chebyshev distance in degrees; the pairing and averaging rules are all
// per-axis, so this is the natural metric.
double coord_distance_deg(const GeoCoord& a, const GeoCoord& b);

// Euclidean distance in degree space; the interpolation and isolation
// statistics are defined on this one.
double coord_euclid_deg(const GeoCoord& a, const GeoCoord& b);

// Calendar date (proleptic Gregorian, UTC).
struct DateStamp {
  int year = 1970;
  int month = 1;
  int day = 1;
};

void validate(const DateStamp& d);
bool operator==(const DateStamp& a, const DateStamp& b);
bool operator<(const DateStamp& a, const DateStamp& b);

// Days since 1970-01-01.
std::int64_t date_serial(const DateStamp& d);
DateStamp date_from_serial(std::int64_t serial);
int day_of_year(const DateStamp& d);
DateStamp add_days(const DateStamp& d, int n);

// Wrap-safe distance between days-of-year, ignoring the year; the reference
// query window is defined in these terms.
int doy_distance(const DateStamp& a, const DateStamp& b);

std::string to_string(const DateStamp& d);
DateStamp parse_date(const std::string& iso);  // "YYYY-MM-DD"

// Regular lat/lon grid; cell (r, c) is centered at
// (lat0 + r*lat_step, lon0 + c*lon_step).
struct SearchGrid {
  double lat0 = 0.0;
  double lon0 = 0.0;
  double lat_step = 1.0;
  double lon_step = 1.0;
  index_t lat_count = 0;
  index_t lon_count = 0;

  index_t cells() const { return lat_count * lon_count; }
  GeoCoord cell_center(index_t r, index_t c) const;
  index_t index(index_t r, index_t c) const { return r * lon_count + c; }
  bool contains(const GeoCoord& p) const;
};

bool same_grid(const SearchGrid& a, const SearchGrid& b);

// Coarse localization grid over the supported region, 1 degree pitch.
SearchGrid make_coarse_grid();

// Per-cell likelihood raster. mask[i] is true where the value was estimated
// directly from data and false where it was filled or interpolated.
struct LikelihoodMap {
  SearchGrid grid;
  Arr values;                 // size grid.cells(), row-major (lat rows)
  std::vector<std::uint8_t> direct;  // same layout as values

  double& at(index_t r, index_t c) { return values[grid.index(r, c)]; }
  double at(index_t r, index_t c) const { return values[grid.index(r, c)]; }
};

LikelihoodMap make_map(const SearchGrid& g);

// Scales values to sum to one. Throws NumericalError when the mass is zero,
// negative, or not finite.
void normalize(LikelihoodMap& m);

// Bilinear upsample onto a finer grid with the same extent. new_step must
// divide both axis steps to within 1e-9. Mask is taken from the nearest
// coarse cell.
LikelihoodMap refine(const LikelihoodMap& m, double new_step);

// Elementwise product of two maps on an identical grid, then normalized.
LikelihoodMap fuse(const LikelihoodMap& a, const LikelihoodMap& b);

GeoCoord argmax_coord(const LikelihoodMap& m);

}  // namespace ltgeo
