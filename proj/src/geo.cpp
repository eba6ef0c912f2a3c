#include "ltgeo/geo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "ltgeo/errors.hpp"

namespace ltgeo {

namespace {

std::chrono::year_month_day to_ymd(const DateStamp& d) {
  return std::chrono::year_month_day{std::chrono::year{d.year},
                                     std::chrono::month{unsigned(d.month)},
                                     std::chrono::day{unsigned(d.day)}};
}

}  // namespace

void validate(const GeoCoord& c) {
  if (!std::isfinite(c.lat) || !std::isfinite(c.lon))
    throw InputError("coordinate is not finite");
  if (c.lat < -90.0 || c.lat > 90.0)
    throw InputError("latitude out of range: " + std::to_string(c.lat));
  if (c.lon < -180.0 || c.lon > 180.0)
    throw InputError("longitude out of range: " + std::to_string(c.lon));
}

double coord_distance_deg(const GeoCoord& a, const GeoCoord& b) {
  return std::max(std::abs(a.lat - b.lat), std::abs(a.lon - b.lon));
}

double coord_euclid_deg(const GeoCoord& a, const GeoCoord& b) {
  return std::hypot(a.lat - b.lat, a.lon - b.lon);
}

void validate(const DateStamp& d) {
  if (d.year < 1900 || d.year > 2200)
    throw InputError("year out of supported range: " + std::to_string(d.year));
  if (!to_ymd(d).ok()) throw InputError("invalid calendar date " + to_string(d));
}

bool operator==(const DateStamp& a, const DateStamp& b) {
  return a.year == b.year && a.month == b.month && a.day == b.day;
}

bool operator<(const DateStamp& a, const DateStamp& b) {
  return date_serial(a) < date_serial(b);
}

std::int64_t date_serial(const DateStamp& d) {
  validate(d);
  return std::chrono::sys_days(to_ymd(d)).time_since_epoch().count();
}

DateStamp date_from_serial(std::int64_t serial) {
  std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{serial}}};
  return DateStamp{int(ymd.year()), int(unsigned(ymd.month())),
                   int(unsigned(ymd.day()))};
}

int day_of_year(const DateStamp& d) {
  return int(date_serial(d) -
             date_serial(DateStamp{d.year, 1, 1})) + 1;
}

DateStamp add_days(const DateStamp& d, int n) {
  return date_from_serial(date_serial(d) + n);
}

int doy_distance(const DateStamp& a, const DateStamp& b) {
  // 366-day circle so Dec 31 and Jan 1 are one day apart in any year pair.
  int da = day_of_year(a), db = day_of_year(b);
  int diff = std::abs(da - db);
  return std::min(diff, 366 - diff);
}

std::string to_string(const DateStamp& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

DateStamp parse_date(const std::string& iso) {
  int y = 0, m = 0, dd = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &dd) != 3)
    throw InputError("cannot parse date: " + iso);
  DateStamp d{y, m, dd};
  validate(d);
  return d;
}

GeoCoord SearchGrid::cell_center(index_t r, index_t c) const {
  return GeoCoord{lat0 + double(r) * lat_step, lon0 + double(c) * lon_step};
}

bool SearchGrid::contains(const GeoCoord& p) const {
  double lat_hi = lat0 + double(lat_count - 1) * lat_step;
  double lon_hi = lon0 + double(lon_count - 1) * lon_step;
  return p.lat >= lat0 - 1e-12 && p.lat <= lat_hi + 1e-12 &&
         p.lon >= lon0 - 1e-12 && p.lon <= lon_hi + 1e-12;
}

bool same_grid(const SearchGrid& a, const SearchGrid& b) {
  return a.lat_count == b.lat_count && a.lon_count == b.lon_count &&
         std::abs(a.lat0 - b.lat0) < 1e-9 && std::abs(a.lon0 - b.lon0) < 1e-9 &&
         std::abs(a.lat_step - b.lat_step) < 1e-12 &&
         std::abs(a.lon_step - b.lon_step) < 1e-12;
}

SearchGrid make_coarse_grid() {
  SearchGrid g;
  g.lat0 = 27.0;
  g.lon0 = -122.0;
  g.lat_step = 1.0;
  g.lon_step = 1.0;
  g.lat_count = 22;   // 27..48
  g.lon_count = 57;   // -122..-66
  return g;
}

LikelihoodMap make_map(const SearchGrid& g) {
  if (g.lat_count <= 0 || g.lon_count <= 0)
    throw InputError("grid has no cells");
  LikelihoodMap m;
  m.grid = g;
  m.values = Arr::Zero(g.cells());
  m.direct.assign(size_t(g.cells()), 0);
  return m;
}

void normalize(LikelihoodMap& m) {
  if (!m.values.allFinite())
    throw NumericalError("likelihood map has non-finite values");
  if ((m.values < 0.0).any())
    throw NumericalError("likelihood map has negative values");
  double total = m.values.sum();
  if (!(total > 0.0))
    throw NumericalError("likelihood map has zero total mass");
  m.values /= total;
}

namespace {

index_t refined_count(index_t coarse_count, double ratio) {
  if (coarse_count <= 1) return coarse_count;
  return (coarse_count - 1) * index_t(std::llround(ratio)) + 1;
}

double axis_ratio(double coarse_step, double new_step, const char* axis) {
  double ratio = coarse_step / new_step;
  if (!(new_step > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 ||
      ratio < 1.0)
    throw InputError(std::string("refinement step does not divide ") + axis +
                     " step");
  return std::round(ratio);
}

}  // namespace

LikelihoodMap refine(const LikelihoodMap& m, double new_step) {
  const SearchGrid& g = m.grid;
  double rlat = axis_ratio(g.lat_step, new_step, "lat");
  double rlon = axis_ratio(g.lon_step, new_step, "lon");

  SearchGrid f;
  f.lat0 = g.lat0;
  f.lon0 = g.lon0;
  f.lat_step = g.lat_step / rlat;
  f.lon_step = g.lon_step / rlon;
  f.lat_count = refined_count(g.lat_count, rlat);
  f.lon_count = refined_count(g.lon_count, rlon);

  LikelihoodMap out = make_map(f);
  for (index_t r = 0; r < f.lat_count; ++r) {
    double u = double(r) / rlat;  // position in coarse rows
    index_t r0 = std::min(index_t(u), g.lat_count - 1);
    index_t r1 = std::min(r0 + 1, g.lat_count - 1);
    double fu = u - double(r0);
    for (index_t c = 0; c < f.lon_count; ++c) {
      double v = double(c) / rlon;
      index_t c0 = std::min(index_t(v), g.lon_count - 1);
      index_t c1 = std::min(c0 + 1, g.lon_count - 1);
      double fv = v - double(c0);
      double val = (1 - fu) * (1 - fv) * m.at(r0, c0) +
                   (1 - fu) * fv * m.at(r0, c1) +
                   fu * (1 - fv) * m.at(r1, c0) + fu * fv * m.at(r1, c1);
      out.at(r, c) = val;
      index_t nr = (fu < 0.5) ? r0 : r1;
      index_t nc = (fv < 0.5) ? c0 : c1;
      out.direct[size_t(f.index(r, c))] = m.direct[size_t(g.index(nr, nc))];
    }
  }
  return out;
}

LikelihoodMap fuse(const LikelihoodMap& a, const LikelihoodMap& b) {
  if (!same_grid(a.grid, b.grid))
    throw InputError("cannot fuse maps on different grids");
  LikelihoodMap out = make_map(a.grid);
  out.values = a.values * b.values;
  for (size_t i = 0; i < out.direct.size(); ++i)
    out.direct[i] = a.direct[i] && b.direct[i];
  normalize(out);
  return out;
}

GeoCoord argmax_coord(const LikelihoodMap& m) {
  if (m.values.size() == 0) throw InputError("empty likelihood map");
  index_t best;
  m.values.maxCoeff(&best);
  index_t r = best / m.grid.lon_count;
  index_t c = best % m.grid.lon_count;
  return m.grid.cell_center(r, c);
}

}  // namespace ltgeo
