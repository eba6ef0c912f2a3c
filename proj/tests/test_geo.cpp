#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ltgeo/errors.hpp"
#include "ltgeo/geo.hpp"

using namespace ltgeo;

TEST_CASE("coordinate validation") {
  CHECK_NOTHROW(validate(GeoCoord{42.0, -82.5}));
  CHECK_THROWS_AS(validate(GeoCoord{91.0, 0.0}), InputError);
  CHECK_THROWS_AS(validate(GeoCoord{0.0, -181.0}), InputError);
  CHECK_THROWS_AS(validate(GeoCoord{0.0, 1.0 / 0.0}), InputError);
}

TEST_CASE("chebyshev coordinate distance") {
  CHECK(coord_distance_deg({40.0, -80.0}, {40.3, -80.6}) ==
        doctest::Approx(0.6));
  CHECK(coord_distance_deg({40.0, -80.0}, {41.0, -80.2}) ==
        doctest::Approx(1.0));
}

TEST_CASE("date arithmetic") {
  DateStamp d{2020, 9, 1};
  CHECK(day_of_year(DateStamp{2021, 1, 1}) == 1);
  CHECK(day_of_year(DateStamp{2020, 12, 31}) == 366);  // leap year
  CHECK(day_of_year(DateStamp{2019, 12, 31}) == 365);
  CHECK(date_serial(DateStamp{1970, 1, 1}) == 0);
  CHECK(date_serial(DateStamp{1970, 1, 2}) == 1);
  CHECK(add_days(d, 30) == DateStamp{2020, 10, 1});
  CHECK(add_days(d, -1) == DateStamp{2020, 8, 31});
  CHECK(to_string(d) == "2020-09-01");
  CHECK(parse_date("2020-09-01") == d);
  CHECK_THROWS_AS(validate(DateStamp{2020, 2, 30}), InputError);
  CHECK_THROWS_AS(parse_date("not-a-date"), InputError);
}

TEST_CASE("day-of-year distance wraps across new year") {
  CHECK(doy_distance(DateStamp{2019, 12, 31}, DateStamp{2020, 1, 1}) <= 2);
  CHECK(doy_distance(DateStamp{2019, 9, 20}, DateStamp{2018, 9, 24}) == 4);
  // Leap years skew day-of-year by one after February.
  CHECK(doy_distance(DateStamp{2020, 9, 20}, DateStamp{2019, 9, 24}) == 3);
  CHECK(doy_distance(DateStamp{2020, 6, 1}, DateStamp{2020, 12, 1}) > 150);
}

TEST_CASE("coarse grid shape") {
  SearchGrid g = make_coarse_grid();
  CHECK(g.lat_count == 22);
  CHECK(g.lon_count == 57);
  CHECK(g.cells() == 1254);
  GeoCoord c0 = g.cell_center(0, 0);
  CHECK(c0.lat == doctest::Approx(27.0));
  CHECK(c0.lon == doctest::Approx(-122.0));
  GeoCoord c1 = g.cell_center(21, 56);
  CHECK(c1.lat == doctest::Approx(48.0));
  CHECK(c1.lon == doctest::Approx(-66.0));
  CHECK(g.contains(GeoCoord{42.0, -82.5}));
  CHECK_FALSE(g.contains(GeoCoord{50.0, -82.5}));
}

TEST_CASE("normalize scales to unit mass and rejects degenerate maps") {
  LikelihoodMap m = make_map(make_coarse_grid());
  m.values.setConstant(2.0);
  normalize(m);
  CHECK(m.values.sum() == doctest::Approx(1.0).epsilon(1e-12));

  LikelihoodMap zero = make_map(make_coarse_grid());
  CHECK_THROWS_AS(normalize(zero), NumericalError);

  LikelihoodMap neg = make_map(make_coarse_grid());
  neg.values.setConstant(1.0);
  neg.values[3] = -0.5;
  CHECK_THROWS_AS(normalize(neg), NumericalError);
}

TEST_CASE("bilinear refinement matches the coarse map at knots") {
  SearchGrid g = make_coarse_grid();
  LikelihoodMap m = make_map(g);
  for (index_t r = 0; r < g.lat_count; ++r)
    for (index_t c = 0; c < g.lon_count; ++c)
      m.at(r, c) = double(r) * 0.37 + double(c) * 0.11;
  LikelihoodMap f = refine(m, 0.1);
  CHECK(f.grid.lat_count == 211);
  CHECK(f.grid.lon_count == 561);
  for (index_t r = 0; r < g.lat_count; ++r)
    for (index_t c = 0; c < g.lon_count; ++c)
      CHECK(f.at(r * 10, c * 10) == doctest::Approx(m.at(r, c)));
  // Midpoint between two horizontal knots is their average.
  CHECK(f.at(0, 5) == doctest::Approx(0.5 * (m.at(0, 0) + m.at(0, 1))));
  CHECK(f.at(5, 0) == doctest::Approx(0.5 * (m.at(0, 0) + m.at(1, 0))));
  CHECK_THROWS_AS(refine(m, 0.3), InputError);
}

TEST_CASE("fusion multiplies elementwise and renormalizes") {
  SearchGrid g = make_coarse_grid();
  LikelihoodMap a = make_map(g), b = make_map(g);
  a.values.setConstant(1.0);
  b.values.setConstant(1.0);
  a.values[10] = 3.0;
  b.values[10] = 5.0;
  b.values[11] = 2.0;
  LikelihoodMap fab = fuse(a, b);
  CHECK(fab.values.sum() == doctest::Approx(1.0));
  CHECK(fab.values[10] / fab.values[0] == doctest::Approx(15.0));
  CHECK(fab.values[11] / fab.values[0] == doctest::Approx(2.0));

  SearchGrid g2 = g;
  g2.lat_count = 21;
  LikelihoodMap c = make_map(g2);
  CHECK_THROWS_AS(fuse(a, c), InputError);
}

TEST_CASE("argmax returns the best cell center") {
  LikelihoodMap m = make_map(make_coarse_grid());
  m.values.setConstant(0.1);
  m.at(15, 39) = 9.0;  // lat 42, lon -83
  GeoCoord est = argmax_coord(m);
  CHECK(est.lat == doctest::Approx(42.0));
  CHECK(est.lon == doctest::Approx(-83.0));
}
