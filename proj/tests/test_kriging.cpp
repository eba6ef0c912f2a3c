#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "ltgeo/errors.hpp"
#include "ltgeo/kriging.hpp"
#include "ltgeo/rng.hpp"

using namespace ltgeo;

namespace {

double field(const GeoCoord& c) { return 0.5 * c.lat - 0.2 * c.lon + 3.0; }

struct Cloud {
  std::vector<GeoCoord> coords;
  Vec values;
};

Cloud random_cloud(int n, std::uint64_t seed) {
  Cloud c;
  c.values.resize(n);
  Rng r(seed);
  for (int i = 0; i < n; ++i) {
    GeoCoord p{r.uniform(30.0, 45.0), r.uniform(-110.0, -80.0)};
    c.coords.push_back(p);
    c.values[i] = field(p) + 0.3 * r.normal();
  }
  return c;
}

}  // namespace

TEST_CASE("kriging is exact at sample points") {
  Cloud c = random_cloud(12, 3);
  for (int i = 0; i < 12; ++i) {
    double est = kriging_interpolate(c.coords, c.values, c.coords[i]);
    CHECK(std::abs(est - c.values[i]) < 1e-6);
  }
}

TEST_CASE("single sample gives a constant field") {
  std::vector<GeoCoord> one{{40.0, -90.0}};
  Vec v(1);
  v << 17.5;
  CHECK(kriging_interpolate(one, v, {48.0, -66.0}) == 17.5);
  CHECK(kriging_interpolate(one, v, {27.0, -122.0}) == 17.5);
}

TEST_CASE("weights sum to one") {
  Cloud c = random_cloud(9, 8);
  VariogramModel vg = fit_variogram(c.coords, c.values);
  for (double lat : {31.0, 38.5, 44.0}) {
    Vec w = kriging_weights(c.coords, vg, {lat, -95.0});
    CHECK(std::abs(w.sum() - 1.0) < 1e-10);
  }
}

TEST_CASE("linear field is recovered from a dense ring") {
  GeoCoord target{40.0, -90.0};
  std::vector<GeoCoord> coords;
  Vec values(32);
  int k = 0;
  for (double radius : {2.0, 3.5}) {
    for (int i = 0; i < 16; ++i) {
      double a = 2.0 * M_PI * i / 16.0;
      GeoCoord p{target.lat + radius * std::sin(a),
                 target.lon + radius * std::cos(a)};
      coords.push_back(p);
      values[k++] = field(p);
    }
  }
  double est = kriging_interpolate(coords, values, target);
  CHECK(std::abs(est - field(target)) < 0.1);
}

TEST_CASE("linear field recovered off-node on a station grid") {
  std::vector<GeoCoord> coords;
  std::vector<double> vals;
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) {
      GeoCoord p{36.0 + 1.5 * r, -96.0 + 1.5 * c};
      coords.push_back(p);
      vals.push_back(field(p));
    }
  Vec v = Eigen::Map<Vec>(vals.data(), index_t(vals.size()));
  GeoCoord target{38.9, -92.3};
  double est = kriging_interpolate(coords, v, target);
  CHECK(std::abs(est - field(target)) < 0.1);
}

TEST_CASE("duplicate sample coords are averaged, not fatal") {
  std::vector<GeoCoord> coords{{40.0, -90.0}, {40.0, -90.0}, {42.0, -88.0}};
  Vec v(3);
  v << 10.0, 12.0, 20.0;
  double at_dup = kriging_interpolate(coords, v, {40.0, -90.0});
  CHECK(at_dup == doctest::Approx(11.0).epsilon(1e-9));

  std::vector<GeoCoord> same{{40.0, -90.0}, {40.0, -90.0}};
  Vec v2(2);
  v2 << 5.0, 7.0;
  CHECK(kriging_interpolate(same, v2, {30.0, -100.0}) ==
        doctest::Approx(6.0));
}

TEST_CASE("flat field degenerates to smooth weighting") {
  Cloud c = random_cloud(8, 5);
  c.values.setConstant(4.5);
  VariogramModel vg = fit_variogram(c.coords, c.values);
  CHECK(vg.sill == 1.0);
  CHECK(vg.range_deg > 0.0);
  double est = kriging_interpolate(c.coords, c.values, {37.0, -100.0});
  CHECK(est == doctest::Approx(4.5).epsilon(1e-9));
}

TEST_CASE("variogram model shape") {
  VariogramModel vg{2.0, 1.5, 0.0};
  CHECK(vg(0.0) == 0.0);
  CHECK(vg(0.5) > 0.0);
  CHECK(vg(3.0) > vg(1.0));
  CHECK(vg(50.0) == doctest::Approx(2.0).epsilon(1e-3));

  Cloud c = random_cloud(40, 11);
  VariogramModel fit = fit_variogram(c.coords, c.values);
  CHECK(fit.sill > 0.0);
  CHECK(fit.range_deg > 0.0);
  CHECK(fit.nugget == 0.0);
}

TEST_CASE("kriging input validation") {
  Vec empty;
  CHECK_THROWS_AS(kriging_interpolate({}, empty, {40.0, -90.0}), InputError);

  std::vector<GeoCoord> coords{{40.0, -90.0}, {41.0, -91.0}};
  Vec bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(kriging_interpolate(coords, bad, {40.5, -90.5}),
                  InputError);

  Vec v(1);
  v << 1.0;
  CHECK_THROWS_AS(kriging_interpolate(coords, v, {40.5, -90.5}), InputError);
}
