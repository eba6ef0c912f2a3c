#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ltgeo/astro.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/signal_prep.hpp"

using namespace ltgeo;

namespace {

double circ_diff(double a, double b) {
  double d = std::abs(a - b);
  return std::min(d, 1440.0 - d);
}

DailyLightRecord make_log_record(const Arr& v, double res = 3.0) {
  DailyLightRecord r;
  r.date = DateStamp{2020, 10, 1};
  r.samples = v;
  r.resolution_min = res;
  r.scale = LightScale::log10;
  return r;
}

}  // namespace

TEST_CASE("light resampling takes block means") {
  DailyLightRecord r;
  r.date = DateStamp{2020, 9, 5};
  r.resolution_min = 1.0;
  r.samples = Arr::LinSpaced(1440, 0.0, 1439.0);
  DailyLightRecord out = resample(r, 3.0);
  CHECK(out.samples.size() == 480);
  CHECK(out.samples[0] == doctest::Approx(1.0));  // mean of 0,1,2
  CHECK(out.samples[479] == doctest::Approx(1438.0));
  CHECK(out.resolution_min == 3.0);
  CHECK_THROWS_AS(resample(r, 2.5), InputError);
  CHECK_THROWS_AS(resample(out, 1.0), InputError);  // upsampling
}

TEST_CASE("temperature resampling interpolates linearly") {
  DailyTempRecord r;
  r.date = DateStamp{2020, 9, 5};
  r.resolution_min = 60.0;
  r.samples = Arr::LinSpaced(24, 0.0, 23.0);
  DailyTempRecord half = resample(r, 30.0);
  CHECK(half.samples.size() == 48);
  // Midpoint of target block 1 is 45 min = 1/4 between source mids 30, 90.
  CHECK(half.samples[1] == doctest::Approx(0.25));
  CHECK(half.samples[0] == doctest::Approx(0.0));   // clamped at the edge
  CHECK(half.samples[47] == doctest::Approx(23.0));
  DailyTempRecord back = resample(half, 60.0);
  CHECK(back.samples.size() == 24);
  CHECK(back.samples[12] == doctest::Approx(r.samples[12]).epsilon(1e-9));
}

TEST_CASE("log transform floors the linear value") {
  DailyLightRecord r;
  r.date = DateStamp{2020, 9, 5};
  r.resolution_min = 3.0;
  r.samples = Arr::Zero(480);
  r.samples[100] = 1000.0;
  r.samples[101] = 0.5;
  DailyLightRecord lg = log_light(r);
  CHECK(lg.scale == LightScale::log10);
  CHECK(lg.samples[0] == 0.0);            // log10(max(0, 1)) = 0
  CHECK(lg.samples[101] == 0.0);          // below the floor
  CHECK(lg.samples[100] == doctest::Approx(3.0));
  CHECK_THROWS_AS(log_light(lg), InputError);
  CHECK_THROWS_AS(log_light(r, 0.0), InputError);
}

TEST_CASE("night center of an exactly symmetric valley is its mirror point") {
  Arr v(480);
  for (index_t i = 0; i < 480; ++i)
    v[i] = 0.01 * std::abs(double(i) - 200.5);
  double got = night_center_xcorr(make_log_record(v));
  CHECK(circ_diff(got, 201.0 * 3.0) < 1e-6);
}

TEST_CASE("night center tracks a circular shift of the record") {
  GeoCoord c{38.0, -100.0};
  DateStamp d{2019, 10, 10};
  DailyLightRecord lg = log_light(synth_light_day(c, d, SynthNoise{}));
  double base = night_center_xcorr(lg);

  for (int s : {40, -60}) {
    DailyLightRecord shifted = lg;
    index_t n = lg.samples.size();
    for (index_t i = 0; i < n; ++i)
      shifted.samples[i] = lg.samples[((i - s) % n + n) % n];
    double got = night_center_xcorr(shifted);
    CHECK(circ_diff(got, base + double(s) * 3.0) < 1.0);
  }
}

TEST_CASE("night center matches the astronomical center on clean days") {
  for (double lat : {30.0, 42.0})
    for (double lon : {-118.0, -70.0}) {
      GeoCoord c{lat, lon};
      DateStamp d{2020, 10, 15};
      DailyLightRecord lg = log_light(synth_light_day(c, d, SynthNoise{}));
      double want = night_center_astro(c, d);
      INFO("lat=", lat, " lon=", lon);
      CHECK(circ_diff(night_center_xcorr(lg), want) < 2.0);
    }
}

TEST_CASE("night center rejects contrast-free records") {
  Arr flat = Arr::Constant(480, 3.0);
  CHECK_THROWS_AS(night_center_xcorr(make_log_record(flat)), NumericalError);
  DailyLightRecord linear;
  linear.date = DateStamp{2020, 9, 5};
  linear.samples = Arr::Zero(480);
  CHECK_THROWS_AS(night_center_xcorr(linear), InputError);
}

TEST_CASE("window alignment extracts a centered circular slice") {
  Arr v = Arr::LinSpaced(480, 0.0, 479.0);
  DailyLightRecord r = make_log_record(v / 100.0);

  AlignedWindow w = time_shift(r, (240.0 + 0.5) * 3.0);
  CHECK(w.samples.size() == kLightWindowLen);
  CHECK(w.samples[180] == doctest::Approx(2.40));
  CHECK(w.shift_remainder_min == doctest::Approx(0.0));
  CHECK(w.samples[0] == doctest::Approx(0.60));    // sample 60
  CHECK(w.samples[360] == doctest::Approx(4.20));  // sample 420

  // A center one minute off the grid lands on the same samples and reports
  // the remainder.
  AlignedWindow w2 = time_shift(r, (240.0 + 0.5) * 3.0 + 1.0);
  CHECK(w2.samples[180] == doctest::Approx(2.40));
  CHECK(w2.shift_remainder_min == doctest::Approx(1.0));

  // Early centers wrap into the previous evening.
  AlignedWindow w3 = time_shift(r, 1.5);
  CHECK(w3.samples[180] == doctest::Approx(0.0));
  CHECK(w3.samples[0] == doctest::Approx(3.00));  // sample 300 = 480-180
}

TEST_CASE("shifting record and center together leaves the window unchanged") {
  GeoCoord c{40.0, -85.0};
  DateStamp d{2019, 9, 20};
  DailyLightRecord lg = log_light(synth_light_day(c, d, SynthNoise{}));
  double center = night_center_astro(c, d);
  AlignedWindow base = time_shift(lg, center);

  int s = 55;  // samples
  DailyLightRecord shifted = lg;
  index_t n = lg.samples.size();
  for (index_t i = 0; i < n; ++i)
    shifted.samples[i] = lg.samples[((i - s) % n + n) % n];
  AlignedWindow moved = time_shift(shifted, center + double(s) * 3.0);
  CHECK((moved.samples == base.samples).all());
}

TEST_CASE("temperature windows have the documented length") {
  GeoCoord c{40.0, -85.0};
  DateStamp d{2019, 9, 20};
  DailyTempRecord t = synth_temp_day(c, d, SynthNoise{});
  AlignedWindow w = time_shift(t, night_center_astro(c, d));
  CHECK(w.samples.size() == kTempWindowLen);
}

TEST_CASE("night run detection brackets the astronomical night") {
  GeoCoord c{42.0, -82.5};
  DateStamp d{2020, 9, 17};
  DailyLightRecord lg = log_light(synth_light_day(c, d, SynthNoise{}));
  double thr = std::log10(horizon_lux());
  NightRun run = detect_night_run(lg, thr);
  SolarDay s = solar_day(c, d);
  CHECK(std::abs(1440.0 - run.night_length_min - s.day_length_min) < 2.5);
  double center = std::fmod(run.dusk_min + 0.5 * run.night_length_min, 1440.0);
  CHECK(circ_diff(center, s.night_center_utc_min) < 2.5);

  CHECK_THROWS_AS(detect_night_run(lg, -10.0), NumericalError);
  CHECK_THROWS_AS(detect_night_run(lg, 100.0), NumericalError);
}
