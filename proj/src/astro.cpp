#include "ltgeo/astro.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ltgeo/errors.hpp"
#include "ltgeo/rng.hpp"

namespace ltgeo {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;

double fractional_year_rad(const DateStamp& d, double minutes_utc) {
  double hours = minutes_utc / 60.0;
  return 2.0 * kPi / 365.0 *
         (double(day_of_year(d)) - 1.0 + (hours - 12.0) / 24.0);
}

double declination_from_gamma(double g) {
  return 0.006918 - 0.399912 * std::cos(g) + 0.070257 * std::sin(g) -
         0.006758 * std::cos(2 * g) + 0.000907 * std::sin(2 * g) -
         0.002697 * std::cos(3 * g) + 0.00148 * std::sin(3 * g);
}

double eqtime_from_gamma(double g) {
  return 229.18 * (0.000075 + 0.001868 * std::cos(g) -
                   0.032077 * std::sin(g) - 0.014615 * std::cos(2 * g) -
                   0.040849 * std::sin(2 * g));
}

double wrap_minutes(double t) {
  t = std::fmod(t, kMinutesPerDay);
  return t < 0.0 ? t + kMinutesPerDay : t;
}

// Unwrapped solar noon nearest to the hint, in minutes relative to the
// date's midnight.
double noon_near(double lon, const DateStamp& d, double hint) {
  double t = hint;
  for (int it = 0; it < 3; ++it) {
    double eq = equation_of_time_min(d, t);
    double noon = 720.0 - 4.0 * lon - eq;
    noon += kMinutesPerDay * std::round((t - noon) / kMinutesPerDay);
    t = noon;
  }
  return t;
}

// Horizon crossing adjacent to the given unwrapped noon, found from the
// hour-angle equation with declination re-evaluated at the crossing.
double horizon_crossing(const GeoCoord& c, const DateStamp& d, double noon,
                        bool rising) {
  double t = noon + (rising ? -360.0 : 360.0);
  for (int it = 0; it < 6; ++it) {
    double decl = solar_declination_rad(d, t);
    double lat = c.lat * kDegToRad;
    double cos_h0 =
        (std::sin(kHorizonElevationDeg * kDegToRad) -
         std::sin(lat) * std::sin(decl)) /
        (std::cos(lat) * std::cos(decl));
    if (cos_h0 > 1.0)
      throw NumericalError("sun never rises above the horizon threshold");
    if (cos_h0 < -1.0)
      throw NumericalError("sun never sets below the horizon threshold");
    double h0_min = std::acos(cos_h0) / kPi * 720.0;
    t = noon + (rising ? -h0_min : h0_min);
  }
  return t;
}

}  // namespace

double solar_declination_rad(const DateStamp& d, double minutes_utc) {
  return declination_from_gamma(fractional_year_rad(d, minutes_utc));
}

double equation_of_time_min(const DateStamp& d, double minutes_utc) {
  return eqtime_from_gamma(fractional_year_rad(d, minutes_utc));
}

double solar_elevation_deg(const GeoCoord& c, const DateStamp& d,
                           double minutes_utc) {
  validate(c);
  double decl = solar_declination_rad(d, minutes_utc);
  double eq = equation_of_time_min(d, minutes_utc);
  double tst = minutes_utc + eq + 4.0 * c.lon;  // true solar time, minutes
  double ha = (tst / 4.0 - 180.0) * kDegToRad;
  double lat = c.lat * kDegToRad;
  double sin_elev = std::sin(lat) * std::sin(decl) +
                    std::cos(lat) * std::cos(decl) * std::cos(ha);
  return std::asin(std::clamp(sin_elev, -1.0, 1.0)) / kDegToRad;
}

double solar_noon_utc_min(double lon, const DateStamp& d) {
  return wrap_minutes(noon_near(lon, d, 720.0 - 4.0 * lon));
}

SolarDay solar_day(const GeoCoord& c, const DateStamp& d) {
  validate(c);
  SolarDay s;
  double noon = noon_near(c.lon, d, 720.0 - 4.0 * c.lon);
  // Keep the noon whose solar day overlaps this UTC date.
  if (noon < 0.0) noon += kMinutesPerDay;
  if (noon >= kMinutesPerDay) noon -= kMinutesPerDay;
  noon = noon_near(c.lon, d, noon);
  s.noon_utc_min = wrap_minutes(noon);
  s.sunrise_utc_min = horizon_crossing(c, d, noon, true);
  s.sunset_utc_min = horizon_crossing(c, d, noon, false);
  s.day_length_min = s.sunset_utc_min - s.sunrise_utc_min;

  // Daily records are circular, so the record's dark period runs from the
  // down-crossing that falls inside [0, 1440) to the up-crossing inside it;
  // either may belong to an adjacent solar day.
  double sunset_in = s.sunset_utc_min;
  if (sunset_in >= kMinutesPerDay)
    sunset_in = wrap_minutes(
        horizon_crossing(c, d, noon_near(c.lon, d, noon - kMinutesPerDay),
                         false));
  double sunrise_in = s.sunrise_utc_min;
  if (sunrise_in < 0.0)
    sunrise_in = wrap_minutes(
        horizon_crossing(c, d, noon_near(c.lon, d, noon + kMinutesPerDay),
                         true));
  double night_len =
      std::fmod(sunrise_in - sunset_in + kMinutesPerDay, kMinutesPerDay);
  s.night_center_utc_min = wrap_minutes(sunset_in + 0.5 * night_len);
  return s;
}

double night_center_astro(const GeoCoord& c, const DateStamp& d) {
  return solar_day(c, d).night_center_utc_min;
}

double day_length_min(const GeoCoord& c, const DateStamp& d) {
  return solar_day(c, d).day_length_min;
}

double clear_sky_lux(double elevation_deg) {
  constexpr double twilight_floor = -6.0;
  constexpr double horizon_lux_base = 400.0;
  constexpr double direct_lux = 1.0e5;
  if (elevation_deg <= twilight_floor) return 0.0;
  if (elevation_deg < 0.0) {
    double k = std::exp(twilight_floor / 1.5);
    return horizon_lux_base *
           (std::exp(elevation_deg / 1.5) - k) / (1.0 - k);
  }
  return horizon_lux_base +
         direct_lux * std::pow(std::sin(elevation_deg * kDegToRad), 1.2);
}

double horizon_lux() { return clear_sky_lux(kHorizonElevationDeg); }

namespace {

std::uint64_t record_seed(const GeoCoord& c, const DateStamp& d,
                          std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = combine_seed(seed, tag);
  std::uint64_t lat_bits, lon_bits;
  static_assert(sizeof(double) == sizeof(std::uint64_t));
  std::memcpy(&lat_bits, &c.lat, sizeof lat_bits);
  std::memcpy(&lon_bits, &c.lon, sizeof lon_bits);
  s = combine_seed(s, lat_bits);
  s = combine_seed(s, lon_bits);
  s = combine_seed(s, std::uint64_t(date_serial(d)));
  return s;
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

// Stationary Ornstein-Uhlenbeck path over the day's sample grid; unit
// variance, correlation time tau minutes.
Arr ou_path(index_t n, double resolution_min, double tau_min, Rng& rng) {
  Arr x(n);
  double rho = std::exp(-resolution_min / tau_min);
  double scale = std::sqrt(1.0 - rho * rho);
  x[0] = rng.normal();
  for (index_t i = 1; i < n; ++i) x[i] = rho * x[i - 1] + scale * rng.normal();
  return x;
}

}  // namespace

DailyLightRecord synth_light_day(const GeoCoord& c, const DateStamp& d,
                                 const SynthNoise& noise,
                                 double resolution_min) {
  validate(c);
  validate(d);
  if (noise.level < 0.0) throw InputError("noise level must be >= 0");
  index_t n = index_t(std::llround(kMinutesPerDay / resolution_min));

  DailyLightRecord rec;
  rec.date = d;
  rec.coord = c;
  rec.resolution_min = resolution_min;
  rec.source = LightSource::synthetic;
  rec.scale = LightScale::linear;
  rec.samples = Arr(n);
  for (index_t i = 0; i < n; ++i) {
    double elev =
        solar_elevation_deg(c, d, sample_mid_minutes(i, resolution_min));
    rec.samples[i] = clear_sky_lux(elev);
  }

  if (noise.level > 0.0) {
    Rng rng(record_seed(c, d, noise.seed, 1));
    Arr cloud = ou_path(n, resolution_min, 90.0, rng);
    double drop_p = std::min(0.5, 0.03 * noise.level);
    for (index_t i = 0; i < n; ++i) {
      rec.samples[i] *= std::exp(-noise.level * softplus(cloud[i]));
      if (rng.bernoulli(drop_p)) rec.samples[i] = 0.0;
    }
  }
  validate(rec);
  return rec;
}

DailyTempRecord synth_temp_day(const GeoCoord& c, const DateStamp& d,
                               const SynthNoise& noise,
                               double resolution_min) {
  validate(c);
  validate(d);
  if (noise.level < 0.0) throw InputError("noise level must be >= 0");
  index_t n = index_t(std::llround(kMinutesPerDay / resolution_min));

  // Season runs relative to Sep 1 of the record's year; latitude and season
  // set the level, the diurnal wave peaks two hours after local solar noon.
  double season_days =
      double(date_serial(d) - date_serial(DateStamp{d.year, 9, 1}));
  double base = 28.0 - 0.55 * (c.lat - 27.0) - 0.075 * season_days;
  double peak = solar_noon_utc_min(c.lon, d) + 120.0;

  DailyTempRecord rec;
  rec.date = d;
  rec.coord = c;
  rec.resolution_min = resolution_min;
  rec.source = TempSource::synthetic;
  rec.samples = Arr(n);
  for (index_t i = 0; i < n; ++i) {
    double t = sample_mid_minutes(i, resolution_min);
    rec.samples[i] =
        base + 5.5 * std::cos(2.0 * kPi * (t - peak) / kMinutesPerDay);
  }

  if (noise.level > 0.0) {
    Rng rng(record_seed(c, d, noise.seed, 2));
    Arr ou = ou_path(n, resolution_min, 180.0, rng);
    rec.samples += 1.5 * noise.level * ou;
    rec.samples = rec.samples.cwiseMin(60.0).cwiseMax(-60.0);
  }
  validate(rec);
  return rec;
}

}  // namespace ltgeo
