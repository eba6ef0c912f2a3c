#pragma once

#include <cstdint>

#include "ltgeo/records.hpp"

namespace ltgeo {

// Low-precision solar position (NOAA almanac series). Accurate to well under
// a minute for sunrise/sunset over the supported latitude band, which is an
// order of magnitude tighter than the night-center tolerance.
double solar_declination_rad(const DateStamp& d, double minutes_utc);
double equation_of_time_min(const DateStamp& d, double minutes_utc);

// minutes_utc may fall outside [0, 1440); the formulas extend continuously
// into adjacent days.
double solar_elevation_deg(const GeoCoord& c, const DateStamp& d,
                           double minutes_utc);

// Sun-crossing threshold of the standard horizon (refraction + solar radius).
inline constexpr double kHorizonElevationDeg = -0.833;

// Local solar noon in UTC minutes, wrapped to [0, 1440).
double solar_noon_utc_min(double lon, const DateStamp& d);

// Sunrise/sunset for the solar day whose noon falls on this UTC date.
// Times are unwrapped minutes relative to the date's midnight and may leave
// [0, 1440). night_center_utc_min is the midpoint of the dark period that
// lies inside this UTC day, wrapped to [0, 1440). Throws NumericalError when
// the sun never crosses the horizon threshold (polar day/night).
struct SolarDay {
  double noon_utc_min = 0.0;
  double sunrise_utc_min = 0.0;
  double sunset_utc_min = 0.0;
  double day_length_min = 0.0;
  double night_center_utc_min = 0.0;
};

SolarDay solar_day(const GeoCoord& c, const DateStamp& d);
double night_center_astro(const GeoCoord& c, const DateStamp& d);
double day_length_min(const GeoCoord& c, const DateStamp& d);

// Clear-sky illuminance in lux as a function of solar elevation: direct term
// above the horizon, exponential twilight decay down to -6 deg, zero below.
// Continuous at both joints.
double clear_sky_lux(double elevation_deg);

// Illuminance the threshold method assumes at the horizon crossing; also the
// default day/night threshold after log transform.
double horizon_lux();

struct SynthNoise {
  double level = 0.0;    // 0 = noiseless; 1 = heavy cloud cover
  std::uint64_t seed = 0;
};

// Synthetic daily records: deterministic in (coord, date, noise.seed) and
// independent of generation order. Light is linear lux; temperature is a
// seasonal/diurnal model tied to the same solar geometry.
DailyLightRecord synth_light_day(const GeoCoord& c, const DateStamp& d,
                                 const SynthNoise& noise,
                                 double resolution_min = kLightResolutionMin);
DailyTempRecord synth_temp_day(const GeoCoord& c, const DateStamp& d,
                               const SynthNoise& noise,
                               double resolution_min = kTempResolutionMin);

}  // namespace ltgeo
