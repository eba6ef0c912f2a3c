#pragma once

#include "ltgeo/records.hpp"

namespace ltgeo {

// Block-mean downsampling; target_min must be an integer multiple of the
// source resolution.
DailyLightRecord resample(const DailyLightRecord& r, double target_min);

// Linear interpolation at target block midpoints, clamped at the day edges.
// Works in both directions.
DailyTempRecord resample(const DailyTempRecord& r, double target_min);

// log10 with a floor on the linear value, so zero readings map to
// log10(floor) instead of -inf. Idempotence is not defined: applying this to
// an already log-scaled record throws.
DailyLightRecord log_light(const DailyLightRecord& r,
                           double floor_value = 1.0);

// Night center in UTC minutes from the record's own shape: the point around
// which the record (treated as circular) is most mirror-symmetric, searched
// over the darkest decile and refined by parabolic interpolation. Requires a
// log-scale full-day record.
double night_center_xcorr(const DailyLightRecord& r);

// Fixed-length window re-centered on center_min, circular indexing. The
// sub-sample part of the shift is reported, not resampled.
AlignedWindow time_shift(const DailyLightRecord& r, double center_min);
AlignedWindow time_shift(const DailyTempRecord& r, double center_min);

// The other half of the day/night threshold baseline lives in the localizer;
// this detects threshold crossings on a circular log-light record. Returns
// {down_crossing, up_crossing} minutes bracketing the longest dark run.
struct NightRun {
  double dusk_min = 0.0;   // down-crossing (may exceed up-crossing: wraps)
  double dawn_min = 0.0;   // up-crossing
  double night_length_min = 0.0;
};
NightRun detect_night_run(const DailyLightRecord& log_record,
                          double threshold_log);

}  // namespace ltgeo
