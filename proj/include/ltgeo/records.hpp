#pragma once

#include <optional>
#include <string>

#include "ltgeo/geo.hpp"
#include "ltgeo/types.hpp"

namespace ltgeo {

inline constexpr double kMinutesPerDay = 1440.0;
// Canonical resolutions after resampling; the trained window shapes below
// depend on them.
inline constexpr double kLightResolutionMin = 3.0;   // 480 samples/day
inline constexpr double kTempResolutionMin = 60.0;   // 24 samples/day
// Alignment windows span +-9 h around the night center.
inline constexpr double kWindowHalfSpanMin = 540.0;
inline constexpr int kLightWindowLen = 361;  // 2*(540/3) + 1
inline constexpr int kTempWindowLen = 19;    // 2*(540/60) + 1

enum class Modality { light, temperature };
enum class LightSource { sensor, synthetic, synthesized };
enum class TempSource { sensor, station, kriged, synthetic };
enum class LightScale { linear, log10 };

// One UTC day of light samples. Sample i covers
// [i*resolution_min, (i+1)*resolution_min) and is timestamped at the block
// midpoint.
struct DailyLightRecord {
  DateStamp date;
  Arr samples;
  double resolution_min = kLightResolutionMin;
  std::optional<GeoCoord> coord;
  LightSource source = LightSource::sensor;
  LightScale scale = LightScale::linear;
  bool denoised = false;
};

// One UTC day of ambient temperature in Celsius, same timestamp convention.
struct DailyTempRecord {
  DateStamp date;
  Arr samples;
  double resolution_min = kTempResolutionMin;
  std::optional<GeoCoord> coord;
  TempSource source = TempSource::sensor;
};

void validate(const DailyLightRecord& r);
void validate(const DailyTempRecord& r);

inline double sample_mid_minutes(index_t i, double resolution_min) {
  return (double(i) + 0.5) * resolution_min;
}

// Fixed-length slice of a daily record re-centered on a night center.
// shift_remainder_min is the sub-sample part of the requested center that
// the integer window start could not absorb.
struct AlignedWindow {
  Arr samples;
  double resolution_min = 0.0;
  double center_min = 0.0;
  double shift_remainder_min = 0.0;
};

}  // namespace ltgeo
