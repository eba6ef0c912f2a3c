#include "ltgeo/records.hpp"

#include <cmath>

#include "ltgeo/errors.hpp"

namespace ltgeo {

namespace {

void check_day_shape(const Arr& samples, double resolution_min) {
  if (!(resolution_min > 0.0))
    throw InputError("record resolution must be positive");
  double n = kMinutesPerDay / resolution_min;
  if (std::abs(n - std::round(n)) > 1e-9)
    throw InputError("resolution does not divide the day evenly");
  if (samples.size() != index_t(std::llround(n)))
    throw InputError("record length does not match its resolution");
  if (!samples.allFinite())
    throw InputError("record contains non-finite samples");
}

}  // namespace

void validate(const DailyLightRecord& r) {
  validate(r.date);
  if (r.coord) validate(*r.coord);
  check_day_shape(r.samples, r.resolution_min);
  if (r.scale == LightScale::linear && (r.samples < 0.0).any())
    throw InputError("linear light samples must be nonnegative");
}

void validate(const DailyTempRecord& r) {
  validate(r.date);
  if (r.coord) validate(*r.coord);
  check_day_shape(r.samples, r.resolution_min);
  if ((r.samples < -60.0).any() || (r.samples > 60.0).any())
    throw InputError("temperature outside plausible range [-60, 60] C");
}

}  // namespace ltgeo
