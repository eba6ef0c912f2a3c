#include "ltgeo/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ltgeo/errors.hpp"

namespace ltgeo {

DailyLightRecord resample(const DailyLightRecord& r, double target_min) {
  validate(r);
  double ratio = target_min / r.resolution_min;
  if (!(target_min > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 ||
      ratio < 1.0)
    throw InputError("light resampling requires an integer downsample ratio");
  index_t k = index_t(std::llround(ratio));
  DailyLightRecord out = r;
  out.resolution_min = target_min;
  if (k == 1) return out;
  index_t n = r.samples.size() / k;
  out.samples = Arr(n);
  for (index_t i = 0; i < n; ++i)
    out.samples[i] = r.samples.segment(i * k, k).mean();
  return out;
}

DailyTempRecord resample(const DailyTempRecord& r, double target_min) {
  validate(r);
  if (!(target_min > 0.0)) throw InputError("resolution must be positive");
  double n_real = kMinutesPerDay / target_min;
  if (std::abs(n_real - std::round(n_real)) > 1e-9)
    throw InputError("resolution does not divide the day evenly");
  DailyTempRecord out = r;
  out.resolution_min = target_min;
  index_t n = index_t(std::llround(n_real));
  index_t m = r.samples.size();
  out.samples = Arr(n);
  for (index_t i = 0; i < n; ++i) {
    double t = sample_mid_minutes(i, target_min);
    double u = t / r.resolution_min - 0.5;  // position among source midpoints
    if (u <= 0.0) {
      out.samples[i] = r.samples[0];
    } else if (u >= double(m - 1)) {
      out.samples[i] = r.samples[m - 1];
    } else {
      index_t j = index_t(u);
      double f = u - double(j);
      out.samples[i] = (1.0 - f) * r.samples[j] + f * r.samples[j + 1];
    }
  }
  return out;
}

DailyLightRecord log_light(const DailyLightRecord& r, double floor_value) {
  validate(r);
  if (r.scale == LightScale::log10)
    throw InputError("record is already log-scaled");
  if (!(floor_value > 0.0)) throw InputError("log floor must be positive");
  DailyLightRecord out = r;
  out.scale = LightScale::log10;
  out.samples = r.samples.cwiseMax(floor_value).log10();
  return out;
}

namespace {

// Pearson correlation of the K samples left of c with the K samples right of
// c, mirrored; circular indexing. The night center maximizes this.
double mirror_score(const Arr& v, index_t c, index_t k) {
  index_t n = v.size();
  Arr left(k), right(k);
  for (index_t j = 0; j < k; ++j) {
    left[j] = v[((c - 1 - j) % n + n) % n];
    right[j] = v[(c + 1 + j) % n];
  }
  double ml = left.mean(), mr = right.mean();
  Arr dl = left - ml, dr = right - mr;
  double denom = std::sqrt(dl.square().sum() * dr.square().sum());
  if (denom < 1e-12) return -2.0;
  return (dl * dr).sum() / denom;
}

}  // namespace

double night_center_xcorr(const DailyLightRecord& r) {
  validate(r);
  if (r.scale != LightScale::log10)
    throw InputError("night-center search expects a log-scale record");
  const Arr& v = r.samples;
  index_t n = v.size();
  double range = v.maxCoeff() - v.minCoeff();
  if (range < 1e-6)
    throw NumericalError("record has no dark period to center on");

  // Candidate centers: the darkest decile of samples.
  std::vector<double> sorted(v.data(), v.data() + n);
  std::nth_element(sorted.begin(), sorted.begin() + (n - 1) / 10,
                   sorted.end());
  double threshold = sorted[size_t((n - 1) / 10)];

  index_t k = index_t(std::llround(kWindowHalfSpanMin / r.resolution_min));
  if (2 * k + 1 > n)
    throw InputError("record too short for the mirror window");

  std::vector<double> score(size_t(n),
                            std::numeric_limits<double>::quiet_NaN());
  index_t best = -1;
  for (index_t c = 0; c < n; ++c) {
    if (v[c] > threshold) continue;
    score[size_t(c)] = mirror_score(v, c, k);
    if (best < 0 || score[size_t(c)] > score[size_t(best)]) best = c;
  }
  if (best < 0) throw NumericalError("no dark samples below threshold");

  index_t prev = (best - 1 + n) % n, next = (best + 1) % n;
  for (index_t c : {prev, next})
    if (std::isnan(score[size_t(c)])) score[size_t(c)] = mirror_score(v, c, k);

  double s0 = score[size_t(best)], sm = score[size_t(prev)],
         sp = score[size_t(next)];
  double curvature = sm - 2.0 * s0 + sp;
  double offset = 0.0;
  if (curvature < -1e-15)
    offset = std::clamp(0.5 * (sm - sp) / curvature, -0.5, 0.5);

  double center = (double(best) + offset + 0.5) * r.resolution_min;
  return std::fmod(center + kMinutesPerDay, kMinutesPerDay);
}

namespace {

AlignedWindow shift_impl(const Arr& v, double resolution_min,
                         double center_min) {
  index_t n = v.size();
  index_t w = 2 * index_t(std::llround(kWindowHalfSpanMin / resolution_min)) + 1;
  if (w > n) throw InputError("record too short for the alignment window");
  if (!std::isfinite(center_min)) throw InputError("center is not finite");

  std::int64_t c = std::llround(center_min / resolution_min - 0.5);
  double remainder = center_min - (double(c) + 0.5) * resolution_min;
  AlignedWindow out;
  out.samples = Arr(w);
  out.resolution_min = resolution_min;
  out.center_min = center_min;
  out.shift_remainder_min = remainder;
  std::int64_t start = c - (w - 1) / 2;
  for (index_t j = 0; j < w; ++j) {
    std::int64_t idx = (start + j) % n;
    if (idx < 0) idx += n;
    out.samples[j] = v[idx];
  }
  return out;
}

}  // namespace

AlignedWindow time_shift(const DailyLightRecord& r, double center_min) {
  validate(r);
  return shift_impl(r.samples, r.resolution_min, center_min);
}

AlignedWindow time_shift(const DailyTempRecord& r, double center_min) {
  validate(r);
  return shift_impl(r.samples, r.resolution_min, center_min);
}

NightRun detect_night_run(const DailyLightRecord& log_record,
                          double threshold_log) {
  validate(log_record);
  if (log_record.scale != LightScale::log10)
    throw InputError("night detection expects a log-scale record");
  const Arr& v = log_record.samples;
  index_t n = v.size();
  index_t below = (v < threshold_log).count();
  if (below == 0) throw NumericalError("no samples below the threshold");
  if (below == n) throw NumericalError("no samples above the threshold");

  // Longest circular run of below-threshold samples.
  index_t best_start = 0, best_len = 0, run_start = -1, run_len = 0;
  for (index_t i = 0; i < 2 * n; ++i) {
    if (v[i % n] < threshold_log) {
      if (run_len == 0) run_start = i;
      if (++run_len > best_len && run_start < n) {
        best_len = std::min(run_len, n);
        best_start = run_start;
      }
    } else {
      run_len = 0;
    }
  }

  index_t a = best_start % n;                  // first dark sample
  index_t b = (best_start + best_len - 1) % n; // last dark sample
  index_t a_prev = (a - 1 + n) % n, b_next = (b + 1) % n;
  double res = log_record.resolution_min;
  double dusk = sample_mid_minutes(a_prev, res) +
                res * (v[a_prev] - threshold_log) / (v[a_prev] - v[a]);
  double dawn = sample_mid_minutes(b, res) +
                res * (threshold_log - v[b]) / (v[b_next] - v[b]);
  NightRun out;
  out.dusk_min = std::fmod(dusk + kMinutesPerDay, kMinutesPerDay);
  out.dawn_min = std::fmod(dawn + kMinutesPerDay, kMinutesPerDay);
  out.night_length_min =
      std::fmod(out.dawn_min - out.dusk_min + kMinutesPerDay, kMinutesPerDay);
  return out;
}

}  // namespace ltgeo
