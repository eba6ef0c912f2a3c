#include "ltgeo/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <utility>

#include "ltgeo/astro.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/signal_prep.hpp"

namespace ltgeo {

namespace {

double wrap_day_min(double m) {
  double w = std::fmod(m, kMinutesPerDay);
  if (w < 0.0) w += kMinutesPerDay;
  return w;
}

// Integer sample index whose block holds the center, as time_shift rounds it.
std::int64_t center_sample(double center_min, double resolution_min) {
  if (!std::isfinite(center_min))
    throw InputError("night center is not finite");
  return std::llround(center_min / resolution_min - 0.5);
}

Arr circular_window(const Arr& v, std::int64_t center, index_t w) {
  const index_t n = v.size();
  Arr out(w);
  const std::int64_t start = center - (w - 1) / 2;
  for (index_t j = 0; j < w; ++j) {
    std::int64_t idx = (start + j) % n;
    if (idx < 0) idx += n;
    out[j] = v[idx];
  }
  return out;
}

// Batched eval embeddings in fixed-size chunks: the first conv layer blows
// one column up by the channel count, so embedding thousands of windows in
// one tensor would spike memory for no speed gain.
Mat embed_chunked(const SiameseModel& model, const Mat& windows) {
  constexpr index_t chunk = 64;
  Mat out(model.embedding_dim, windows.cols());
  for (index_t c0 = 0; c0 < windows.cols(); c0 += chunk) {
    const index_t width = std::min(chunk, windows.cols() - c0);
    out.middleCols(c0, width) =
        embed_columns(model, windows.middleCols(c0, width));
  }
  return out;
}

void check_query_day(const SiameseModel& model, double resolution_min,
                     index_t samples) {
  if (std::abs(resolution_min - model.resolution_min) > 1e-9)
    throw InputError("query resolution does not match the model");
  if (samples < index_t(model.window_len))
    throw InputError("query day too short for the alignment window");
}

}  // namespace

std::vector<ScoredReference> score_references(
    const LocalizerContext& ctx, const DailyLightRecord& target,
    const std::vector<LightEntry>& refs) {
  if (!ctx.light_model || !ctx.light_lib)
    throw InputError("localizer context has no light side");
  if (refs.empty()) throw InputError("no references to score");
  validate(target);
  if (target.scale != LightScale::log10)
    throw InputError("light scoring expects a log-scale target");
  const SiameseModel& model = *ctx.light_model;
  const ReferenceLibrary& lib = *ctx.light_lib;
  check_query_day(model, target.resolution_min, target.samples.size());

  const index_t w = model.window_len;
  const index_t n_target = target.samples.size();

  // Longitude synthesis is a circular shift of a measured parent, so a
  // reference window is the parent's samples read at one integer offset and
  // a target window depends only on where the entry's center rounds to.
  // Deduplicating on those keys prunes the embedding batch hard.
  std::map<std::pair<std::int32_t, std::int64_t>, index_t> ref_cols;
  std::map<std::int64_t, index_t> tgt_cols;
  struct Keyed {
    index_t ref_col;
    index_t tgt_col;
  };
  std::vector<Keyed> keyed(refs.size());
  Mat ref_windows(w, index_t(refs.size()));
  Mat tgt_windows(w, index_t(refs.size()));
  index_t ref_used = 0, tgt_used = 0;

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const LightEntry& e = refs[i];
    if (e.parent < 0 || std::size_t(e.parent) >= lib.light_records.size())
      throw InputError("light entry parent out of range");
    const DailyLightRecord& parent = lib.light_records[std::size_t(e.parent)];
    const index_t n_parent = parent.samples.size();
    if (n_parent < w)
      throw InputError("reference record too short for the alignment window");
    const std::int64_t c = center_sample(e.night_center_min, model.resolution_min);

    std::int64_t q = (c - e.shift_samples) % n_parent;
    if (q < 0) q += n_parent;
    auto [rit, rnew] = ref_cols.try_emplace({e.parent, q}, ref_used);
    if (rnew)
      ref_windows.col(ref_used++) =
          circular_window(parent.samples, q, w).matrix();

    std::int64_t ct = c % n_target;
    if (ct < 0) ct += n_target;
    auto [tit, tnew] = tgt_cols.try_emplace(ct, tgt_used);
    if (tnew)
      tgt_windows.col(tgt_used++) =
          circular_window(target.samples, ct, w).matrix();

    keyed[i] = {rit->second, tit->second};
  }

  const Mat ref_embeds = embed_chunked(model, ref_windows.leftCols(ref_used));
  const Mat tgt_embeds = embed_chunked(model, tgt_windows.leftCols(tgt_used));

  Vec phi(index_t(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i)
    phi[index_t(i)] =
        (ref_embeds.col(keyed[i].ref_col) - tgt_embeds.col(keyed[i].tgt_col))
            .norm();
  const Vec probs = spatial_softmax(phi, model.sigma);

  std::vector<ScoredReference> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    out[i] = {refs[i].coord, probs[index_t(i)]};
  return out;
}

std::vector<ScoredReference> score_references(
    const LocalizerContext& ctx, const DailyTempRecord& target,
    const std::vector<TempEntry>& refs) {
  if (!ctx.temp_model) throw InputError("localizer context has no temp side");
  if (refs.empty()) throw InputError("no references to score");
  validate(target);
  const SiameseModel& model = *ctx.temp_model;
  check_query_day(model, target.resolution_min, target.samples.size());

  const index_t w = model.window_len;
  const index_t n_target = target.samples.size();

  // Both windows align at the astronomical night center of the reference
  // coordinate on the query's date. Reference windows are all distinct;
  // target windows collapse onto the few sample offsets the centers hit.
  std::map<std::int64_t, index_t> tgt_cols;
  Mat ref_windows(w, index_t(refs.size()));
  Mat tgt_windows(w, index_t(refs.size()));
  std::vector<index_t> tgt_of(refs.size());
  index_t tgt_used = 0;

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const TempEntry& e = refs[i];
    validate(e.record);
    if (std::abs(e.record.resolution_min - model.resolution_min) > 1e-9)
      throw InputError("reference resolution does not match the model");
    if (e.record.samples.size() < w)
      throw InputError("reference record too short for the alignment window");
    const double center = night_center_astro(e.coord, target.date);
    const std::int64_t c = center_sample(center, model.resolution_min);

    std::int64_t cr = c % e.record.samples.size();
    if (cr < 0) cr += e.record.samples.size();
    ref_windows.col(index_t(i)) =
        circular_window(e.record.samples, cr, w).matrix();

    std::int64_t ct = c % n_target;
    if (ct < 0) ct += n_target;
    auto [tit, tnew] = tgt_cols.try_emplace(ct, tgt_used);
    if (tnew)
      tgt_windows.col(tgt_used++) =
          circular_window(target.samples, ct, w).matrix();
    tgt_of[i] = tit->second;
  }

  const Mat ref_embeds = embed_chunked(model, ref_windows);
  const Mat tgt_embeds = embed_chunked(model, tgt_windows.leftCols(tgt_used));

  Vec phi(index_t(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i)
    phi[index_t(i)] =
        (ref_embeds.col(index_t(i)) - tgt_embeds.col(tgt_of[i])).norm();
  const Vec probs = spatial_softmax(phi, model.sigma);

  std::vector<ScoredReference> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    out[i] = {refs[i].coord, probs[index_t(i)]};
  return out;
}

LikelihoodMap cell_average(const std::vector<ScoredReference>& scored,
                           const SearchGrid& grid) {
  if (scored.empty()) throw InputError("cell average needs scored references");
  if (grid.cells() <= 0) throw InputError("cell average needs a grid");
  LikelihoodMap m = make_map(grid);
  for (index_t r = 0; r < grid.lat_count; ++r) {
    for (index_t c = 0; c < grid.lon_count; ++c) {
      const GeoCoord center = grid.cell_center(r, c);
      double sum = 0.0;
      index_t count = 0;
      for (const ScoredReference& s : scored) {
        if (std::abs(s.coord.lat - center.lat) < 1.0 &&
            std::abs(s.coord.lon - center.lon) < 1.0) {
          sum += s.prob;
          ++count;
        }
      }
      if (count > 0) {
        m.at(r, c) = sum / double(count);
        m.direct[grid.index(r, c)] = 1;
      }
    }
  }
  return m;
}

LikelihoodMap fill_empty_cells(const LikelihoodMap& m) {
  const SearchGrid& g = m.grid;
  if (g.cells() <= 0) throw InputError("cannot fill an empty map");
  bool any_direct = false;
  for (std::uint8_t d : m.direct) any_direct |= d != 0;
  if (!any_direct) throw InputError("cannot fill a fully masked map");

  LikelihoodMap out = m;
  std::vector<std::uint8_t> have = m.direct;

  // Coverage gaps run along latitude, so work each constant-longitude
  // column first: interpolate between the bracketing data rows, copy the
  // nearest data row past the ends.
  for (index_t c = 0; c < g.lon_count; ++c) {
    std::vector<index_t> rows;
    for (index_t r = 0; r < g.lat_count; ++r)
      if (m.direct[g.index(r, c)]) rows.push_back(r);
    if (rows.empty()) continue;
    for (index_t r = 0; r < g.lat_count; ++r) {
      if (m.direct[g.index(r, c)]) continue;
      auto above = std::upper_bound(rows.begin(), rows.end(), r);
      double v;
      if (above == rows.begin()) {
        v = m.at(*above, c);
      } else if (above == rows.end()) {
        v = m.at(*(above - 1), c);
      } else {
        const index_t r1 = *above, r0 = *(above - 1);
        const double t = double(r - r0) / double(r1 - r0);
        v = (1.0 - t) * m.at(r0, c) + t * m.at(r1, c);
      }
      out.at(r, c) = v;
      have[g.index(r, c)] = 1;
    }
  }

  // Columns with no data at all: inverse-distance blend of the four nearest
  // data cells, ties broken by cell order so the fill is reproducible.
  std::vector<index_t> data_cells;
  for (index_t i = 0; i < g.cells(); ++i)
    if (m.direct[std::size_t(i)]) data_cells.push_back(i);
  for (index_t i = 0; i < g.cells(); ++i) {
    if (have[std::size_t(i)]) continue;
    const GeoCoord at = g.cell_center(i / g.lon_count, i % g.lon_count);
    std::vector<std::pair<double, index_t>> near;
    near.reserve(data_cells.size());
    for (index_t s : data_cells) {
      const GeoCoord sc = g.cell_center(s / g.lon_count, s % g.lon_count);
      near.emplace_back(coord_euclid_deg(at, sc), s);
    }
    std::sort(near.begin(), near.end());
    const std::size_t take = std::min<std::size_t>(4, near.size());
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < take; ++k) {
      const double wgt = 1.0 / near[k].first;
      num += wgt * m.values[near[k].second];
      den += wgt;
    }
    out.values[i] = num / den;
  }
  return out;
}

namespace {

LikelihoodMap light_pipeline(const LocalizerContext& ctx,
                             const DailyLightRecord& day,
                             LocalizerDiagnostics* diag) {
  if (!ctx.light_model || !ctx.light_lib)
    throw InputError("localizer context has no light side");
  DailyLightRecord prepped =
      day.scale == LightScale::linear ? log_light(day) : day;
  if (ctx.denoiser && !prepped.denoised)
    prepped = denoise(*ctx.denoiser, prepped);
  const auto refs =
      query_light_refs(*ctx.light_lib, prepped.date, ctx.window_days);
  if (refs.empty())
    throw InputError("no light references near " + to_string(prepped.date));
  const auto scored = score_references(ctx, prepped, refs);
  LikelihoodMap coarse = cell_average(scored, make_coarse_grid());
  if (diag) {
    diag->light_refs = index_t(refs.size());
    diag->light_sigma = ctx.light_model->sigma;
    for (std::uint8_t d : coarse.direct) diag->light_empty_cells += d == 0;
  }
  coarse = fill_empty_cells(coarse);
  LikelihoodMap fine = refine(coarse, ctx.refine_step_deg);
  normalize(fine);
  return fine;
}

LikelihoodMap temp_pipeline(const LocalizerContext& ctx,
                            const DailyTempRecord& day,
                            LocalizerDiagnostics* diag) {
  if (!ctx.temp_model || !ctx.temp_lib)
    throw InputError("localizer context has no temp side");
  const auto indices = query_temp_refs(*ctx.temp_lib, day.date);
  if (indices.empty())
    throw InputError("no temperature references for " + to_string(day.date));
  std::vector<TempEntry> refs;
  refs.reserve(indices.size());
  for (std::int32_t i : indices)
    refs.push_back(ctx.temp_lib->temp_entries[std::size_t(i)]);
  const auto scored = score_references(ctx, day, refs);
  LikelihoodMap coarse = cell_average(scored, make_coarse_grid());
  if (diag) {
    diag->temp_refs = index_t(refs.size());
    diag->temp_sigma = ctx.temp_model->sigma;
    for (std::uint8_t d : coarse.direct) diag->temp_empty_cells += d == 0;
  }
  coarse = fill_empty_cells(coarse);
  LikelihoodMap fine = refine(coarse, ctx.refine_step_deg);
  normalize(fine);
  return fine;
}

}  // namespace

LikelihoodMap localize_light(const LocalizerContext& ctx,
                             const DailyLightRecord& day) {
  return light_pipeline(ctx, day, nullptr);
}

LikelihoodMap localize_temp(const LocalizerContext& ctx,
                            const DailyTempRecord& day) {
  return temp_pipeline(ctx, day, nullptr);
}

LocalizationResult localize_fused(const LocalizerContext& ctx,
                                  const DailyLightRecord& light_day,
                                  const DailyTempRecord& temp_day) {
  if (!(light_day.date == temp_day.date))
    throw InputError("fused localization needs matching dates, got " +
                     to_string(light_day.date) + " and " +
                     to_string(temp_day.date));
  LocalizationResult res;
  res.date = light_day.date;

  std::exception_ptr light_err, temp_err;
  std::string light_msg, temp_msg;
  try {
    res.light_map = light_pipeline(ctx, light_day, &res.diagnostics);
  } catch (const std::exception& e) {
    light_err = std::current_exception();
    light_msg = e.what();
  }
  try {
    res.temp_map = temp_pipeline(ctx, temp_day, &res.diagnostics);
  } catch (const std::exception& e) {
    temp_err = std::current_exception();
    temp_msg = e.what();
  }

  if (light_err && temp_err) std::rethrow_exception(light_err);
  if (!light_err && !temp_err) {
    res.fused_map = fuse(res.light_map, res.temp_map);
  } else {
    res.diagnostics.degraded = true;
    res.diagnostics.degradation = light_err
                                      ? "light failed: " + light_msg
                                      : "temperature failed: " + temp_msg;
    res.fused_map = light_err ? res.temp_map : res.light_map;
  }
  res.estimate = argmax_coord(res.fused_map);

  try {
    res.baseline_estimate = threshold_baseline(light_day);
  } catch (const std::exception&) {
    res.baseline_estimate = std::nullopt;
  }
  return res;
}

BaselineScan baseline_lat_scan(double day_length_minutes, const DateStamp& d,
                               double lon, double tol_min) {
  validate(d);
  if (!(day_length_minutes > 0.0) || day_length_minutes >= kMinutesPerDay)
    throw InputError("day length must fall inside one day");
  if (!(tol_min >= 0.0)) throw InputError("scan tolerance must be >= 0");
  constexpr double lat_lo = 27.0, lat_hi = 48.0, step = 0.1;
  const int n = int(std::llround((lat_hi - lat_lo) / step));

  std::vector<double> err(std::size_t(n) + 1);
  int best = 0;
  for (int i = 0; i <= n; ++i) {
    const double lat = lat_lo + step * i;
    err[std::size_t(i)] =
        std::abs(day_length_min({lat, lon}, d) - day_length_minutes);
    if (err[std::size_t(i)] < err[std::size_t(best)]) best = i;
  }

  int left = best, right = best;
  const double cap = err[std::size_t(best)] + tol_min;
  while (left > 0 && err[std::size_t(left - 1)] <= cap) --left;
  while (right < n && err[std::size_t(right + 1)] <= cap) ++right;

  BaselineScan out;
  out.lat = lat_lo + step * best;
  out.flat_width_deg = step * (right - left);
  return out;
}

GeoCoord threshold_baseline(const DailyLightRecord& day) {
  const DailyLightRecord r =
      day.scale == LightScale::linear ? log_light(day) : day;
  const NightRun run = detect_night_run(r, std::log10(horizon_lux()));

  // Solar midnight is the dark-run midpoint; noon sits half a day away.
  const double night_mid = wrap_day_min(run.dusk_min + 0.5 * run.night_length_min);
  const double noon = wrap_day_min(night_mid + 720.0);
  const double eq = equation_of_time_min(r.date, noon);
  double lon = (720.0 - eq - noon) / 4.0;
  while (lon < -180.0) lon += 360.0;
  while (lon >= 180.0) lon -= 360.0;

  const double day_len = kMinutesPerDay - run.night_length_min;
  const BaselineScan scan = baseline_lat_scan(day_len, r.date, lon);
  return GeoCoord{scan.lat, lon};
}

}  // namespace ltgeo
