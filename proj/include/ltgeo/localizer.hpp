#pragma once

#include <optional>
#include <vector>

#include "ltgeo/daae.hpp"
#include "ltgeo/geo.hpp"
#include "ltgeo/records.hpp"
#include "ltgeo/reflib.hpp"
#include "ltgeo/siamese.hpp"

namespace ltgeo {

// One reference's share of the spatial softmax for a single query day.
struct ScoredReference {
  GeoCoord coord;
  double prob = 0.0;
};

// Frozen models and built libraries for a localization run. Non-owning: the
// pointed-to objects must outlive the context and stay unchanged while it is
// in use. Localization is a pure function of (context, query records), so
// results are reproducible run to run.
struct LocalizerContext {
  const SiameseModel* light_model = nullptr;
  const SiameseModel* temp_model = nullptr;
  const ReferenceLibrary* light_lib = nullptr;
  const ReferenceLibrary* temp_lib = nullptr;
  const DaaeModel* denoiser = nullptr;  // optional light cleanup
  int window_days = 5;        // light reference query half-width
  double refine_step_deg = 0.1;
};

struct LocalizerDiagnostics {
  index_t light_refs = 0;        // references behind the light softmax
  index_t temp_refs = 0;         // same for temperature
  index_t light_empty_cells = 0; // coarse cells with no reference in reach
  index_t temp_empty_cells = 0;
  double light_sigma = 0.0;
  double temp_sigma = 0.0;
  bool degraded = false;         // one modality failed; see degradation
  std::string degradation;       // empty unless degraded
};

// Maps are refined and normalized. estimate is always the fused-map argmax;
// ties resolve to the lowest flat index, i.e. the southmost then westmost
// cell. When one modality fails its map is left empty, fused_map carries the
// surviving modality, and diagnostics.degraded is set.
struct LocalizationResult {
  DateStamp date;
  LikelihoodMap light_map;
  LikelihoodMap temp_map;
  LikelihoodMap fused_map;
  GeoCoord estimate;
  std::optional<GeoCoord> baseline_estimate;
  LocalizerDiagnostics diagnostics;
};

// Scores a preprocessed (log-scale, optionally denoised) light day against
// reference entries. Each entry's window is aligned at the entry's own night
// center; the target day is re-aligned to that same center, so a reference
// only matches when the target's night shape sits where the reference says
// it should. Embedding distances feed the spatial softmax with the model's
// sigma; probabilities sum to 1 in entry order.
std::vector<ScoredReference> score_references(
    const LocalizerContext& ctx, const DailyLightRecord& target,
    const std::vector<LightEntry>& refs);

// Temperature flavour: both windows align at the astronomical night center
// of the reference coordinate on the target's date. No denoising.
std::vector<ScoredReference> score_references(
    const LocalizerContext& ctx, const DailyTempRecord& target,
    const std::vector<TempEntry>& refs);

// Mean probability over the references within one degree of the cell center
// on both axes, strictly: a reference exactly 1.0 degree away on either axis
// is excluded. Cells with no reference in reach stay masked at value zero.
LikelihoodMap cell_average(const std::vector<ScoredReference>& scored,
                           const SearchGrid& grid);

// Fills masked cells from the data cells. Coverage is sparse along latitude,
// so each constant-longitude column interpolates linearly between its
// nearest data rows first (boundary cells copy the nearest row). Columns
// with no data at all then take an inverse-distance blend of the four
// nearest data cells. Values become finite everywhere; the direct flags
// keep recording which cells came from data.
LikelihoodMap fill_empty_cells(const LikelihoodMap& m);

// Full single-modality pipelines: preprocess, query references, score,
// average into the coarse grid, fill, refine, normalize. Light accepts a
// linear- or log-scale day and denoises when the context has a denoiser.
LikelihoodMap localize_light(const LocalizerContext& ctx,
                             const DailyLightRecord& day);
LikelihoodMap localize_temp(const LocalizerContext& ctx,
                            const DailyTempRecord& day);

// Runs both modalities on one day and fuses the refined maps into the
// position estimate. Records must agree on the date. If one modality throws,
// the other's map is used alone and the result is flagged degraded; if both
// throw, the light-side error propagates. baseline_estimate is filled when
// the threshold baseline succeeds on the light day.
LocalizationResult localize_fused(const LocalizerContext& ctx,
                                  const DailyLightRecord& light_day,
                                  const DailyTempRecord& temp_day);

// Latitude scan for the threshold baseline: picks the latitude in
// [27, 48] (0.1 degree pitch) whose astronomical day length best matches
// the measured one. flat_width_deg spans the contiguous scan region whose
// mismatch stays within tol_min of the best; a wide flat region means the
// day length pins latitude poorly (the equinox failure mode).
struct BaselineScan {
  double lat = 0.0;
  double flat_width_deg = 0.0;
};
BaselineScan baseline_lat_scan(double day_length_minutes, const DateStamp& d,
                               double lon, double tol_min = 2.0);

// Day/night threshold baseline. Dusk and dawn are the crossings of the
// day/night illuminance threshold (the horizon-crossing level of the light
// transform); longitude comes from the local-noon offset at 4 minutes per
// degree, latitude from baseline_lat_scan on the implied day length.
// Accepts a linear- or log-scale full day.
GeoCoord threshold_baseline(const DailyLightRecord& day);

}  // namespace ltgeo
