#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ltgeo/records.hpp"
#include "ltgeo/station.hpp"

namespace ltgeo {

struct DaaeModel;

enum class Provenance { measured, synthesized_shift, kriged };

// One dated, located light reference. Synthesized entries are views onto a
// measured parent: an integer circular shift plus a sub-sample remainder.
// night_center_min is the exact shifted center (remainder included); the
// parent's own samples stay on the canonical grid, so comparisons apply the
// remainder on the target side of the alignment.
struct LightEntry {
  std::int32_t parent = -1;  // index into ReferenceLibrary::light_records
  GeoCoord coord;
  DateStamp date;
  Provenance provenance = Provenance::measured;
  std::int32_t shift_samples = 0;
  double shift_remainder_min = 0.0;
  double night_center_min = 0.0;
};

// One dated, located temperature reference at a grid cell.
struct TempEntry {
  GeoCoord coord;
  DateStamp date;
  Provenance provenance = Provenance::measured;
  DailyTempRecord record;
};

// Reference library for one modality. Light side: measured records are
// stored preprocessed (log scale, denoised when built with a model) with
// their night centers; longitude-synthesized entries are expanded lazily at
// query time, so the stored footprint stays linear in the measured data.
// Temperature side: one hourly entry per covered (cell, date).
struct ReferenceLibrary {
  Modality modality = Modality::light;

  std::vector<DailyLightRecord> light_records;
  std::vector<double> night_centers;  // UTC minutes, parallel to records
  std::vector<double> lon_targets;    // synthesis grid, degrees

  std::vector<TempEntry> temp_entries;  // sorted by (date, lat, lon)
};

// The measured entry wrapping light record i.
LightEntry measured_entry(const ReferenceLibrary& lib, std::int32_t i);

// Every 1 degree across the coarse-grid longitude extent.
std::vector<double> default_lon_targets();

// Builds the light side: validates linear-scale located records, rescales to
// log, optionally denoises, and caches each record's night center.
ReferenceLibrary build_light_reference(
    const std::vector<DailyLightRecord>& days,
    std::vector<double> lon_targets = default_lon_targets(),
    const DaaeModel* denoiser = nullptr);

// Longitude synthesis from a measured entry: each target gets the record
// circularly shifted by 4*(lon_source - lon_target) minutes, rounded to the
// nearest canonical sample with the remainder stored; latitude never
// changes. Targets outside the coarse-grid longitude extent are errors.
std::vector<LightEntry> synthesize_longitudes(
    const ReferenceLibrary& lib, const LightEntry& entry,
    const std::vector<double>& lon_targets);

// All entries within window_days of `date` by wrap-safe day-of-year
// distance (inclusive, year-agnostic): the measured entries plus their
// lazily expanded synthesized set. Pure; may be empty.
std::vector<LightEntry> query_light_refs(const ReferenceLibrary& lib,
                                         const DateStamp& date,
                                         int window_days = 5);

// Entry as a standalone record: parent samples circularly shifted by
// shift_samples, entry coord and provenance applied.
DailyLightRecord materialize(const ReferenceLibrary& lib,
                             const LightEntry& e);

// Indices into light_records within max_axis_deg of c on both axes
// (strict), bucket-indexed. For pair construction.
std::vector<std::int32_t> nearby_parents(const ReferenceLibrary& lib,
                                         const GeoCoord& c,
                                         double max_axis_deg);

// Hourly station day lookup with study-extent validation.
struct StationQuery {
  GeoCoord coord;
  DateStamp date;
  double resolution_min = kTempResolutionMin;
};
DailyTempRecord station_temperature(StationClient& client,
                                    const StationQuery& q);

// Builds the temperature side over grid cells x dates: a station lying in
// the cell serves it directly; otherwise the cell is kriged from the
// max_stations nearest stations within max_station_dist_deg (about 500 km).
// Cells with no station in range on a date are left unavailable. Weights
// come from one variogram per date, fitted to the daily station means.
ReferenceLibrary build_temp_reference(const SearchGrid& grid,
                                      const std::vector<DateStamp>& dates,
                                      StationClient& client,
                                      int max_stations = 8,
                                      double max_station_dist_deg = 4.5);

// Temp entries for one exact date, as indices into temp_entries.
std::vector<std::int32_t> query_temp_refs(const ReferenceLibrary& lib,
                                          const DateStamp& date);

// Persistence: a single binary pack plus a JSON manifest (entry counts,
// extents, provenance histogram) at the same path with a .json extension.
void save_library(const std::string& pack_path, const ReferenceLibrary& lib);
ReferenceLibrary load_library(const std::string& pack_path);

}  // namespace ltgeo
