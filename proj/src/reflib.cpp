#include "ltgeo/reflib.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "ltgeo/daae.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/kriging.hpp"
#include "ltgeo/signal_prep.hpp"

namespace fs = std::filesystem;

namespace ltgeo {

namespace {

double wrap_day(double m) {
  m = std::fmod(m, kMinutesPerDay);
  return m < 0.0 ? m + kMinutesPerDay : m;
}

void check_lon_target(double t) {
  const SearchGrid g = make_coarse_grid();
  const double lo = g.lon0;
  const double hi = g.lon0 + double(g.lon_count - 1) * g.lon_step;
  if (!(t >= lo - 1e-9 && t <= hi + 1e-9))
    throw InputError("synthesis longitude " + std::to_string(t) +
                     " outside grid extent");
}

LightEntry shifted_entry(const ReferenceLibrary& lib, const LightEntry& src,
                         double lon_target) {
  const double res = lib.light_records[src.parent].resolution_min;
  const double shift_min = 4.0 * (src.coord.lon - lon_target);
  LightEntry e;
  e.parent = src.parent;
  e.coord = GeoCoord{src.coord.lat, lon_target};
  e.date = src.date;
  e.provenance = Provenance::synthesized_shift;
  e.shift_samples = std::int32_t(std::llround(shift_min / res));
  e.shift_remainder_min = shift_min - double(e.shift_samples) * res;
  e.night_center_min = wrap_day(src.night_center_min + shift_min);
  return e;
}

// Pack file primitives; fixed little-endian layout of the host types.
template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw InputError(std::string("library pack truncated at ") + what);
  return v;
}

void put_arr(std::ostream& out, const Arr& a) {
  put<std::uint64_t>(out, std::uint64_t(a.size()));
  out.write(reinterpret_cast<const char*>(a.data()),
            std::streamsize(sizeof(double)) * a.size());
}

Arr take_arr(std::istream& in, const char* what) {
  const auto n = take<std::uint64_t>(in, what);
  if (n > (1u << 24)) throw InputError("library pack: implausible array size");
  const index_t sz = index_t(n);
  Arr a(sz);
  in.read(reinterpret_cast<char*>(a.data()),
          std::streamsize(sizeof(double)) * a.size());
  if (!in) throw InputError(std::string("library pack truncated at ") + what);
  return a;
}

constexpr std::uint32_t kPackMagic = 0x4c54524c;  // "LRTL"
constexpr std::uint32_t kPackVersion = 1;

}  // namespace

LightEntry measured_entry(const ReferenceLibrary& lib, std::int32_t i) {
  if (i < 0 || std::size_t(i) >= lib.light_records.size())
    throw InputError("light record index out of range");
  const DailyLightRecord& r = lib.light_records[std::size_t(i)];
  LightEntry e;
  e.parent = i;
  e.coord = *r.coord;
  e.date = r.date;
  e.provenance = Provenance::measured;
  e.night_center_min = lib.night_centers[std::size_t(i)];
  return e;
}

std::vector<double> default_lon_targets() {
  const SearchGrid g = make_coarse_grid();
  std::vector<double> t(std::size_t(g.lon_count));
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = g.lon0 + double(i) * g.lon_step;
  return t;
}

ReferenceLibrary build_light_reference(
    const std::vector<DailyLightRecord>& days, std::vector<double> lon_targets,
    const DaaeModel* denoiser) {
  for (double t : lon_targets) check_lon_target(t);
  ReferenceLibrary lib;
  lib.modality = Modality::light;
  lib.lon_targets = std::move(lon_targets);
  lib.light_records.reserve(days.size());
  lib.night_centers.reserve(days.size());
  for (const DailyLightRecord& day : days) {
    validate(day);
    if (!day.coord)
      throw InputError("reference light records must carry a coordinate");
    if (day.scale != LightScale::linear)
      throw InputError("reference build expects linear-scale light records");
    if (std::abs(day.resolution_min - kLightResolutionMin) > 1e-9)
      throw InputError("reference light records must be at the canonical " +
                       std::to_string(kLightResolutionMin) + " min resolution");
    DailyLightRecord prepped = log_light(day);
    if (denoiser) prepped = denoise(*denoiser, prepped);
    lib.night_centers.push_back(night_center_xcorr(prepped));
    lib.light_records.push_back(std::move(prepped));
  }
  return lib;
}

std::vector<LightEntry> synthesize_longitudes(
    const ReferenceLibrary& lib, const LightEntry& entry,
    const std::vector<double>& lon_targets) {
  if (entry.provenance != Provenance::measured)
    throw InputError("longitude synthesis requires a measured entry");
  if (entry.parent < 0 ||
      std::size_t(entry.parent) >= lib.light_records.size())
    throw InputError("light entry parent out of range");
  for (double t : lon_targets) check_lon_target(t);
  std::vector<LightEntry> out;
  out.reserve(lon_targets.size());
  for (double t : lon_targets) out.push_back(shifted_entry(lib, entry, t));
  return out;
}

std::vector<LightEntry> query_light_refs(const ReferenceLibrary& lib,
                                         const DateStamp& date,
                                         int window_days) {
  validate(date);
  if (window_days < 0) throw InputError("query window must be >= 0 days");
  std::vector<LightEntry> out;
  for (std::size_t i = 0; i < lib.light_records.size(); ++i) {
    if (doy_distance(lib.light_records[i].date, date) > window_days) continue;
    LightEntry me = measured_entry(lib, std::int32_t(i));
    out.push_back(me);
    for (double t : lib.lon_targets) out.push_back(shifted_entry(lib, me, t));
  }
  return out;
}

DailyLightRecord materialize(const ReferenceLibrary& lib,
                             const LightEntry& e) {
  if (e.parent < 0 || std::size_t(e.parent) >= lib.light_records.size())
    throw InputError("light entry parent out of range");
  DailyLightRecord r = lib.light_records[std::size_t(e.parent)];
  if (e.provenance == Provenance::measured) return r;
  const index_t n = r.samples.size();
  const std::int64_t s = e.shift_samples;
  Arr shifted(n);
  for (index_t i = 0; i < n; ++i)
    shifted[i] = r.samples[index_t(((i - s) % n + n) % n)];
  r.samples = std::move(shifted);
  r.coord = e.coord;
  r.date = e.date;
  r.source = LightSource::synthesized;
  return r;
}

std::vector<std::int32_t> nearby_parents(const ReferenceLibrary& lib,
                                         const GeoCoord& c,
                                         double max_axis_deg) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < lib.light_records.size(); ++i) {
    const GeoCoord& p = *lib.light_records[i].coord;
    if (std::abs(p.lat - c.lat) < max_axis_deg &&
        std::abs(p.lon - c.lon) < max_axis_deg)
      out.push_back(std::int32_t(i));
  }
  return out;
}

DailyTempRecord station_temperature(StationClient& client,
                                    const StationQuery& q) {
  validate(q.coord);
  validate(q.date);
  if (std::abs(q.resolution_min - kTempResolutionMin) > 1e-9)
    throw InputError("station queries are hourly");
  if (!make_coarse_grid().contains(q.coord))
    throw InputError("station query outside the study extent");
  return client.fetch(q.coord, q.date);
}

ReferenceLibrary build_temp_reference(const SearchGrid& grid,
                                      const std::vector<DateStamp>& dates,
                                      StationClient& client, int max_stations,
                                      double max_station_dist_deg) {
  if (grid.cells() <= 0) throw InputError("empty search grid");
  if (dates.empty()) throw InputError("no dates to build references for");
  if (max_stations < 1) throw InputError("max_stations must be >= 1");
  if (!(max_station_dist_deg > 0.0))
    throw InputError("station search radius must be positive");

  ReferenceLibrary lib;
  lib.modality = Modality::temperature;

  const std::vector<GeoCoord> stations = client.stations();
  const double half_cell =
      0.5 * std::min(grid.lat_step, grid.lon_step) + 1e-9;

  std::set<std::int64_t> serials;
  for (const DateStamp& d : dates) {
    validate(d);
    serials.insert(date_serial(d));
  }

  for (std::int64_t serial : serials) {
    const DateStamp d = date_from_serial(serial);
    std::vector<GeoCoord> pool_coords;
    std::vector<Arr> pool_days;
    for (const GeoCoord& s : stations) {
      try {
        DailyTempRecord day = client.fetch(s, d);
        pool_coords.push_back(s);
        pool_days.push_back(day.samples);
      } catch (const NotAvailableError&) {
      }
    }
    if (pool_coords.empty()) continue;

    Vec daily_mean(index_t(pool_coords.size()));
    for (std::size_t i = 0; i < pool_days.size(); ++i)
      daily_mean[index_t(i)] = pool_days[i].mean();
    const VariogramModel vg = pool_coords.size() > 1
                                  ? fit_variogram(pool_coords, daily_mean)
                                  : VariogramModel{};

    for (index_t r = 0; r < grid.lat_count; ++r) {
      for (index_t c = 0; c < grid.lon_count; ++c) {
        const GeoCoord center = grid.cell_center(r, c);

        // A station inside the cell serves it directly.
        int in_cell = -1;
        double best = half_cell;
        for (std::size_t i = 0; i < pool_coords.size(); ++i) {
          const double cheb = coord_distance_deg(pool_coords[i], center);
          if (cheb <= best) {
            best = cheb;
            in_cell = int(i);
          }
        }

        TempEntry entry;
        entry.coord = center;
        entry.date = d;
        if (in_cell >= 0) {
          entry.provenance = Provenance::measured;
          entry.record.samples = pool_days[std::size_t(in_cell)];
          entry.record.coord = pool_coords[std::size_t(in_cell)];
          entry.record.source = TempSource::station;
        } else {
          std::vector<std::size_t> order;
          for (std::size_t i = 0; i < pool_coords.size(); ++i)
            if (coord_euclid_deg(pool_coords[i], center) <=
                max_station_dist_deg)
              order.push_back(i);
          if (order.empty()) continue;  // cell unavailable on this date
          std::sort(order.begin(), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = coord_euclid_deg(pool_coords[a], center);
                      const double db = coord_euclid_deg(pool_coords[b], center);
                      return da != db ? da < db : a < b;
                    });
          if (order.size() > std::size_t(max_stations))
            order.resize(std::size_t(max_stations));
          std::vector<GeoCoord> sub;
          for (std::size_t i : order) sub.push_back(pool_coords[i]);
          Vec w;
          try {
            w = kriging_weights(sub, vg, center);
          } catch (const NumericalError&) {
            continue;
          }
          Arr mix = Arr::Zero(pool_days[order[0]].size());
          for (std::size_t i = 0; i < order.size(); ++i)
            mix += w[index_t(i)] * pool_days[order[i]];
          entry.provenance = Provenance::kriged;
          entry.record.samples = std::move(mix);
          entry.record.coord = center;
          entry.record.source = TempSource::kriged;
        }
        entry.record.date = d;
        entry.record.resolution_min = kTempResolutionMin;
        validate(entry.record);
        lib.temp_entries.push_back(std::move(entry));
      }
    }
  }
  return lib;
}

std::vector<std::int32_t> query_temp_refs(const ReferenceLibrary& lib,
                                          const DateStamp& date) {
  validate(date);
  const std::int64_t serial = date_serial(date);
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < lib.temp_entries.size(); ++i)
    if (date_serial(lib.temp_entries[i].date) == serial)
      out.push_back(std::int32_t(i));
  return out;
}

void save_library(const std::string& pack_path, const ReferenceLibrary& lib) {
  std::ofstream out(pack_path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write library pack " + pack_path);
  put(out, kPackMagic);
  put(out, kPackVersion);
  put<std::uint8_t>(out, lib.modality == Modality::light ? 0 : 1);

  put<std::uint64_t>(out, lib.lon_targets.size());
  for (double t : lib.lon_targets) put(out, t);

  put<std::uint64_t>(out, lib.light_records.size());
  for (std::size_t i = 0; i < lib.light_records.size(); ++i) {
    const DailyLightRecord& r = lib.light_records[i];
    put<std::int64_t>(out, date_serial(r.date));
    put(out, r.coord->lat);
    put(out, r.coord->lon);
    put(out, r.resolution_min);
    put<std::uint8_t>(out, std::uint8_t(r.source));
    put<std::uint8_t>(out, std::uint8_t(r.scale));
    put<std::uint8_t>(out, r.denoised ? 1 : 0);
    put_arr(out, r.samples);
    put(out, lib.night_centers[i]);
  }

  put<std::uint64_t>(out, lib.temp_entries.size());
  for (const TempEntry& e : lib.temp_entries) {
    put(out, e.coord.lat);
    put(out, e.coord.lon);
    put<std::int64_t>(out, date_serial(e.date));
    put<std::uint8_t>(out, std::uint8_t(e.provenance));
    put<std::uint8_t>(out, std::uint8_t(e.record.source));
    put(out, e.record.resolution_min);
    const bool has = e.record.coord.has_value();
    put<std::uint8_t>(out, has ? 1 : 0);
    put(out, has ? e.record.coord->lat : 0.0);
    put(out, has ? e.record.coord->lon : 0.0);
    put_arr(out, e.record.samples);
  }
  if (!out) throw InputError("short write on library pack " + pack_path);
  out.close();

  std::size_t n_station = 0, n_kriged = 0;
  for (const TempEntry& e : lib.temp_entries)
    (e.provenance == Provenance::kriged ? n_kriged : n_station) += 1;
  nlohmann::json manifest;
  manifest["schema_version"] = kPackVersion;
  manifest["modality"] =
      lib.modality == Modality::light ? "light" : "temperature";
  manifest["measured_light"] = lib.light_records.size();
  manifest["synthesized_light"] =
      lib.light_records.size() * lib.lon_targets.size();
  manifest["lon_targets"] = lib.lon_targets.size();
  manifest["temp_station"] = n_station;
  manifest["temp_kriged"] = n_kriged;

  double lat_lo = 90, lat_hi = -90, lon_lo = 180, lon_hi = -180;
  std::int64_t d_lo = 0, d_hi = 0;
  bool any = false;
  auto fold = [&](const GeoCoord& c, const DateStamp& d) {
    lat_lo = std::min(lat_lo, c.lat);
    lat_hi = std::max(lat_hi, c.lat);
    lon_lo = std::min(lon_lo, c.lon);
    lon_hi = std::max(lon_hi, c.lon);
    const std::int64_t s = date_serial(d);
    d_lo = any ? std::min(d_lo, s) : s;
    d_hi = any ? std::max(d_hi, s) : s;
    any = true;
  };
  for (const DailyLightRecord& r : lib.light_records) fold(*r.coord, r.date);
  for (const TempEntry& e : lib.temp_entries) fold(e.coord, e.date);
  if (any) {
    manifest["extent"] = {{"lat_min", lat_lo},
                          {"lat_max", lat_hi},
                          {"lon_min", lon_lo},
                          {"lon_max", lon_hi}};
    manifest["dates"] = {{"first", to_string(date_from_serial(d_lo))},
                         {"last", to_string(date_from_serial(d_hi))}};
  }

  const fs::path mpath = fs::path(pack_path).replace_extension(".json");
  std::ofstream mf(mpath, std::ios::trunc);
  if (!mf) throw InputError("cannot write library manifest " + mpath.string());
  mf << manifest.dump(2) << '\n';
}

ReferenceLibrary load_library(const std::string& pack_path) {
  std::ifstream in(pack_path, std::ios::binary);
  if (!in) throw MissingArtifactError("library pack missing: " + pack_path);
  if (take<std::uint32_t>(in, "magic") != kPackMagic)
    throw InputError("not a library pack: " + pack_path);
  if (take<std::uint32_t>(in, "version") != kPackVersion)
    throw InputError("unsupported library pack version in " + pack_path);

  ReferenceLibrary lib;
  lib.modality = take<std::uint8_t>(in, "modality") == 0
                     ? Modality::light
                     : Modality::temperature;

  const auto n_targets = take<std::uint64_t>(in, "lon target count");
  for (std::uint64_t i = 0; i < n_targets; ++i)
    lib.lon_targets.push_back(take<double>(in, "lon target"));

  const auto n_light = take<std::uint64_t>(in, "light record count");
  for (std::uint64_t i = 0; i < n_light; ++i) {
    DailyLightRecord r;
    r.date = date_from_serial(take<std::int64_t>(in, "light date"));
    GeoCoord c;
    c.lat = take<double>(in, "light lat");
    c.lon = take<double>(in, "light lon");
    r.coord = c;
    r.resolution_min = take<double>(in, "light resolution");
    r.source = LightSource(take<std::uint8_t>(in, "light source"));
    r.scale = LightScale(take<std::uint8_t>(in, "light scale"));
    r.denoised = take<std::uint8_t>(in, "light denoised") != 0;
    r.samples = take_arr(in, "light samples");
    lib.night_centers.push_back(take<double>(in, "night center"));
    validate(r);
    lib.light_records.push_back(std::move(r));
  }

  const auto n_temp = take<std::uint64_t>(in, "temp entry count");
  for (std::uint64_t i = 0; i < n_temp; ++i) {
    TempEntry e;
    e.coord.lat = take<double>(in, "temp lat");
    e.coord.lon = take<double>(in, "temp lon");
    e.date = date_from_serial(take<std::int64_t>(in, "temp date"));
    e.provenance = Provenance(take<std::uint8_t>(in, "temp provenance"));
    e.record.source = TempSource(take<std::uint8_t>(in, "temp source"));
    e.record.resolution_min = take<double>(in, "temp resolution");
    const bool has = take<std::uint8_t>(in, "temp coord flag") != 0;
    const double rlat = take<double>(in, "temp record lat");
    const double rlon = take<double>(in, "temp record lon");
    if (has) e.record.coord = GeoCoord{rlat, rlon};
    e.record.samples = take_arr(in, "temp samples");
    e.record.date = e.date;
    validate(e.record);
    lib.temp_entries.push_back(std::move(e));
  }
  return lib;
}

}  // namespace ltgeo
