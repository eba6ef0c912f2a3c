#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltgeo/errors.hpp"
#include "ltgeo/records.hpp"

namespace ltgeo {

// A station or date with no data. Subclasses MissingArtifactError so an
// unhandled miss still exits with the missing-artifact code, but reference
// building catches it and falls back to interpolation.
struct NotAvailableError : MissingArtifactError {
  using MissingArtifactError::MissingArtifactError;
};

// Hourly weather-station access. Implementations are synchronous; callers
// serialize writes (single-writer, multi-reader).
class StationClient {
 public:
  virtual ~StationClient() = default;
  // One UTC day of hourly temperatures at the station nearest to c within
  // 0.01 degrees. Throws NotAvailableError on a miss.
  virtual DailyTempRecord fetch(const GeoCoord& c, const DateStamp& d) = 0;
  // Coordinates of every station this client can serve.
  virtual std::vector<GeoCoord> stations() = 0;
};

// Fixture filename for a station, coords at 0.01 degree resolution:
// station_<lat>_<lon>.csv
std::string station_fixture_name(const GeoCoord& c);

// Writes/overwrites one fixture file with rows date,hour,temp_c.
void write_station_fixture(const std::string& dir, const GeoCoord& c,
                           const std::vector<DailyTempRecord>& days);

// Serves fixtures from a directory of station_<lat>_<lon>.csv files.
class FixtureStationClient : public StationClient {
 public:
  explicit FixtureStationClient(std::string dir);
  DailyTempRecord fetch(const GeoCoord& c, const DateStamp& d) override;
  std::vector<GeoCoord> stations() override;

 private:
  struct Fixture {
    GeoCoord coord;
    std::string path;
    bool loaded = false;
    std::map<std::int64_t, Arr> days;  // date serial -> 24 hourly temps
  };
  Fixture* find(const GeoCoord& c);
  std::string dir_;
  std::vector<Fixture> fixtures_;
};

// Talks to an hourly-history HTTP endpoint
// (GET /v2.0/history/hourly?lat=..&lon=..&start_date=..&end_date=..&key=..,
// JSON response {"data":[{"hour":h,"temp":t},..]}). Connection errors and
// 5xx responses are retried with exponential backoff; a definitive 404 or
// retry exhaustion becomes NotAvailableError.
class HttpStationClient : public StationClient {
 public:
  HttpStationClient(std::string host, int port, std::string api_key,
                    std::vector<GeoCoord> stations, int max_retries = 3,
                    double backoff_s = 0.25);
  DailyTempRecord fetch(const GeoCoord& c, const DateStamp& d) override;
  std::vector<GeoCoord> stations() override { return stations_; }

 private:
  std::string host_;
  int port_;
  std::string api_key_;
  std::vector<GeoCoord> stations_;
  int max_retries_;
  double backoff_s_;
};

// Memoizes an inner client in memory and on disk, keyed by
// (lat, lon rounded to 0.01 degrees, date). Misses are not cached.
class CachingStationClient : public StationClient {
 public:
  CachingStationClient(StationClient& inner, std::string cache_dir);
  DailyTempRecord fetch(const GeoCoord& c, const DateStamp& d) override;
  std::vector<GeoCoord> stations() override { return inner_.stations(); }
  std::int64_t inner_calls() const { return inner_calls_; }

 private:
  StationClient& inner_;
  std::string dir_;
  std::map<std::string, DailyTempRecord> memory_;
  std::int64_t inner_calls_ = 0;
};

}  // namespace ltgeo
