#include "ltgeo/station.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace ltgeo {

namespace {

std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

bool near_001(const GeoCoord& a, const GeoCoord& b) {
  return std::abs(a.lat - b.lat) <= 0.005 + 1e-9 &&
         std::abs(a.lon - b.lon) <= 0.005 + 1e-9;
}

// Parses rows `date,hour,temp_c`; keeps only dates with all 24 hours.
std::map<std::int64_t, Arr> parse_hourly_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotAvailableError("cannot open station file " + path);
  std::map<std::int64_t, Arr> days;
  std::map<std::int64_t, int> seen;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("date", 0) == 0)
      continue;
    std::istringstream row(line);
    std::string date_s, hour_s, temp_s;
    if (!std::getline(row, date_s, ',') || !std::getline(row, hour_s, ',') ||
        !std::getline(row, temp_s))
      throw InputError("malformed station row in " + path + ": " + line);
    std::int64_t serial = 0;
    int hour = -1;
    double temp = 0.0;
    try {
      serial = date_serial(parse_date(date_s));
      hour = std::stoi(hour_s);
      temp = std::stod(temp_s);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw InputError("malformed station row in " + path + ": " + line);
    }
    if (hour < 0 || hour > 23)
      throw InputError("station hour out of range in " + path + ": " + line);
    auto it = days.find(serial);
    if (it == days.end()) {
      it = days.emplace(serial, Arr::Constant(24, 0.0)).first;
      seen[serial] = 0;
    }
    it->second[hour] = temp;
    seen[serial] += 1;
  }
  for (auto it = days.begin(); it != days.end();) {
    if (seen[it->first] != 24)
      it = days.erase(it);
    else
      ++it;
  }
  return days;
}

void write_hourly_csv(std::ostream& out, const std::vector<DailyTempRecord>& days) {
  out << "date,hour,temp_c\n";
  char buf[64];
  for (const auto& d : days) {
    for (int h = 0; h < 24; ++h) {
      std::snprintf(buf, sizeof buf, "%.17g", d.samples[h]);
      out << to_string(d.date) << ',' << h << ',' << buf << '\n';
    }
  }
}

DailyTempRecord make_station_day(const GeoCoord& c, const DateStamp& d,
                                 const Arr& hours) {
  DailyTempRecord r;
  r.date = d;
  r.samples = hours;
  r.resolution_min = 60.0;
  r.coord = c;
  r.source = TempSource::station;
  validate(r);
  return r;
}

}  // namespace

std::string station_fixture_name(const GeoCoord& c) {
  return "station_" + fmt_coord(c.lat) + "_" + fmt_coord(c.lon) + ".csv";
}

void write_station_fixture(const std::string& dir, const GeoCoord& c,
                           const std::vector<DailyTempRecord>& days) {
  for (const auto& d : days) {
    validate(d);
    if (d.samples.size() != 24)
      throw InputError("station fixtures are hourly: expected 24 samples");
  }
  fs::create_directories(dir);
  std::ofstream f(dir + "/" + station_fixture_name(c), std::ios::trunc);
  if (!f) throw InputError("cannot write station fixture in " + dir);
  write_hourly_csv(f, days);
}

FixtureStationClient::FixtureStationClient(std::string dir)
    : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_))
    throw MissingArtifactError("station fixture dir missing: " + dir_);
  for (const auto& e : fs::directory_iterator(dir_)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("station_", 0) != 0 || name.find(".csv") == std::string::npos)
      continue;
    const std::string core = name.substr(8, name.size() - 8 - 4);
    const auto sep = core.find('_');
    if (sep == std::string::npos) continue;
    Fixture fx;
    try {
      fx.coord = GeoCoord{std::stod(core.substr(0, sep)),
                          std::stod(core.substr(sep + 1))};
    } catch (const std::exception&) {
      continue;
    }
    fx.path = e.path().string();
    fixtures_.push_back(std::move(fx));
  }
  std::sort(fixtures_.begin(), fixtures_.end(),
            [](const Fixture& a, const Fixture& b) { return a.path < b.path; });
}

FixtureStationClient::Fixture* FixtureStationClient::find(const GeoCoord& c) {
  for (auto& f : fixtures_)
    if (near_001(f.coord, c)) return &f;
  return nullptr;
}

DailyTempRecord FixtureStationClient::fetch(const GeoCoord& c,
                                            const DateStamp& d) {
  Fixture* fx = find(c);
  if (!fx)
    throw NotAvailableError("no station fixture near " + fmt_coord(c.lat) +
                            "," + fmt_coord(c.lon));
  if (!fx->loaded) {
    fx->days = parse_hourly_csv(fx->path);
    fx->loaded = true;
  }
  auto it = fx->days.find(date_serial(d));
  if (it == fx->days.end())
    throw NotAvailableError("station " + fmt_coord(fx->coord.lat) + "," +
                            fmt_coord(fx->coord.lon) + " has no data for " +
                            to_string(d));
  return make_station_day(fx->coord, d, it->second);
}

std::vector<GeoCoord> FixtureStationClient::stations() {
  std::vector<GeoCoord> out;
  for (const auto& f : fixtures_) out.push_back(f.coord);
  return out;
}

HttpStationClient::HttpStationClient(std::string host, int port,
                                     std::string api_key,
                                     std::vector<GeoCoord> stations,
                                     int max_retries, double backoff_s)
    : host_(std::move(host)),
      port_(port),
      api_key_(std::move(api_key)),
      stations_(std::move(stations)),
      max_retries_(max_retries),
      backoff_s_(backoff_s) {}

DailyTempRecord HttpStationClient::fetch(const GeoCoord& c,
                                         const DateStamp& d) {
  char path[256];
  std::snprintf(path, sizeof path,
                "/v2.0/history/hourly?lat=%.2f&lon=%.2f&start_date=%s&"
                "end_date=%s&key=%s",
                c.lat, c.lon, to_string(d).c_str(),
                to_string(add_days(d, 1)).c_str(), api_key_.c_str());

  for (int attempt = 0; attempt < max_retries_; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(
          backoff_s_ * std::pow(2.0, attempt - 1)));
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(5, 0);
    cli.set_read_timeout(10, 0);
    httplib::Result res = cli.Get(path);
    if (!res) continue;                    // connection error: retry
    if (res->status == 404)
      throw NotAvailableError("station endpoint has no data for " +
                              to_string(d));
    if (res->status != 200) continue;      // server error: retry
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("data") || !j["data"].is_array())
      continue;
    Arr hours = Arr::Constant(24, std::nan(""));
    for (const auto& row : j["data"]) {
      if (!row.contains("hour") || !row.contains("temp")) continue;
      const int h = row["hour"].get<int>();
      if (h >= 0 && h < 24) hours[h] = row["temp"].get<double>();
    }
    if (!hours.isFinite().all())
      throw NotAvailableError("station response incomplete for " +
                              to_string(d));
    return make_station_day(c, d, hours);
  }
  throw NotAvailableError("station endpoint unreachable after " +
                          std::to_string(max_retries_) + " attempts");
}

CachingStationClient::CachingStationClient(StationClient& inner,
                                           std::string cache_dir)
    : inner_(inner), dir_(std::move(cache_dir)) {
  fs::create_directories(dir_);
}

DailyTempRecord CachingStationClient::fetch(const GeoCoord& c,
                                            const DateStamp& d) {
  const double rlat = std::round(c.lat * 100.0) / 100.0;
  const double rlon = std::round(c.lon * 100.0) / 100.0;
  const std::string key =
      fmt_coord(rlat) + "_" + fmt_coord(rlon) + "_" + to_string(d);
  auto mem = memory_.find(key);
  if (mem != memory_.end()) return mem->second;

  const std::string path = dir_ + "/cache_" + key + ".csv";
  if (fs::exists(path)) {
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);  // "#coord,<lat>,<lon>"
    GeoCoord stored{rlat, rlon};
    if (header.rfind("#coord,", 0) == 0) {
      std::istringstream h(header.substr(7));
      std::string a, b;
      std::getline(h, a, ',');
      std::getline(h, b);
      stored = GeoCoord{std::stod(a), std::stod(b)};
    }
    auto days = parse_hourly_csv(path);
    auto it = days.find(date_serial(d));
    if (it != days.end()) {
      DailyTempRecord r = make_station_day(stored, d, it->second);
      memory_.emplace(key, r);
      return r;
    }
  }

  ++inner_calls_;
  DailyTempRecord r = inner_.fetch(c, d);
  {
    std::ofstream f(path, std::ios::trunc);
    char buf[96];
    std::snprintf(buf, sizeof buf, "#coord,%.17g,%.17g\n",
                  r.coord ? r.coord->lat : rlat, r.coord ? r.coord->lon : rlon);
    f << buf;
    write_hourly_csv(f, {r});
  }
  memory_.emplace(key, r);
  return r;
}

}  // namespace ltgeo
