#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include "ltgeo/astro.hpp"
#include "ltgeo/station.hpp"

// After the Eigen-bearing headers: resolv.h (via httplib) #defines _res,
// which corrupts Eigen's internals if it comes first.
#include "httplib.h"
#include "json.hpp"

using namespace ltgeo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path dir;
  explicit TempDir(const char* tag) {
    dir = fs::temp_directory_path() /
          (std::string("ltgeo_") + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string str() const { return dir.string(); }
};

std::vector<DailyTempRecord> synth_days(const GeoCoord& c, int n) {
  std::vector<DailyTempRecord> days;
  DateStamp base{2021, 9, 1};
  for (int i = 0; i < n; ++i)
    days.push_back(synth_temp_day(c, add_days(base, i), SynthNoise{0.5, 9}));
  return days;
}

}  // namespace

TEST_CASE("fixture client round-trips written days") {
  TempDir tmp("fixtures");
  GeoCoord a{42.25, -83.50};
  GeoCoord b{30.10, -100.75};
  write_station_fixture(tmp.str(), a, synth_days(a, 3));
  write_station_fixture(tmp.str(), b, synth_days(b, 2));

  FixtureStationClient client(tmp.str());
  auto coords = client.stations();
  REQUIRE(coords.size() == 2);

  auto want = synth_days(a, 3);
  DailyTempRecord got = client.fetch(a, {2021, 9, 2});
  CHECK(got.source == TempSource::station);
  CHECK(got.samples.size() == 24);
  CHECK(got.resolution_min == 60.0);
  REQUIRE(got.coord.has_value());
  CHECK(got.coord->lat == a.lat);
  CHECK((got.samples == want[1].samples).all());

  CHECK_THROWS_AS(client.fetch(a, {2021, 12, 25}), NotAvailableError);
  CHECK_THROWS_AS(client.fetch({45.0, -70.0}, {2021, 9, 2}),
                  NotAvailableError);
}

TEST_CASE("fixture writer validates hourly shape") {
  TempDir tmp("fixbad");
  GeoCoord c{40.0, -90.0};
  DailyTempRecord coarse = synth_temp_day(c, {2021, 9, 1}, SynthNoise{}, 30.0);
  CHECK_THROWS_AS(write_station_fixture(tmp.str(), c, {coarse}), InputError);

  CHECK_THROWS_AS(FixtureStationClient("/nonexistent/dir"),
                  MissingArtifactError);
}

TEST_CASE("fixture parsing rejects bad rows and partial days") {
  TempDir tmp("fixparse");
  GeoCoord c{41.00, -85.00};

  {
    std::ofstream f(tmp.dir / station_fixture_name(c));
    f << "date,hour,temp_c\n";
    for (int h = 0; h < 24; ++h) f << "2021-09-01," << h << ",12.5\n";
    for (int h = 0; h < 23; ++h) f << "2021-09-02," << h << ",13.0\n";
  }
  FixtureStationClient client(tmp.str());
  CHECK(client.fetch(c, {2021, 9, 1}).samples.size() == 24);
  // The 23-hour day is dropped rather than zero-padded.
  CHECK_THROWS_AS(client.fetch(c, {2021, 9, 2}), NotAvailableError);

  GeoCoord bad{42.00, -85.00};
  {
    std::ofstream f(tmp.dir / station_fixture_name(bad));
    f << "date,hour,temp_c\n2021-09-01,zero,12.5\n";
  }
  FixtureStationClient reject(tmp.str());
  CHECK_THROWS_AS(reject.fetch(bad, {2021, 9, 1}), InputError);
}

TEST_CASE("caching client serves repeats without inner calls") {
  TempDir fixtures("cfix");
  TempDir cache("cache");
  GeoCoord a{42.25, -83.50};
  write_station_fixture(fixtures.str(), a, synth_days(a, 2));

  FixtureStationClient inner(fixtures.str());
  CachingStationClient cached(inner, cache.str());

  DailyTempRecord first = cached.fetch(a, {2021, 9, 1});
  CHECK(cached.inner_calls() == 1);
  DailyTempRecord again = cached.fetch(a, {2021, 9, 1});
  CHECK(cached.inner_calls() == 1);
  CHECK((first.samples == again.samples).all());

  // A fresh instance hits the disk cache, not the inner client.
  CachingStationClient cold(inner, cache.str());
  DailyTempRecord from_disk = cold.fetch(a, {2021, 9, 1});
  CHECK(cold.inner_calls() == 0);
  CHECK((from_disk.samples == first.samples).all());
  CHECK(from_disk.coord->lat == first.coord->lat);
  CHECK(from_disk.coord->lon == first.coord->lon);
  CHECK(date_serial(from_disk.date) == date_serial(first.date));

  // Misses are not cached.
  CHECK_THROWS_AS(cold.fetch(a, {2022, 1, 1}), NotAvailableError);
  CHECK(cold.inner_calls() == 1);
}

TEST_CASE("http client fetches, retries, and reports misses") {
  httplib::Server srv;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  srv.Get("/v2.0/history/hourly",
          [&](const httplib::Request& req, httplib::Response& res) {
            hits++;
            if (req.get_param_value("key") != "k123") {
              res.status = 401;
              return;
            }
            if (fail_first.load() > 0) {
              fail_first--;
              res.status = 500;
              return;
            }
            if (req.get_param_value("start_date") != "2021-09-03") {
              res.status = 404;
              return;
            }
            nlohmann::json j;
            j["data"] = nlohmann::json::array();
            for (int h = 0; h < 24; ++h)
              j["data"].push_back({{"hour", h}, {"temp", 10.0 + 0.5 * h}});
            res.set_content(j.dump(), "application/json");
          });
  int port = srv.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  GeoCoord c{40.00, -90.00};
  HttpStationClient client("127.0.0.1", port, "k123", {c}, 3, 0.01);

  hits = 0;
  DailyTempRecord day = client.fetch(c, {2021, 9, 3});
  CHECK(hits.load() == 1);
  CHECK(day.samples.size() == 24);
  CHECK(day.samples[0] == 10.0);
  CHECK(day.samples[23] == 21.5);
  CHECK(day.source == TempSource::station);

  // Two server errors, then success: three attempts total.
  hits = 0;
  fail_first = 2;
  DailyTempRecord retried = client.fetch(c, {2021, 9, 3});
  CHECK(hits.load() == 3);
  CHECK((retried.samples == day.samples).all());

  // Hard 404 is a definitive miss: no retries.
  hits = 0;
  CHECK_THROWS_AS(client.fetch(c, {2021, 9, 4}), NotAvailableError);
  CHECK(hits.load() == 1);

  // Persistent failure exhausts the retry budget.
  hits = 0;
  fail_first = 100;
  CHECK_THROWS_AS(client.fetch(c, {2021, 9, 3}), NotAvailableError);
  CHECK(hits.load() == 3);

  srv.stop();
  server.join();

  // Unreachable endpoint (nothing listening) is NotAvailable too.
  HttpStationClient dead("127.0.0.1", port, "k123", {c}, 2, 0.01);
  CHECK_THROWS_AS(dead.fetch(c, {2021, 9, 3}), NotAvailableError);
}
