#include "ltgeo/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <utility>

#include "ltgeo/astro.hpp"
#include "ltgeo/checkpoint.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/signal_prep.hpp"

namespace ltgeo {

namespace {

void check_window(const SiameseModel& model, const AlignedWindow& w) {
  if (w.samples.size() != model.window_len)
    throw InputError("window length " + std::to_string(w.samples.size()) +
                     " does not match the model's " +
                     std::to_string(model.window_len));
  if (std::abs(w.resolution_min - model.resolution_min) > 1e-9)
    throw InputError("window resolution does not match the model");
}

// Windows enter the conv trunk as one single-channel sequence per sample:
// column j of `windows` becomes the j-th length-long block of the row.
nn::Tensor window_tensor(const Mat& windows) {
  nn::Tensor t;
  t.channels = 1;
  t.length = windows.rows();
  t.batch = windows.cols();
  t.v = Mat(1, t.length * t.batch);
  for (index_t j = 0; j < t.batch; ++j)
    t.v.middleCols(j * t.length, t.length) = windows.col(j).transpose();
  return t;
}

// Two records landing in the same positive cell, strict per-axis rule.
bool positive_coords(const GeoCoord& a, const GeoCoord& b, double axis_deg) {
  return std::abs(a.lat - b.lat) < axis_deg &&
         std::abs(a.lon - b.lon) < axis_deg;
}

struct BucketIndex {
  double cell = 0.5;
  std::map<std::pair<int, int>, std::vector<std::int32_t>> cells;

  static std::pair<int, int> key_of(const GeoCoord& c, double cell) {
    return {int(std::floor(c.lat / cell)), int(std::floor(c.lon / cell))};
  }
  void add(const GeoCoord& c, std::int32_t i) {
    cells[key_of(c, cell)].push_back(i);
  }
  // Indices in the 3x3 bucket neighborhood of c.
  template <class Fn>
  void scan(const GeoCoord& c, Fn&& fn) const {
    const auto k = key_of(c, cell);
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        auto it = cells.find({k.first + dr, k.second + dc});
        if (it == cells.end()) continue;
        for (std::int32_t i : it->second) fn(i);
      }
  }
};

TrainingPair make_pair_from(const DailyLightRecord& ref, double ref_center,
                            const DailyLightRecord& tgt,
                            nn::PairLabel label) {
  TrainingPair p;
  p.ref_window = time_shift(ref, ref_center);
  p.tgt_window = time_shift(tgt, ref_center);
  p.label = label;
  p.ref_coord = *ref.coord;
  p.tgt_coord = *tgt.coord;
  p.ref_date = ref.date;
  p.tgt_date = tgt.date;
  return p;
}

bool year_rule_ok(const DateStamp& a, const DateStamp& b, bool cross_year) {
  return !cross_year || a.year != b.year;
}

double pair_distance(const SiameseModel& model, const TrainingPair& p) {
  return similarity(model, p.ref_window, p.tgt_window);
}

}  // namespace

SiameseModel make_light_model(std::uint64_t seed) {
  SiameseModel m;
  m.modality = Modality::light;
  m.resolution_min = kLightResolutionMin;
  m.window_len = kLightWindowLen;
  m.embedding_dim = 64;
  m.net = nn::Net(seed);
  m.net.add_conv(1, 128, 9);
  m.net.add_batchnorm(128);
  m.net.add_relu();
  m.net.add_maxpool(2);  // 361 -> 180
  for (int block = 0; block < 3; ++block) {
    m.net.add_conv(128, 128, 5);
    m.net.add_batchnorm(128);
    m.net.add_relu();
    m.net.add_maxpool(2);  // 180 -> 90 -> 45 -> 22
  }
  m.net.add_fc(128 * 22, 512);
  m.net.add_relu();
  m.net.add_dropout(0.30);
  m.net.add_fc(512, 64);
  return m;
}

SiameseModel make_temp_model(std::uint64_t seed) {
  SiameseModel m;
  m.modality = Modality::temperature;
  m.resolution_min = kTempResolutionMin;
  m.window_len = kTempWindowLen;
  m.embedding_dim = 32;
  m.net = nn::Net(seed);
  m.net.add_conv(1, 32, 3);
  m.net.add_batchnorm(32);
  m.net.add_relu();
  m.net.add_maxpool(2);  // 19 -> 9
  m.net.add_conv(32, 32, 3);
  m.net.add_batchnorm(32);
  m.net.add_relu();
  m.net.add_maxpool(2);  // 9 -> 4
  m.net.add_fc(32 * 4, 64);
  m.net.add_relu();
  m.net.add_dropout(0.30);
  m.net.add_fc(64, 32);
  return m;
}

Vec embed(const SiameseModel& model, const AlignedWindow& w) {
  check_window(model, w);
  const nn::Tensor out = model.net.infer(window_tensor(w.samples.matrix()));
  return out.v.col(0);
}

Mat embed_columns(const SiameseModel& model, const Mat& windows) {
  if (windows.rows() != model.window_len)
    throw InputError("window length does not match the model");
  if (windows.cols() == 0) throw InputError("no windows to embed");
  return model.net.infer(window_tensor(windows)).v;
}

double similarity(const SiameseModel& model, const AlignedWindow& a,
                  const AlignedWindow& b) {
  // One window per pass: the distance is then exactly zero for identical
  // windows and exactly symmetric, independent of batch packing.
  return (embed(model, a) - embed(model, b)).norm();
}

Vec spatial_softmax(const Vec& scores, double sigma) {
  if (scores.size() == 0) throw InputError("spatial softmax of no scores");
  if (!(sigma > 0.0)) throw InputError("spatial softmax needs sigma > 0");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  Vec z(scores.size());
  double zmax = -std::numeric_limits<double>::infinity();
  for (index_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (std::isnan(s)) throw InputError("spatial softmax saw a NaN score");
    z[i] = std::isinf(s) ? -std::numeric_limits<double>::infinity()
                         : -s * s * inv;
    zmax = std::max(zmax, z[i]);
  }
  if (std::isinf(zmax))
    throw NumericalError("spatial softmax: every score is infinite");
  Vec p = (z.array() - zmax).exp().matrix();
  return p / p.sum();
}

std::vector<TrainingPair> make_light_pairs(const ReferenceLibrary& lib,
                                           const PairPolicy& policy,
                                           std::size_t count,
                                           std::uint64_t seed) {
  const auto& recs = lib.light_records;
  if (recs.size() < 2)
    throw InputError("pair sampling needs at least two light records");
  if (policy.window_days < 0 || !(policy.positive_axis_deg > 0.0))
    throw InputError("invalid pair policy");

  BucketIndex buckets;
  buckets.cell = policy.positive_axis_deg;
  for (std::size_t i = 0; i < recs.size(); ++i)
    buckets.add(*recs[i].coord, std::int32_t(i));

  std::vector<std::pair<std::int32_t, std::int32_t>> positives;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    buckets.scan(*recs[i].coord, [&](std::int32_t j) {
      if (j <= std::int32_t(i)) return;
      const auto& a = recs[i];
      const auto& b = recs[std::size_t(j)];
      if (!positive_coords(*a.coord, *b.coord, policy.positive_axis_deg))
        return;
      if (doy_distance(a.date, b.date) > policy.window_days) return;
      if (!year_rule_ok(a.date, b.date, policy.cross_year)) return;
      positives.emplace_back(std::int32_t(i), j);
    });
  }
  if (positives.empty())
    throw InputError("no eligible positive light pairs");

  Rng rng(combine_seed(seed, 0x70617273));
  std::vector<TrainingPair> out;
  out.reserve(count);
  std::size_t stuck = 0;
  while (out.size() < count) {
    const bool want_positive = out.size() % 2 == 0;
    std::int32_t i = -1, j = -1;
    if (want_positive) {
      const auto& pr = positives[rng.below(positives.size())];
      i = pr.first;
      j = pr.second;
      if (rng.bernoulli(0.5)) std::swap(i, j);
    } else {
      i = std::int32_t(rng.below(recs.size()));
      j = std::int32_t(rng.below(recs.size()));
      const auto& a = recs[std::size_t(i)];
      const auto& b = recs[std::size_t(j)];
      const bool ok =
          i != j &&
          doy_distance(a.date, b.date) <= policy.window_days &&
          year_rule_ok(a.date, b.date, policy.cross_year) &&
          !positive_coords(*a.coord, *b.coord, policy.positive_axis_deg);
      if (!ok) {
        if (++stuck > 200000 + 1000 * count)
          throw InputError("no eligible negative light pairs");
        continue;
      }
    }
    out.push_back(make_pair_from(
        recs[std::size_t(i)], lib.night_centers[std::size_t(i)],
        recs[std::size_t(j)],
        want_positive ? nn::PairLabel::positive : nn::PairLabel::negative));
  }
  return out;
}

std::vector<TrainingPair> make_temp_pairs(
    const ReferenceLibrary& temp_lib,
    const std::vector<DailyTempRecord>& sensor_days, const PairPolicy& policy,
    std::size_t count, std::uint64_t seed) {
  if (policy.window_days < 0 || !(policy.positive_axis_deg > 0.0))
    throw InputError("invalid pair policy");
  std::vector<std::int32_t> stations;
  for (std::size_t i = 0; i < temp_lib.temp_entries.size(); ++i)
    if (temp_lib.temp_entries[i].provenance == Provenance::measured)
      stations.push_back(std::int32_t(i));
  if (stations.empty())
    throw InputError("temperature pairing needs station-provenance entries");
  if (sensor_days.empty())
    throw InputError("temperature pairing needs sensor records");
  for (const auto& day : sensor_days) {
    validate(day);
    if (!day.coord) throw InputError("sensor temp records need coordinates");
  }

  auto eligible = [&](const TempEntry& ref, const DailyTempRecord& tgt) {
    return doy_distance(ref.date, tgt.date) <= policy.window_days &&
           year_rule_ok(ref.date, tgt.date, policy.cross_year);
  };

  BucketIndex buckets;
  buckets.cell = policy.positive_axis_deg;
  for (std::int32_t si : stations)
    buckets.add(temp_lib.temp_entries[std::size_t(si)].coord, si);

  std::vector<std::pair<std::int32_t, std::int32_t>> positives;
  for (std::size_t t = 0; t < sensor_days.size(); ++t) {
    buckets.scan(*sensor_days[t].coord, [&](std::int32_t si) {
      const TempEntry& e = temp_lib.temp_entries[std::size_t(si)];
      if (eligible(e, sensor_days[t]) &&
          positive_coords(e.coord, *sensor_days[t].coord,
                          policy.positive_axis_deg))
        positives.emplace_back(si, std::int32_t(t));
    });
  }
  if (positives.empty())
    throw InputError("no eligible positive temperature pairs");

  Rng rng(combine_seed(seed, 0x74656d70));
  std::vector<TrainingPair> out;
  out.reserve(count);
  std::size_t stuck = 0;
  while (out.size() < count) {
    const bool want_positive = out.size() % 2 == 0;
    std::int32_t si = -1, ti = -1;
    if (want_positive) {
      const auto& pr = positives[rng.below(positives.size())];
      si = pr.first;
      ti = pr.second;
    } else {
      si = stations[rng.below(stations.size())];
      ti = std::int32_t(rng.below(sensor_days.size()));
      const TempEntry& e = temp_lib.temp_entries[std::size_t(si)];
      const auto& tgt = sensor_days[std::size_t(ti)];
      const bool ok = eligible(e, tgt) &&
                      !positive_coords(e.coord, *tgt.coord,
                                       policy.positive_axis_deg);
      if (!ok) {
        if (++stuck > 200000 + 1000 * count)
          throw InputError("no eligible negative temperature pairs");
        continue;
      }
    }
    const TempEntry& e = temp_lib.temp_entries[std::size_t(si)];
    const auto& tgt = sensor_days[std::size_t(ti)];
    // Inference computes N_T at the reference coordinate for the target's
    // date; training mirrors that.
    const double center = night_center_astro(e.coord, tgt.date);
    TrainingPair p;
    p.ref_window = time_shift(e.record, center);
    p.tgt_window = time_shift(tgt, center);
    p.label = want_positive ? nn::PairLabel::positive
                            : nn::PairLabel::negative;
    p.ref_coord = e.coord;
    p.tgt_coord = *tgt.coord;
    p.ref_date = e.date;
    p.tgt_date = tgt.date;
    out.push_back(std::move(p));
  }
  return out;
}

double calibrate_sigma(SiameseModel& model,
                       const std::vector<TrainingPair>& pairs) {
  std::vector<double> scores;
  for (const TrainingPair& p : pairs)
    if (p.label == nn::PairLabel::positive)
      scores.push_back(pair_distance(model, p));
  if (scores.size() < 30)
    throw InputError("sigma calibration needs at least 30 positive pairs, have " +
                     std::to_string(scores.size()));
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi)
    throw NumericalError("sigma calibration degenerate: all scores equal");
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= double(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  const double sigma = std::sqrt(ss / double(scores.size() - 1));
  if (!(sigma > 0.0))
    throw NumericalError("sigma calibration degenerate: all scores equal");
  model.sigma = sigma;
  return sigma;
}

std::vector<double> train_siamese(SiameseModel& model,
                                  const std::vector<TrainingPair>& pairs,
                                  int epochs, std::uint64_t seed,
                                  const nn::AdamConfig& adam,
                                  int batch_pairs) {
  if (pairs.empty()) throw InputError("no training pairs");
  if (epochs < 1) throw InputError("epochs must be >= 1");
  if (batch_pairs < 1) throw InputError("batch size must be >= 1");
  for (const TrainingPair& p : pairs) {
    check_window(model, p.ref_window);
    check_window(model, p.tgt_window);
  }

  nn::Adam opt(model.net.params(), adam);
  Rng shuffle_rng(combine_seed(seed, 0x736d7578));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_loss;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double total = 0.0;
    for (std::size_t at = 0; at < order.size(); at += std::size_t(batch_pairs)) {
      const std::size_t b =
          std::min(std::size_t(batch_pairs), order.size() - at);
      Mat cols(model.window_len, index_t(2 * b));
      for (std::size_t k = 0; k < b; ++k) {
        const TrainingPair& p = pairs[order[at + k]];
        cols.col(index_t(k)) = p.ref_window.samples.matrix();
        cols.col(index_t(b + k)) = p.tgt_window.samples.matrix();
      }
      nn::Tensor out = model.net.forward(window_tensor(cols), true);
      nn::Tensor gy = nn::Tensor::zeros(out.channels, out.length, out.batch);

      for (std::size_t k = 0; k < b; ++k) {
        const TrainingPair& p = pairs[order[at + k]];
        const Vec diff = out.v.col(index_t(k)) - out.v.col(index_t(b + k));
        const double d = diff.norm();
        const nn::ScalarLoss l = nn::contrastive_loss(d, p.label, model.margin);
        total += l.loss;
        if (l.ddist != 0.0 && d > 1e-12) {
          const Vec g = (l.ddist / (d * double(b))) * diff;
          gy.v.col(index_t(k)) += g;
          gy.v.col(index_t(b + k)) -= g;
        }
      }
      model.net.backward(gy);
      opt.step();
      opt.zero_grad();
      ++step;
    }
    const double mean_loss = total / double(order.size());
    if (!std::isfinite(mean_loss))
      throw NumericalError("contrastive training diverged at epoch " +
                           std::to_string(epoch));
    epoch_loss.push_back(mean_loss);
  }

  calibrate_sigma(model, pairs);
  return epoch_loss;
}

void save_siamese(const std::string& dir, const std::string& name,
                  SiameseModel& model) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const NetCheckpoint c = snapshot(model.net);
  save_checkpoint((fs::path(dir) / (name + ".bin")).string(), c);
  nlohmann::json side;
  side["modality"] =
      model.modality == Modality::light ? "light" : "temperature";
  side["sigma"] = model.sigma;
  side["margin"] = model.margin;
  side["resolution_min"] = model.resolution_min;
  side["window_len"] = model.window_len;
  side["embedding_dim"] = model.embedding_dim;
  write_json_file((fs::path(dir) / (name + ".json")).string(), side);
}

SiameseModel load_siamese(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  const NetCheckpoint c =
      load_checkpoint((fs::path(dir) / (name + ".bin")).string());
  const nlohmann::json side =
      read_json_file((fs::path(dir) / (name + ".json")).string());
  SiameseModel m;
  try {
    m.modality = side.at("modality").get<std::string>() == "light"
                     ? Modality::light
                     : Modality::temperature;
    m.sigma = side.at("sigma").get<double>();
    m.margin = side.at("margin").get<double>();
    m.resolution_min = side.at("resolution_min").get<double>();
    m.window_len = side.at("window_len").get<int>();
    m.embedding_dim = side.at("embedding_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad model sidecar: ") + e.what());
  }
  m.net = restore_net(c);
  return m;
}

}  // namespace ltgeo
