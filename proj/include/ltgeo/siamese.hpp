#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltgeo/nn.hpp"
#include "ltgeo/records.hpp"
#include "ltgeo/reflib.hpp"

namespace ltgeo {

// Twin-network embedding model for one modality. The net maps an aligned
// window to an embedding; similarity is the L2 distance between embeddings
// (smaller = more similar). sigma is calibrated after training and feeds the
// spatial softmax.
struct SiameseModel {
  Modality modality = Modality::light;
  nn::Net net{0};
  double sigma = 0.0;
  double margin = 1.0;
  double resolution_min = kLightResolutionMin;
  int window_len = kLightWindowLen;
  int embedding_dim = 64;
};

// Published architectures. Light: four conv+batchnorm+ReLU+maxpool blocks
// (first kernel 128x1x9, rest 128x1x5) then FC 2816->512, ReLU, dropout
// 0.30, FC 512->64. Temperature: two 32x1x3 blocks then FC 128->64, ReLU,
// dropout 0.30, FC 64->32.
SiameseModel make_light_model(std::uint64_t seed);
SiameseModel make_temp_model(std::uint64_t seed);

// Eval-mode embedding; deterministic, safe to call concurrently on a frozen
// model. The window must match the model's resolution and length.
Vec embed(const SiameseModel& model, const AlignedWindow& w);

// Batched eval-mode embeddings: one window per column in, one embedding per
// column out.
Mat embed_columns(const SiameseModel& model, const Mat& windows);

// L2 embedding distance.
double similarity(const SiameseModel& model, const AlignedWindow& a,
                  const AlignedWindow& b);

// p_i = exp(-phi_i^2 / 2 sigma^2) / sum_j, computed with max subtraction.
// Infinite scores get zero mass; all-infinite input is an error.
Vec spatial_softmax(const Vec& scores, double sigma);

// One contrastive example. Both windows are aligned to the reference
// record's night center, mirroring inference.
struct TrainingPair {
  AlignedWindow ref_window;
  AlignedWindow tgt_window;
  nn::PairLabel label = nn::PairLabel::negative;
  GeoCoord ref_coord, tgt_coord;
  DateStamp ref_date, tgt_date;
};

// Pair construction rules. Positive = both axes strictly within
// positive_axis_deg; the date window is wrap-safe day-of-year distance;
// cross_year demands different calendar years (the light rule).
struct PairPolicy {
  int window_days = 5;
  double positive_axis_deg = 0.5;
  bool cross_year = true;
};

// Balanced 50/50 positive/negative pair stream over the measured light
// records of the library, deterministic under seed. Throws when either
// class has no eligible pairs.
std::vector<TrainingPair> make_light_pairs(const ReferenceLibrary& lib,
                                           const PairPolicy& policy,
                                           std::size_t count,
                                           std::uint64_t seed);

// Temperature pairs pit one station-provenance reference entry against one
// sensor record; alignment center is the astronomical night center at the
// reference coordinate on the target's date, mirroring inference.
std::vector<TrainingPair> make_temp_pairs(
    const ReferenceLibrary& temp_lib,
    const std::vector<DailyTempRecord>& sensor_days, const PairPolicy& policy,
    std::size_t count, std::uint64_t seed);

// sigma = sample standard deviation of eval-mode similarity scores over the
// positive pairs (>= 30 required); stored in the model and returned.
// A zero deviation (embedding collapse) is an error.
double calibrate_sigma(SiameseModel& model,
                       const std::vector<TrainingPair>& pairs);

// Contrastive training: each batch runs both pair sides through one shared
// forward, applies Eq-style loss on embedding distances, and steps Adam.
// Returns per-epoch mean loss; calibrates sigma afterwards.
std::vector<double> train_siamese(SiameseModel& model,
                                  const std::vector<TrainingPair>& pairs,
                                  int epochs, std::uint64_t seed,
                                  const nn::AdamConfig& adam = {},
                                  int batch_pairs = 16);

// Checkpoint + JSON sidecar (sigma, margin, fingerprint) under
// <dir>/<name>.bin and <dir>/<name>.json.
void save_siamese(const std::string& dir, const std::string& name,
                  SiameseModel& model);
SiameseModel load_siamese(const std::string& dir, const std::string& name);

}  // namespace ltgeo
