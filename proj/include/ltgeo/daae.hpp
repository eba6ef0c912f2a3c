#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltgeo/nn.hpp"
#include "ltgeo/records.hpp"

namespace ltgeo {

inline constexpr int kDaaeInputLen = 480;
inline constexpr int kDaaeLatentDim = 50;

// Denoising adversarial autoencoder over full-day log light records. The
// encoder/decoder pair reconstructs the clean day from a noisy one; the
// discriminator scores latent codes and pushes noisy codes toward the clean
// latent distribution.
struct DaaeModel {
  nn::Net encoder;        // fc 480-200-100-50, relu between
  nn::Net decoder;        // fc 50-100-200-480, relu between
  nn::Net discriminator;  // fc 50-500-500-1 logit; sigmoid lives in the loss
};

DaaeModel make_daae(std::uint64_t seed);

// Decoder(encoder(days)) for a batch of 480-sample log days, one day per
// column. Output is clamped at 0, the log floor of the light transform.
Mat reconstruct(const DaaeModel& model, const Mat& log_days);

// Runs one record through the frozen model. Metadata is preserved and the
// denoised flag set. Requires a log-scale 480-sample record.
DailyLightRecord denoise(const DaaeModel& model, const DailyLightRecord& r);

// Best-effort clean target for sensor days, where no noise-free twin exists:
// circular median filter (width 5) plus a monotone clamp on the twilight
// flanks, so cloud dropouts near dusk/dawn cannot masquerade as night.
// Synthetic days should pair with their zero-noise twin instead.
DailyLightRecord pseudo_clean(const DailyLightRecord& r);

// Mean log score on clean days plus mean log complement on noisy days,
// scores clamped to (0, 1). The discriminator ascends this; 0 is the ceiling.
double discriminator_loss(const Vec& d_clean, const Vec& d_noisy);

// Discriminator probabilities for a batch of latent codes (one per column).
Vec discriminator_scores(const DaaeModel& model, const Mat& latents);

// Latent codes for a batch of log days (one per column).
Mat encode(const DaaeModel& model, const Mat& log_days);

struct DaaePair {
  DailyLightRecord noisy;
  DailyLightRecord clean;  // same site and date
};

// The shared 1000-step lr decay stalls the autoencoder well short of halving
// the noise error; stretching the cadence to 3000 steps (same lr and gamma)
// reaches it with the discriminator still near chance on held-out codes.
inline nn::AdamConfig daae_adam_defaults() {
  nn::AdamConfig a;
  a.step_size = 3000;
  return a;
}

struct DaaeTrainConfig {
  int batch_size = 32;
  nn::AdamConfig adam = daae_adam_defaults();
  double adv_weight = 1.0;  // scale of the encoder's adversarial update
};

// Per-batch update order: reconstruction (encoder+decoder on MSE against the
// clean twin), discriminator ascent on clean-vs-noisy latents, then the
// encoder's non-saturating adversarial descent. Deterministic in (corpus
// order, epochs, seed).
DaaeModel train_daae(const std::vector<DaaePair>& corpus, int epochs,
                     std::uint64_t seed, const DaaeTrainConfig& cfg = {});

void save_daae(const std::string& dir, DaaeModel& model);
DaaeModel load_daae(const std::string& dir);

}  // namespace ltgeo
