#include "ltgeo/daae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ltgeo/checkpoint.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/signal_prep.hpp"

namespace ltgeo {

namespace {

nn::Tensor tensor_of(const Mat& columns) { return nn::from_columns(columns); }

Arr softplus(const Arr& x) {
  return x.max(0.0) + (-x.abs()).exp().unaryExpr(
                          [](double v) { return std::log1p(v); });
}

Arr sigmoid(const Arr& x) { return 1.0 / (1.0 + (-x).exp()); }

void check_training_record(const DailyLightRecord& r, const char* role) {
  validate(r);
  if (r.scale != LightScale::log10)
    throw InputError(std::string("daae ") + role +
                     " record must be log-scale");
  if (r.samples.size() != kDaaeInputLen)
    throw InputError(std::string("daae ") + role + " record has " +
                     std::to_string(r.samples.size()) + " samples, expected " +
                     std::to_string(kDaaeInputLen));
}

}  // namespace

DaaeModel make_daae(std::uint64_t seed) {
  nn::Net enc(combine_seed(seed, 1));
  enc.add_fc(kDaaeInputLen, 200);
  enc.add_relu();
  enc.add_fc(200, 100);
  enc.add_relu();
  enc.add_fc(100, kDaaeLatentDim);

  nn::Net dec(combine_seed(seed, 2));
  dec.add_fc(kDaaeLatentDim, 100);
  dec.add_relu();
  dec.add_fc(100, 200);
  dec.add_relu();
  dec.add_fc(200, kDaaeInputLen);

  nn::Net dis(combine_seed(seed, 3));
  dis.add_fc(kDaaeLatentDim, 500);
  dis.add_relu();
  dis.add_fc(500, 500);
  dis.add_relu();
  dis.add_fc(500, 1);

  return {std::move(enc), std::move(dec), std::move(dis)};
}

Mat reconstruct(const DaaeModel& model, const Mat& log_days) {
  if (log_days.rows() != kDaaeInputLen)
    throw InputError("reconstruct expects " + std::to_string(kDaaeInputLen) +
                     " rows, got " + std::to_string(log_days.rows()));
  nn::Tensor z = model.encoder.infer(tensor_of(log_days));
  nn::Tensor y = model.decoder.infer(z);
  return y.v.array().max(0.0).matrix();
}

Mat encode(const DaaeModel& model, const Mat& log_days) {
  if (log_days.rows() != kDaaeInputLen)
    throw InputError("encode expects " + std::to_string(kDaaeInputLen) +
                     " rows, got " + std::to_string(log_days.rows()));
  return model.encoder.infer(tensor_of(log_days)).v;
}

Vec discriminator_scores(const DaaeModel& model, const Mat& latents) {
  if (latents.rows() != kDaaeLatentDim)
    throw InputError("discriminator_scores expects " +
                     std::to_string(kDaaeLatentDim) + " rows, got " +
                     std::to_string(latents.rows()));
  nn::Tensor logit = model.discriminator.infer(tensor_of(latents));
  return sigmoid(logit.v.row(0).transpose().array()).matrix();
}

DailyLightRecord denoise(const DaaeModel& model, const DailyLightRecord& r) {
  check_training_record(r, "input");
  Mat day = r.samples.matrix();
  Mat out = reconstruct(model, day);
  DailyLightRecord res = r;
  res.samples = out.col(0).array();
  res.denoised = true;
  return res;
}

DailyLightRecord pseudo_clean(const DailyLightRecord& r) {
  check_training_record(r, "sensor");
  const index_t n = r.samples.size();
  Arr med(n);
  std::array<double, 5> w{};
  for (index_t i = 0; i < n; ++i) {
    for (int k = -2; k <= 2; ++k) w[k + 2] = r.samples[(i + k + n) % n];
    std::nth_element(w.begin(), w.begin() + 2, w.end());
    med[i] = w[2];
  }

  const double lo = med.minCoeff();
  const double hi = med.maxCoeff();
  DailyLightRecord out = r;
  out.samples = med;
  if (hi - lo < 1e-6) return out;

  // Monotone clamp over the 90 min after dawn and before dusk: light may
  // only rise leaving dawn and only fall approaching dusk.
  const double thr = lo + 0.25 * (hi - lo);
  NightRun run;
  try {
    run = detect_night_run(out, thr);
  } catch (const NumericalError&) {
    return out;  // no crossings to anchor a twilight fit
  }
  const double res_min = r.resolution_min;
  const index_t span = index_t(std::llround(90.0 / res_min));
  auto idx_of = [&](double minute) {
    index_t i = index_t(std::llround(minute / res_min - 0.5));
    return ((i % n) + n) % n;
  };
  const index_t dawn = idx_of(run.dawn_min);
  const index_t dusk = idx_of(run.dusk_min);
  for (index_t k = 1; k <= span; ++k) {
    index_t i = (dawn + k) % n;
    index_t prev = (i - 1 + n) % n;
    out.samples[i] = std::max(out.samples[i], out.samples[prev]);
  }
  for (index_t k = 1; k <= span; ++k) {
    index_t i = ((dusk - k) % n + n) % n;
    index_t next = (i + 1) % n;
    out.samples[i] = std::max(out.samples[i], out.samples[next]);
  }
  return out;
}

double discriminator_loss(const Vec& d_clean, const Vec& d_noisy) {
  if (d_clean.size() == 0 || d_noisy.size() == 0)
    throw InputError("discriminator_loss: empty score vector");
  auto clamp = [](const Vec& v) {
    return v.array().max(1e-7).min(1.0 - 1e-7);
  };
  return clamp(d_clean).log().mean() + (1.0 - clamp(d_noisy)).log().mean();
}

DaaeModel train_daae(const std::vector<DaaePair>& corpus, int epochs,
                     std::uint64_t seed, const DaaeTrainConfig& cfg) {
  if (corpus.empty()) throw InputError("train_daae: empty corpus");
  if (epochs <= 0) throw InputError("train_daae: epochs must be positive");
  if (cfg.batch_size <= 0)
    throw InputError("train_daae: batch_size must be positive");
  for (const auto& p : corpus) {
    check_training_record(p.noisy, "noisy");
    check_training_record(p.clean, "clean");
    if (date_serial(p.noisy.date) != date_serial(p.clean.date))
      throw InputError("train_daae: pair dates differ");
    if (p.noisy.coord.has_value() != p.clean.coord.has_value() ||
        (p.noisy.coord &&
         coord_distance_deg(*p.noisy.coord, *p.clean.coord) > 1e-9))
      throw InputError("train_daae: pair sites differ");
  }

  DaaeModel m = make_daae(combine_seed(seed, 1));
  std::vector<nn::ParamView> recon_params = m.encoder.params();
  for (auto& pv : m.decoder.params()) recon_params.push_back(pv);
  nn::Adam opt_recon(recon_params, cfg.adam);
  nn::Adam opt_dis(m.discriminator.params(), cfg.adam);
  nn::Adam opt_gen(m.encoder.params(), cfg.adam);

  Rng shuffle_rng(combine_seed(seed, 2));
  const index_t n = index_t(corpus.size());
  std::vector<index_t> order(n);
  for (index_t i = 0; i < n; ++i) order[i] = i;

  std::int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (index_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(std::uint64_t(i) + 1)]);
    for (index_t start = 0; start < n; start += cfg.batch_size) {
      const index_t b = std::min<index_t>(cfg.batch_size, n - start);
      Mat xn(kDaaeInputLen, b), xc(kDaaeInputLen, b);
      for (index_t j = 0; j < b; ++j) {
        const DaaePair& p = corpus[order[start + j]];
        xn.col(j) = p.noisy.samples.matrix();
        xc.col(j) = p.clean.samples.matrix();
      }

      // (a) reconstruction: encoder+decoder descend MSE against clean.
      m.encoder.zero_grad();
      m.decoder.zero_grad();
      nn::Tensor z = m.encoder.forward(tensor_of(xn), true);
      nn::Tensor y = m.decoder.forward(z, true);
      Mat diff = y.v - xc;
      const double recon = diff.squaredNorm() / double(diff.size());
      nn::Tensor gy = y;
      gy.v = diff * (2.0 / double(diff.size()));
      m.encoder.backward(m.decoder.backward(gy));
      opt_recon.step();

      // (b) discriminator ascent on clean-vs-noisy latents (encoder frozen).
      Mat zc = m.encoder.infer(tensor_of(xc)).v;
      Mat zn = m.encoder.infer(tensor_of(xn)).v;
      nn::Tensor zall = nn::Tensor::zeros(kDaaeLatentDim, 1, 2 * b);
      zall.v.leftCols(b) = zc;
      zall.v.rightCols(b) = zn;
      m.discriminator.zero_grad();
      nn::Tensor logit = m.discriminator.forward(zall, true);
      Arr lc = logit.v.row(0).leftCols(b).transpose().array();
      Arr ln = logit.v.row(0).rightCols(b).transpose().array();
      const double dis_loss =
          (-softplus(-lc)).mean() + (-softplus(ln)).mean();
      nn::Tensor glogit = logit;
      glogit.v.row(0).leftCols(b) =
          ((sigmoid(lc) - 1.0) / double(b)).matrix().transpose();
      glogit.v.row(0).rightCols(b) =
          (sigmoid(ln) / double(b)).matrix().transpose();
      m.discriminator.backward(glogit);
      opt_dis.step();

      // (c) encoder descends the non-saturating generator loss on noisy
      // latents; discriminator gradients accrued here are cleared in (b).
      m.encoder.zero_grad();
      nn::Tensor z2 = m.encoder.forward(tensor_of(xn), true);
      nn::Tensor l2 = m.discriminator.forward(z2, true);
      Arr lg = l2.v.row(0).transpose().array();
      const double gen_loss = softplus(-lg).mean();
      nn::Tensor gl = l2;
      gl.v.row(0) = ((sigmoid(lg) - 1.0) * (cfg.adv_weight / double(b)))
                        .matrix()
                        .transpose();
      m.encoder.backward(m.discriminator.backward(gl));
      opt_gen.step();

      ++step;
      if (!std::isfinite(recon) || !std::isfinite(dis_loss) ||
          !std::isfinite(gen_loss))
        throw NumericalError("train_daae diverged at step " +
                             std::to_string(step) + " (recon=" +
                             std::to_string(recon) + ")");
    }
  }
  return m;
}

void save_daae(const std::string& dir, DaaeModel& model) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir + "/daae_encoder.bin", snapshot(model.encoder));
  save_checkpoint(dir + "/daae_decoder.bin", snapshot(model.decoder));
  save_checkpoint(dir + "/daae_discriminator.bin",
                  snapshot(model.discriminator));
}

DaaeModel load_daae(const std::string& dir) {
  return {restore_net(load_checkpoint(dir + "/daae_encoder.bin")),
          restore_net(load_checkpoint(dir + "/daae_decoder.bin")),
          restore_net(load_checkpoint(dir + "/daae_discriminator.bin"))};
}

}  // namespace ltgeo
