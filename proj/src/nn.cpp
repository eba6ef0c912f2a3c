#include "ltgeo/nn.hpp"

#include <cmath>

#include "ltgeo/errors.hpp"

namespace ltgeo::nn {

Tensor Tensor::zeros(index_t channels, index_t length, index_t batch) {
  Tensor t;
  t.channels = channels;
  t.length = length;
  t.batch = batch;
  t.v = Mat::Zero(channels, batch * length);
  return t;
}

Tensor from_columns(const Mat& m) {
  Tensor t;
  t.channels = m.rows();
  t.length = 1;
  t.batch = m.cols();
  t.v = m;
  return t;
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::fc: return "fc";
    case LayerKind::dropout: return "dropout";
  }
  throw InputError("unknown layer kind");
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "conv1d") return LayerKind::conv1d;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "relu") return LayerKind::relu;
  if (s == "maxpool") return LayerKind::maxpool;
  if (s == "fc") return LayerKind::fc;
  if (s == "dropout") return LayerKind::dropout;
  throw InputError("unknown layer kind: " + s);
}

namespace {

void kaiming_uniform(Mat& w, index_t fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / double(fan_in));
  for (index_t j = 0; j < w.cols(); ++j)
    for (index_t i = 0; i < w.rows(); ++i)
      w(i, j) = rng.uniform(-bound, bound);
}

void bias_uniform(Mat& b, index_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(double(fan_in));
  for (index_t i = 0; i < b.rows(); ++i) b(i, 0) = rng.uniform(-bound, bound);
}

class Conv1d final : public Layer {
 public:
  Conv1d(index_t in_ch, index_t out_ch, index_t kernel, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel) {
    if (in_ch <= 0 || out_ch <= 0) throw InputError("conv channels must be positive");
    if (kernel <= 0 || kernel % 2 == 0)
      throw InputError("conv kernel must be odd so the length is preserved");
    w_ = Mat(out_ch_, in_ch_ * k_);
    b_ = Mat::Zero(out_ch_, 1);
    kaiming_uniform(w_, in_ch_ * k_, rng);
    bias_uniform(b_, in_ch_ * k_, rng);
    gw_ = Mat::Zero(w_.rows(), w_.cols());
    gb_ = Mat::Zero(b_.rows(), 1);
  }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    run(x, /*cache=*/true);
    return out_;
  }

  Tensor infer(const Tensor& x) const override {
    Mat col = im2col(x);
    Tensor y = Tensor::zeros(out_ch_, x.length, x.batch);
    y.v.noalias() = w_ * col;
    y.v.colwise() += b_.col(0);
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    gw_.noalias() += gy.v * col_.transpose();
    gb_.col(0) += gy.v.rowwise().sum();
    Mat dcol = w_.transpose() * gy.v;
    Tensor gx = Tensor::zeros(in_ch_, in_len_, gy.batch);
    index_t pad = (k_ - 1) / 2;
    for (index_t s = 0; s < gy.batch; ++s) {
      auto dst = gx.v.middleCols(s * in_len_, in_len_);
      auto src = dcol.middleCols(s * in_len_, in_len_);
      for (index_t ci = 0; ci < in_ch_; ++ci)
        for (index_t k = 0; k < k_; ++k) {
          index_t row = ci * k_ + k;
          for (index_t l = 0; l < in_len_; ++l) {
            index_t p = l + k - pad;
            if (p >= 0 && p < in_len_) dst(ci, p) += src(row, l);
          }
        }
    }
    return gx;
  }

  std::vector<ParamView> params() override {
    return {{&w_, &gw_, "conv.w"}, {&b_, &gb_, "conv.b"}};
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.in_ch = in_ch_;
    s.out_ch = out_ch_;
    s.kernel = k_;
    return s;
  }

 private:
  Mat im2col(const Tensor& x) const {
    if (x.channels != in_ch_)
      throw InputError("conv input has wrong channel count");
    index_t pad = (k_ - 1) / 2;
    Mat col = Mat::Zero(in_ch_ * k_, x.cols());
    for (index_t s = 0; s < x.batch; ++s) {
      auto xin = x.v.middleCols(s * x.length, x.length);
      auto cout = col.middleCols(s * x.length, x.length);
      for (index_t ci = 0; ci < in_ch_; ++ci)
        for (index_t k = 0; k < k_; ++k) {
          index_t row = ci * k_ + k;
          for (index_t l = 0; l < x.length; ++l) {
            index_t p = l + k - pad;
            if (p >= 0 && p < x.length) cout(row, l) = xin(ci, p);
          }
        }
    }
    return col;
  }

  void run(const Tensor& x, bool cache) {
    Mat col = im2col(x);
    out_ = Tensor::zeros(out_ch_, x.length, x.batch);
    out_.v.noalias() = w_ * col;
    out_.v.colwise() += b_.col(0);
    if (cache) {
      col_ = std::move(col);
      in_len_ = x.length;
    }
  }

  index_t in_ch_, out_ch_, k_;
  Mat w_, b_, gw_, gb_;
  Mat col_;
  index_t in_len_ = 0;
  Tensor out_;
};

class BatchNorm1d final : public Layer {
 public:
  BatchNorm1d(index_t ch, Rng&) : ch_(ch) {
    if (ch <= 0) throw InputError("batchnorm channels must be positive");
    gamma_ = Mat::Ones(ch, 1);
    beta_ = Mat::Zero(ch, 1);
    ggamma_ = Mat::Zero(ch, 1);
    gbeta_ = Mat::Zero(ch, 1);
    run_mean_ = Mat::Zero(ch, 1);
    run_var_ = Mat::Ones(ch, 1);
  }

  Tensor forward(const Tensor& x, bool train, Rng&) override {
    check(x);
    Tensor y = x;
    if (train) {
      index_t m = x.cols();
      if (m < 2)
        throw InputError("batchnorm training needs at least two positions");
      Vec mu = x.v.rowwise().mean();
      Mat centered = x.v.colwise() - mu;
      Vec var = centered.array().square().rowwise().mean();
      invstd_ = (var.array() + kEps).sqrt().inverse();
      xhat_ = centered.array().colwise() * invstd_.array();
      y.v = (xhat_.array().colwise() * gamma_.col(0).array()).colwise() +
            beta_.col(0).array();
      double unbias = double(m) / double(m - 1);
      run_mean_.col(0) = 0.9 * run_mean_.col(0) + 0.1 * mu;
      run_var_.col(0) = 0.9 * run_var_.col(0) + 0.1 * unbias * var;
      train_mode_ = true;
    } else {
      invstd_ = (run_var_.col(0).array() + kEps).sqrt().inverse();
      xhat_ = (x.v.colwise() - run_mean_.col(0)).array().colwise() *
              invstd_.array();
      y.v = (xhat_.array().colwise() * gamma_.col(0).array()).colwise() +
            beta_.col(0).array();
      train_mode_ = false;
    }
    return y;
  }

  Tensor infer(const Tensor& x) const override {
    check(x);
    Tensor y = x;
    Arr inv = (run_var_.col(0).array() + kEps).sqrt().inverse();
    Mat xh = (x.v.colwise() - run_mean_.col(0)).array().colwise() * inv;
    y.v = (xh.array().colwise() * gamma_.col(0).array()).colwise() +
          beta_.col(0).array();
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    index_t m = gy.cols();
    ggamma_.col(0) += (gy.v.array() * xhat_.array()).rowwise().sum().matrix();
    gbeta_.col(0) += gy.v.rowwise().sum();
    Tensor gx = gy;
    Mat dxhat = gy.v.array().colwise() * gamma_.col(0).array();
    if (!train_mode_) {
      gx.v = dxhat.array().colwise() * invstd_.array();
      return gx;
    }
    Vec sum_d = dxhat.rowwise().sum();
    Vec sum_dx = (dxhat.array() * xhat_.array()).rowwise().sum();
    Mat t = (double(m) * dxhat).colwise() - sum_d;
    t.array() -= xhat_.array().colwise() * sum_dx.array();
    gx.v = t.array().colwise() * (invstd_.array() / double(m));
    return gx;
  }

  std::vector<ParamView> params() override {
    return {{&gamma_, &ggamma_, "bn.gamma"}, {&beta_, &gbeta_, "bn.beta"}};
  }

  std::vector<ParamView> buffers() override {
    return {{&run_mean_, nullptr, "bn.run_mean"},
            {&run_var_, nullptr, "bn.run_var"}};
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.in_ch = ch_;
    s.out_ch = ch_;
    return s;
  }

 private:
  void check(const Tensor& x) const {
    if (x.channels != ch_) throw InputError("batchnorm channel mismatch");
  }

  static constexpr double kEps = 1e-5;
  index_t ch_;
  Mat gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
  Arr invstd_;
  Mat xhat_;
  bool train_mode_ = false;
};

class ReLU final : public Layer {
 public:
  explicit ReLU(Rng&) {}

  Tensor forward(const Tensor& x, bool, Rng&) override {
    mask_ = (x.v.array() > 0.0).cast<double>();
    Tensor y = x;
    y.v = x.v.array() * mask_.array();
    return y;
  }

  Tensor infer(const Tensor& x) const override {
    Tensor y = x;
    y.v = x.v.cwiseMax(0.0);
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    Tensor gx = gy;
    gx.v = gy.v.array() * mask_.array();
    return gx;
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
  }

 private:
  Mat mask_;
};

class MaxPool1d final : public Layer {
 public:
  MaxPool1d(index_t width, Rng&) : w_(width) {
    if (width < 2) throw InputError("pool width must be at least 2");
  }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    Tensor y = pool(x, &argmax_);
    in_len_ = x.length;
    in_batch_ = x.batch;
    return y;
  }

  Tensor infer(const Tensor& x) const override { return pool(x, nullptr); }

  Tensor backward(const Tensor& gy) override {
    Tensor gx = Tensor::zeros(gy.channels, in_len_, in_batch_);
    for (index_t c = 0; c < gy.channels; ++c)
      for (index_t j = 0; j < gy.cols(); ++j)
        gx.v(c, argmax_(c, j)) += gy.v(c, j);
    return gx;
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.width = w_;
    return s;
  }

 private:
  Tensor pool(const Tensor& x, MatX<index_t>* argmax) const {
    index_t out_len = x.length / w_;  // trailing remainder is dropped
    if (out_len < 1) throw InputError("pool input shorter than its width");
    Tensor y = Tensor::zeros(x.channels, out_len, x.batch);
    if (argmax) argmax->resize(x.channels, x.batch * out_len);
    for (index_t s = 0; s < x.batch; ++s)
      for (index_t l = 0; l < out_len; ++l) {
        index_t in0 = s * x.length + l * w_;
        index_t out0 = s * out_len + l;
        for (index_t c = 0; c < x.channels; ++c) {
          index_t best = in0;
          double bv = x.v(c, in0);
          for (index_t k = 1; k < w_; ++k)
            if (x.v(c, in0 + k) > bv) {
              bv = x.v(c, in0 + k);
              best = in0 + k;
            }
          y.v(c, out0) = bv;
          if (argmax) (*argmax)(c, out0) = best;
        }
      }
    return y;
  }

  index_t w_;
  MatX<index_t> argmax_;
  index_t in_len_ = 0, in_batch_ = 0;
};

class FC final : public Layer {
 public:
  FC(index_t in_features, index_t out_features, Rng& rng)
      : in_(in_features), out_(out_features) {
    if (in_ <= 0 || out_ <= 0) throw InputError("fc sizes must be positive");
    w_ = Mat(out_, in_);
    b_ = Mat::Zero(out_, 1);
    kaiming_uniform(w_, in_, rng);
    bias_uniform(b_, in_, rng);
    gw_ = Mat::Zero(out_, in_);
    gb_ = Mat::Zero(out_, 1);
  }

  Tensor forward(const Tensor& x, bool, Rng&) override {
    x_ = flatten(x);
    in_ch_ = x.channels;
    in_len_ = x.length;
    Tensor y;
    y.channels = out_;
    y.batch = x.batch;
    y.length = 1;
    y.v.noalias() = w_ * x_;
    y.v.colwise() += b_.col(0);
    return y;
  }

  Tensor infer(const Tensor& x) const override {
    Mat xf = flatten(x);
    Tensor y;
    y.channels = out_;
    y.batch = x.batch;
    y.length = 1;
    y.v.noalias() = w_ * xf;
    y.v.colwise() += b_.col(0);
    return y;
  }

  Tensor backward(const Tensor& gy) override {
    gw_.noalias() += gy.v * x_.transpose();
    gb_.col(0) += gy.v.rowwise().sum();
    Mat gx_flat = w_.transpose() * gy.v;
    Tensor gx;
    gx.channels = in_ch_;
    gx.length = in_len_;
    gx.batch = gy.batch;
    if (in_len_ == 1) {
      gx.v = std::move(gx_flat);
      return gx;
    }
    gx.v = Mat(in_ch_, gx.batch * in_len_);
    for (index_t s = 0; s < gx.batch; ++s)
      for (index_t c = 0; c < in_ch_; ++c)
        for (index_t l = 0; l < in_len_; ++l)
          gx.v(c, s * in_len_ + l) = gx_flat(c * in_len_ + l, s);
    return gx;
  }

  std::vector<ParamView> params() override {
    return {{&w_, &gw_, "fc.w"}, {&b_, &gb_, "fc.b"}};
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::fc;
    s.in_ch = in_;
    s.out_ch = out_;
    return s;
  }

 private:
  // Channel-major flatten: feature index = channel * length + position.
  Mat flatten(const Tensor& x) const {
    if (x.channels * x.length != in_)
      throw InputError("fc input size mismatch");
    if (x.length == 1) return x.v;
    Mat out(in_, x.batch);
    for (index_t s = 0; s < x.batch; ++s)
      for (index_t c = 0; c < x.channels; ++c)
        for (index_t l = 0; l < x.length; ++l)
          out(c * x.length + l, s) = x.v(c, s * x.length + l);
    return out;
  }

  index_t in_, out_;
  Mat w_, b_, gw_, gb_;
  Mat x_;
  index_t in_ch_ = 0, in_len_ = 1;
};

class Dropout final : public Layer {
 public:
  Dropout(double prob, Rng&) : p_(prob) {
    if (!(prob >= 0.0 && prob < 1.0))
      throw InputError("dropout probability must be in [0, 1)");
  }

  Tensor forward(const Tensor& x, bool train, Rng& rng) override {
    Tensor y = x;
    if (!train || p_ == 0.0) {
      mask_ = Mat::Ones(x.v.rows(), x.v.cols());
      return y;
    }
    double keep = 1.0 - p_;
    mask_ = Mat(x.v.rows(), x.v.cols());
    for (index_t j = 0; j < x.v.cols(); ++j)
      for (index_t i = 0; i < x.v.rows(); ++i)
        mask_(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
    y.v = x.v.array() * mask_.array();
    return y;
  }

  Tensor infer(const Tensor& x) const override { return x; }

  Tensor backward(const Tensor& gy) override {
    Tensor gx = gy;
    gx.v = gy.v.array() * mask_.array();
    return gx;
  }

  LayerSpec spec() const override {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.prob = p_;
    return s;
  }

 private:
  double p_;
  Mat mask_;
};

}  // namespace

Net::Net(std::uint64_t seed) : rng_(seed) {}

void Net::add(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::conv1d:
      layers_.push_back(std::make_unique<Conv1d>(s.in_ch, s.out_ch, s.kernel, rng_));
      break;
    case LayerKind::batchnorm:
      layers_.push_back(std::make_unique<BatchNorm1d>(s.in_ch, rng_));
      break;
    case LayerKind::relu:
      layers_.push_back(std::make_unique<ReLU>(rng_));
      break;
    case LayerKind::maxpool:
      layers_.push_back(std::make_unique<MaxPool1d>(s.width, rng_));
      break;
    case LayerKind::fc:
      layers_.push_back(std::make_unique<FC>(s.in_ch, s.out_ch, rng_));
      break;
    case LayerKind::dropout:
      layers_.push_back(std::make_unique<Dropout>(s.prob, rng_));
      break;
  }
}

void Net::add_conv(index_t in_ch, index_t out_ch, index_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel = kernel;
  add(s);
}

void Net::add_batchnorm(index_t ch) {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.in_ch = ch;
  add(s);
}

void Net::add_relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  add(s);
}

void Net::add_maxpool(index_t width) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.width = width;
  add(s);
}

void Net::add_fc(index_t in_features, index_t out_features) {
  LayerSpec s;
  s.kind = LayerKind::fc;
  s.in_ch = in_features;
  s.out_ch = out_features;
  add(s);
}

void Net::add_dropout(double prob) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.prob = prob;
  add(s);
}

Tensor Net::forward(const Tensor& x, bool train) {
  Tensor t = x;
  for (auto& l : layers_) t = l->forward(t, train, rng_);
  forward_done_ = true;
  return t;
}

Tensor Net::backward(const Tensor& gy) {
  if (!forward_done_)
    throw InputError("backward called without a preceding forward");
  Tensor g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    g = (*it)->backward(g);
  return g;
}

Tensor Net::infer(const Tensor& x) const {
  Tensor t = x;
  for (const auto& l : layers_) t = l->infer(t);
  return t;
}

std::vector<ParamView> Net::params() {
  std::vector<ParamView> out;
  for (auto& l : layers_)
    for (auto& p : l->params()) out.push_back(p);
  return out;
}

std::vector<ParamView> Net::buffers() {
  std::vector<ParamView> out;
  for (auto& l : layers_)
    for (auto& p : l->buffers()) out.push_back(p);
  return out;
}

void Net::zero_grad() {
  for (auto& p : params()) p.grad->setZero();
}

std::vector<LayerSpec> Net::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

Adam::Adam(std::vector<ParamView> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg), lr_(cfg.lr) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
  }
}

void Adam::step() {
  ++t_;
  double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Mat& g = *params_[i].grad;
    if (!g.allFinite())
      throw NumericalError("non-finite gradient in " + params_[i].name);
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Mat mhat = m_[i] / c1;
    Mat vhat = v_[i] / c2;
    params_[i].value->array() -=
        lr_ * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
  }
  if (cfg_.step_size > 0 && t_ % cfg_.step_size == 0) lr_ *= cfg_.gamma;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.grad->setZero();
}

ScalarLoss contrastive_loss(double dist, PairLabel label, double margin) {
  if (!(dist >= 0.0)) throw InputError("distance must be nonnegative");
  if (!(margin > 0.0)) throw InputError("margin must be positive");
  ScalarLoss out;
  if (label == PairLabel::positive) {
    out.loss = 0.5 * dist * dist;
    out.ddist = dist;
  } else if (dist < margin) {
    double gap = margin - dist;
    out.loss = 0.5 * gap * gap;
    out.ddist = -gap;
  }
  return out;
}

double mse(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InputError("mse shape mismatch");
  return (a - b).array().square().mean();
}

}  // namespace ltgeo::nn
