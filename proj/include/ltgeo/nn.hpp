#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ltgeo/rng.hpp"
#include "ltgeo/types.hpp"

namespace ltgeo::nn {

// Batch of 1-D feature maps: v is (channels x batch*length) with one
// contiguous block of `length` columns per sample. Fully-connected stages
// use length == 1, so v is (features x batch).
struct Tensor {
  Mat v;
  index_t channels = 0;
  index_t length = 1;
  index_t batch = 0;

  static Tensor zeros(index_t channels, index_t length, index_t batch);
  index_t cols() const { return batch * length; }
};

// One sample per column of `m`, single channel of length rows.
Tensor from_columns(const Mat& m);

enum class LayerKind { conv1d, batchnorm, relu, maxpool, fc, dropout };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  index_t in_ch = 0;
  index_t out_ch = 0;
  index_t kernel = 0;    // conv1d only, odd
  index_t width = 2;     // maxpool only
  double prob = 0.0;     // dropout only
};

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

struct ParamView {
  Mat* value = nullptr;
  Mat* grad = nullptr;
  std::string name;
};

class Layer {
 public:
  virtual ~Layer() = default;
  // Training/eval forward; caches what backward needs.
  virtual Tensor forward(const Tensor& x, bool train, Rng& rng) = 0;
  // Propagates gradients; accumulates into parameter grads.
  virtual Tensor backward(const Tensor& gy) = 0;
  // Stateless eval-mode forward; safe to call concurrently on a frozen net.
  virtual Tensor infer(const Tensor& x) const = 0;
  virtual std::vector<ParamView> params() { return {}; }
  // Non-trained state that still belongs in a checkpoint (batchnorm running
  // moments).
  virtual std::vector<ParamView> buffers() { return {}; }
  virtual LayerSpec spec() const = 0;
};

// Sequential container. Layer parameters are initialized from the seed at
// construction time, so two nets built the same way from the same seed are
// bit-identical.
class Net {
 public:
  explicit Net(std::uint64_t seed);
  Net(Net&&) = default;
  Net& operator=(Net&&) = default;

  void add(const LayerSpec& s);
  void add_conv(index_t in_ch, index_t out_ch, index_t kernel);
  void add_batchnorm(index_t ch);
  void add_relu();
  void add_maxpool(index_t width = 2);
  void add_fc(index_t in_features, index_t out_features);
  void add_dropout(double prob);

  Tensor forward(const Tensor& x, bool train);
  // Requires a preceding forward in this net; returns the input gradient.
  Tensor backward(const Tensor& gy);
  Tensor infer(const Tensor& x) const;

  std::vector<ParamView> params();
  std::vector<ParamView> buffers();
  void zero_grad();
  std::size_t layer_count() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  std::vector<LayerSpec> specs() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng rng_;
  bool forward_done_ = false;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Learning rate decays by `gamma` every `step_size` optimizer steps.
  std::int64_t step_size = 1000;
  double gamma = 0.1;
};

class Adam {
 public:
  Adam(std::vector<ParamView> params, const AdamConfig& cfg);

  void step();  // throws NumericalError on non-finite gradients
  void zero_grad();
  double lr() const { return lr_; }
  std::int64_t steps() const { return t_; }

  // Checkpoint access.
  std::vector<Mat>& moment1() { return m_; }
  std::vector<Mat>& moment2() { return v_; }
  void restore_clock(std::int64_t t, double lr) { t_ = t; lr_ = lr; }

 private:
  std::vector<ParamView> params_;
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  std::int64_t t_ = 0;
  double lr_;
};

enum class PairLabel { positive, negative };

struct ScalarLoss {
  double loss = 0.0;
  double ddist = 0.0;  // derivative w.r.t. the distance input
};

// Contrastive loss on an embedding distance: positive pairs pay d^2/2,
// negative pairs pay max(0, margin - d)^2 / 2.
ScalarLoss contrastive_loss(double dist, PairLabel label, double margin);

double mse(const Mat& a, const Mat& b);

}  // namespace ltgeo::nn
