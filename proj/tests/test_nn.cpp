#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gradcheck.hpp"
#include "ltgeo/errors.hpp"
#include "ltgeo/nn.hpp"

using namespace ltgeo;
using namespace ltgeo::nn;

namespace {

Tensor random_tensor(index_t ch, index_t len, index_t batch,
                     std::uint64_t seed) {
  Tensor t = Tensor::zeros(ch, len, batch);
  Rng r(seed);
  for (index_t j = 0; j < t.v.cols(); ++j)
    for (index_t i = 0; i < t.v.rows(); ++i) t.v(i, j) = r.uniform(-2.0, 2.0);
  return t;
}

}  // namespace

TEST_CASE("identical seeds build identical nets") {
  auto build = [](std::uint64_t s) {
    Net n(s);
    n.add_conv(1, 4, 3);
    n.add_fc(4 * 8, 5);
    return n;
  };
  Net a = build(11), b = build(11), c = build(12);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK((*pa[i].value == *pb[i].value));
    if (pa[i].value->size() > 2) CHECK((*pa[i].value != *pc[i].value));
  }
}

TEST_CASE("initialization respects fan-in bounds") {
  Net n(3);
  n.add_conv(4, 8, 5);
  auto p = n.params();
  double bound = std::sqrt(6.0 / (4 * 5));
  CHECK(p[0].value->cwiseAbs().maxCoeff() <= bound);
  CHECK(p[0].value->cwiseAbs().maxCoeff() > 0.5 * bound);  // not degenerate
  CHECK(p[1].value->cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(20.0));
}

TEST_CASE("conv1d with a centered delta kernel is the identity") {
  Net n(1);
  n.add_conv(1, 1, 3);
  auto p = n.params();
  p[0].value->setZero();
  (*p[0].value)(0, 1) = 1.0;  // kernel [0 1 0]
  p[1].value->setZero();
  Tensor x = random_tensor(1, 10, 2, 5);
  Tensor y = n.forward(x, false);
  CHECK((y.v - x.v).cwiseAbs().maxCoeff() < 1e-12);
  Tensor yi = n.infer(x);
  CHECK((yi.v - x.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv1d zero-pads the borders") {
  Net n(1);
  n.add_conv(1, 1, 3);
  auto p = n.params();
  p[0].value->setOnes();  // kernel [1 1 1]
  p[1].value->setZero();
  Tensor x = Tensor::zeros(1, 4, 1);
  x.v << 1.0, 2.0, 3.0, 4.0;
  Tensor y = n.forward(x, false);
  CHECK(y.v(0, 0) == doctest::Approx(3.0));   // 0+1+2
  CHECK(y.v(0, 1) == doctest::Approx(6.0));
  CHECK(y.v(0, 3) == doctest::Approx(7.0));   // 3+4+0
  CHECK_THROWS_AS(n.add_conv(1, 1, 4), InputError);  // even kernel
}

TEST_CASE("maxpool halves length and drops the tail") {
  Net n(1);
  n.add_maxpool(2);
  Tensor x = Tensor::zeros(1, 5, 1);
  x.v << 1.0, 5.0, 2.0, 3.0, 9.0;  // 9 is in the dropped tail
  Tensor y = n.forward(x, false);
  CHECK(y.length == 2);
  CHECK(y.v(0, 0) == 5.0);
  CHECK(y.v(0, 1) == 3.0);
}

TEST_CASE("batchnorm standardizes per channel in training mode") {
  Net n(1);
  n.add_batchnorm(3);
  Tensor x = random_tensor(3, 7, 4, 9);
  x.v.row(1).array() += 10.0;  // offset one channel
  Tensor y = n.forward(x, true);
  for (index_t c = 0; c < 3; ++c) {
    CHECK(y.v.row(c).mean() == doctest::Approx(0.0).epsilon(1e-9));
    double var = (y.v.row(c).array() - y.v.row(c).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
  // Eval mode uses running stats, so a constant input maps near the batch
  // statistics seen in training.
  Tensor z = n.forward(x, false);
  CHECK(z.v.row(1).mean() < 10.0);
}

TEST_CASE("dropout scales kept activations and is identity in eval") {
  Net n(42);
  n.add_dropout(0.5);
  Tensor x = Tensor::zeros(1, 1, 10000);
  x.v.setConstant(2.0);
  Tensor y = n.forward(x, true);
  double zero_frac = double((y.v.array() == 0.0).count()) / double(y.v.size());
  CHECK(zero_frac == doctest::Approx(0.5).epsilon(0.05));
  CHECK(y.v.mean() == doctest::Approx(2.0).epsilon(0.05));
  double kept = 0;
  for (index_t i = 0; i < y.v.size(); ++i)
    if (y.v.data()[i] != 0.0) kept = y.v.data()[i];
  CHECK(kept == doctest::Approx(4.0));  // 2 / (1 - 0.5)

  Tensor ye = n.forward(x, false);
  CHECK((ye.v == x.v));
  CHECK_THROWS_AS(n.add_dropout(1.0), InputError);
}

TEST_CASE("fc flattens channel-major") {
  Net n(1);
  n.add_fc(6, 1);
  auto p = n.params();
  // Weight row [0 0 0 0 0 1] picks channel 1, position 2.
  p[0].value->setZero();
  (*p[0].value)(0, 5) = 1.0;
  p[1].value->setZero();
  Tensor x = Tensor::zeros(2, 3, 2);
  // sample 0: ch0 = [1 2 3], ch1 = [4 5 6]; sample 1 = 10x
  x.v << 1, 2, 3, 10, 20, 30,
         4, 5, 6, 40, 50, 60;
  Tensor y = n.forward(x, false);
  CHECK(y.v(0, 0) == doctest::Approx(6.0));
  CHECK(y.v(0, 1) == doctest::Approx(60.0));
  CHECK_THROWS_AS(n.forward(random_tensor(3, 3, 1, 1), false), InputError);
}

TEST_CASE("backward requires a forward pass") {
  Net n(1);
  n.add_relu();
  Tensor g = Tensor::zeros(1, 4, 1);
  CHECK_THROWS_AS(n.backward(g), InputError);
}

TEST_CASE("gradient check: every layer kind") {
  struct Case {
    const char* name;
    std::function<Net()> build;
    Tensor input;
    bool train;
  };
  std::vector<Case> cases;
  cases.push_back({"conv1d",
                   [] {
                     Net n(7);
                     n.add_conv(2, 3, 3);
                     return n;
                   },
                   random_tensor(2, 7, 3, 21), false});
  cases.push_back({"batchnorm-train",
                   [] {
                     Net n(8);
                     n.add_batchnorm(3);
                     return n;
                   },
                   random_tensor(3, 4, 2, 22), true});
  cases.push_back({"batchnorm-eval",
                   [] {
                     Net n(8);
                     n.add_batchnorm(3);
                     return n;
                   },
                   random_tensor(3, 4, 2, 23), false});
  cases.push_back({"relu",
                   [] {
                     Net n(9);
                     n.add_relu();
                     return n;
                   },
                   random_tensor(2, 6, 2, 24), false});
  cases.push_back({"maxpool",
                   [] {
                     Net n(10);
                     n.add_maxpool(2);
                     return n;
                   },
                   random_tensor(2, 8, 2, 25), false});
  cases.push_back({"fc",
                   [] {
                     Net n(11);
                     n.add_fc(10, 4);
                     return n;
                   },
                   random_tensor(2, 5, 3, 26), false});
  cases.push_back({"dropout-train",
                   [] {
                     Net n(12);
                     n.add_fc(5, 4);
                     n.add_dropout(0.3);
                     return n;
                   },
                   random_tensor(5, 1, 6, 27), true});
  cases.push_back({"stack",
                   [] {
                     Net n(13);
                     n.add_conv(1, 4, 3);
                     n.add_batchnorm(4);
                     n.add_relu();
                     n.add_maxpool(2);
                     n.add_fc(4 * 5, 6);
                     n.add_dropout(0.25);
                     n.add_fc(6, 3);
                     return n;
                   },
                   random_tensor(1, 10, 4, 28), true});

  for (auto& c : cases) {
    auto res = gradcheck::check_net(c.build, c.input, c.train, 40, 99);
    INFO(std::string(c.name), " param grads, max rel err ", res.max_rel_err);
    CHECK(res.max_rel_err < 1e-4);
    auto rin = gradcheck::check_input(c.build, c.input, c.train, 40, 100);
    INFO(std::string(c.name), " input grads, max rel err ", rin.max_rel_err);
    CHECK(rin.max_rel_err < 1e-4);
  }
}

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  Net n(1);
  n.add_fc(1, 1);
  auto p = n.params();
  p[0].value->setConstant(1.0);
  p[1].value->setConstant(0.0);
  AdamConfig cfg;
  Adam opt(n.params(), cfg);
  n.zero_grad();
  p[0].grad->setConstant(0.5);  // any positive gradient
  opt.step();
  CHECK((*p[0].value)(0, 0) == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("learning rate decays by gamma every step_size steps") {
  Net n(1);
  n.add_fc(1, 1);
  AdamConfig cfg;  // lr 1e-3, step_size 1000, gamma 0.1
  Adam opt(n.params(), cfg);
  auto p = n.params();
  for (int i = 0; i < 1000; ++i) {
    p[0].grad->setConstant(1e-8);
    p[1].grad->setConstant(1e-8);
    opt.step();
  }
  CHECK(opt.lr() == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients") {
  Net n(1);
  n.add_fc(1, 1);
  Adam opt(n.params(), AdamConfig{});
  auto p = n.params();
  p[0].grad->setConstant(std::nan(""));
  CHECK_THROWS_AS(opt.step(), NumericalError);
}

TEST_CASE("contrastive loss values and gradients") {
  auto pos = contrastive_loss(0.5, PairLabel::positive, 1.0);
  CHECK(pos.loss == doctest::Approx(0.125));
  CHECK(pos.ddist == doctest::Approx(0.5));

  auto neg = contrastive_loss(0.5, PairLabel::negative, 1.0);
  CHECK(neg.loss == doctest::Approx(0.125));
  CHECK(neg.ddist == doctest::Approx(-0.5));

  auto far = contrastive_loss(1.5, PairLabel::negative, 1.0);
  CHECK(far.loss == 0.0);
  CHECK(far.ddist == 0.0);

  auto zero = contrastive_loss(0.0, PairLabel::positive, 1.0);
  CHECK(zero.loss == 0.0);

  CHECK_THROWS_AS(contrastive_loss(-0.1, PairLabel::positive, 1.0),
                  InputError);
  CHECK_THROWS_AS(contrastive_loss(0.5, PairLabel::positive, 0.0),
                  InputError);
}

TEST_CASE("published architectures produce the documented shapes") {
  // Light branch: four conv blocks then two fully-connected layers.
  Net light(77);
  light.add_conv(1, 128, 9);
  light.add_batchnorm(128);
  light.add_relu();
  light.add_maxpool(2);
  for (int i = 0; i < 3; ++i) {
    light.add_conv(128, 128, 5);
    light.add_batchnorm(128);
    light.add_relu();
    light.add_maxpool(2);
  }
  light.add_fc(128 * 22, 512);
  light.add_relu();
  light.add_dropout(0.30);
  light.add_fc(512, 64);
  Tensor lx = random_tensor(1, 361, 2, 31);
  Tensor ly = light.forward(lx, false);
  CHECK(ly.channels == 64);
  CHECK(ly.batch == 2);
  CHECK(ly.length == 1);

  // Temperature branch: two conv blocks then two fully-connected layers.
  Net temp(78);
  temp.add_conv(1, 32, 3);
  temp.add_batchnorm(32);
  temp.add_relu();
  temp.add_maxpool(2);
  temp.add_conv(32, 32, 3);
  temp.add_batchnorm(32);
  temp.add_relu();
  temp.add_maxpool(2);
  temp.add_fc(32 * 4, 64);
  temp.add_relu();
  temp.add_dropout(0.30);
  temp.add_fc(64, 32);
  Tensor tx = random_tensor(1, 19, 3, 32);
  Tensor ty = temp.forward(tx, false);
  CHECK(ty.channels == 32);
  CHECK(ty.batch == 3);
}

TEST_CASE("training forward is reproducible for a fixed seed") {
  auto run = [] {
    Net n(5);
    n.add_fc(4, 4);
    n.add_dropout(0.5);
    Tensor x = random_tensor(4, 1, 3, 55);
    return n.forward(x, true).v;
  };
  Mat a = run(), b = run();
  CHECK((a == b));
}

TEST_CASE("mse") {
  Mat a = Mat::Zero(2, 2), b = Mat::Ones(2, 2);
  CHECK(mse(a, b) == doctest::Approx(1.0));
  b(0, 0) = 3.0;
  CHECK(mse(a, b) == doctest::Approx((9.0 + 3.0) / 4.0));
  CHECK_THROWS_AS(mse(a, Mat::Zero(1, 2)), InputError);
}
