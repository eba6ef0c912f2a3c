#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ltgeo/checkpoint.hpp"
#include "ltgeo/errors.hpp"

using namespace ltgeo;
using namespace ltgeo::nn;

namespace {

Net make_small_net(std::uint64_t seed) {
  Net n(seed);
  n.add_conv(1, 4, 3);
  n.add_batchnorm(4);
  n.add_relu();
  n.add_maxpool(2);
  n.add_fc(4 * 3, 5);
  n.add_dropout(0.2);
  n.add_fc(5, 2);
  return n;
}

Tensor make_input(std::uint64_t seed) {
  Tensor t = Tensor::zeros(1, 6, 2);
  Rng r(seed);
  for (index_t i = 0; i < t.v.size(); ++i) t.v.data()[i] = r.uniform(-1, 1);
  return t;
}

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() /
          ("ltgeo_ckpt_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("checkpoint round-trips weights, buffers, and outputs bitwise") {
  TempDir tmp;
  Net net = make_small_net(123);
  Tensor x = make_input(5);
  net.forward(x, true);  // move batchnorm running stats off their defaults

  NetCheckpoint c = snapshot(net);
  save_checkpoint(tmp.path("net.bin"), c);
  NetCheckpoint c2 = load_checkpoint(tmp.path("net.bin"));
  Net back = restore_net(c2, 0);

  Tensor y0 = net.infer(x);
  Tensor y1 = back.infer(x);
  CHECK((y0.v == y1.v));
  CHECK(back.layer_count() == net.layer_count());
}

TEST_CASE("checkpoint round-trips optimizer state") {
  TempDir tmp;
  Net net = make_small_net(9);
  AdamConfig cfg;
  Adam opt(net.params(), cfg);
  Tensor x = make_input(6);
  for (int i = 0; i < 3; ++i) {
    net.zero_grad();
    Tensor y = net.forward(x, true);
    Tensor gy = y;
    gy.v = y.v;  // dL/dy for L = 0.5*||y||^2
    net.backward(gy);
    opt.step();
  }
  NetCheckpoint c = snapshot(net, &opt);
  save_checkpoint(tmp.path("opt.bin"), c);
  NetCheckpoint c2 = load_checkpoint(tmp.path("opt.bin"));
  CHECK(c2.has_optimizer);
  CHECK(c2.opt_steps == 3);

  Net back = restore_net(c2, 0);
  Adam opt2(back.params(), cfg);
  restore_optimizer(c2, opt2);
  CHECK(opt2.steps() == 3);
  CHECK(opt2.lr() == opt.lr());
  for (std::size_t i = 0; i < opt.moment1().size(); ++i) {
    CHECK((opt.moment1()[i] == opt2.moment1()[i]));
    CHECK((opt.moment2()[i] == opt2.moment2()[i]));
  }
}

TEST_CASE("checkpoint rejects corruption, truncation, and bad magic") {
  TempDir tmp;
  Net net = make_small_net(77);
  save_checkpoint(tmp.path("a.bin"), snapshot(net));

  // Flip one byte in the middle.
  {
    std::fstream f(tmp.path("a.bin"),
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(200);
    char b;
    f.seekg(200);
    f.get(b);
    f.seekp(200);
    f.put(char(b ^ 0x40));
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.path("a.bin")), InputError);

  // Truncate.
  save_checkpoint(tmp.path("b.bin"), snapshot(net));
  {
    auto size = std::filesystem::file_size(tmp.path("b.bin"));
    std::filesystem::resize_file(tmp.path("b.bin"), size / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.path("b.bin")), InputError);

  // Wrong magic.
  {
    std::ofstream f(tmp.path("c.bin"), std::ios::binary);
    f << "NOPEnope";
  }
  CHECK_THROWS_AS(load_checkpoint(tmp.path("c.bin")), InputError);

  CHECK_THROWS_AS(load_checkpoint(tmp.path("missing.bin")),
                  MissingArtifactError);
}

TEST_CASE("restored architecture rejects mismatched weights") {
  Net net = make_small_net(3);
  NetCheckpoint c = snapshot(net);
  c.params[0] = Mat::Zero(2, 2);  // wrong shape
  CHECK_THROWS_AS(restore_net(c, 0), InputError);
}

TEST_CASE("json sidecar round-trip is deterministic") {
  TempDir tmp;
  nlohmann::json j;
  j["sigma"] = 0.125;
  j["margin"] = 1.0;
  j["window"] = {{"light", 361}, {"temp", 19}};
  write_json_file(tmp.path("side.json"), j);
  write_json_file(tmp.path("side2.json"), j);

  auto read_bytes = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(read_bytes(tmp.path("side.json")) == read_bytes(tmp.path("side2.json")));

  nlohmann::json back = read_json_file(tmp.path("side.json"));
  CHECK(back["sigma"] == 0.125);
  CHECK(back["window"]["light"] == 361);

  CHECK_THROWS_AS(read_json_file(tmp.path("nope.json")), MissingArtifactError);
  {
    std::ofstream f(tmp.path("bad.json"));
    f << "{not json";
  }
  CHECK_THROWS_AS(read_json_file(tmp.path("bad.json")), InputError);
}
