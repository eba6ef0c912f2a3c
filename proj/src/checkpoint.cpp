#include "ltgeo/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ltgeo/errors.hpp"

namespace ltgeo {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'T', 'G', 'C'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::string buf;
  void raw(const void* p, std::size_t n) {
    buf.append(reinterpret_cast<const char*>(p), n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void i64(std::int64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void mat(const Mat& m) {
    i64(m.rows());
    i64(m.cols());
    raw(m.data(), sizeof(double) * std::size_t(m.size()));
  }
};

struct Reader {
  const char* p;
  const char* end;
  void raw(void* out, std::size_t n) {
    if (std::size_t(end - p) < n)
      throw InputError("checkpoint truncated");
    std::memcpy(out, p, n);
    p += n;
  }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  Mat mat() {
    std::int64_t r = i64(), c = i64();
    if (r < 0 || c < 0 || r * c > (1ll << 32))
      throw InputError("checkpoint matrix has implausible shape");
    Mat m(r, c);
    raw(m.data(), sizeof(double) * std::size_t(m.size()));
    return m;
  }
};

void write_mats(Writer& w, const std::vector<Mat>& mats) {
  w.u32(std::uint32_t(mats.size()));
  for (const Mat& m : mats) w.mat(m);
}

std::vector<Mat> read_mats(Reader& r) {
  std::uint32_t n = r.u32();
  if (n > 4096) throw InputError("checkpoint has implausible blob count");
  std::vector<Mat> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.mat());
  return out;
}

}  // namespace

NetCheckpoint snapshot(nn::Net& net, const nn::Adam* opt) {
  NetCheckpoint c;
  c.specs = net.specs();
  for (auto& p : net.params()) c.params.push_back(*p.value);
  for (auto& b : net.buffers()) c.buffers.push_back(*b.value);
  if (opt) {
    nn::Adam* o = const_cast<nn::Adam*>(opt);
    c.has_optimizer = true;
    c.opt_m = o->moment1();
    c.opt_v = o->moment2();
    c.opt_steps = o->steps();
    c.opt_lr = o->lr();
  }
  return c;
}

nn::Net restore_net(const NetCheckpoint& c, std::uint64_t seed) {
  nn::Net net(seed);
  for (const auto& s : c.specs) net.add(s);
  auto params = net.params();
  if (params.size() != c.params.size())
    throw InputError("checkpoint parameter count does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].value->rows() != c.params[i].rows() ||
        params[i].value->cols() != c.params[i].cols())
      throw InputError("checkpoint parameter shape mismatch");
    *params[i].value = c.params[i];
  }
  auto buffers = net.buffers();
  if (buffers.size() != c.buffers.size())
    throw InputError("checkpoint buffer count does not match architecture");
  for (std::size_t i = 0; i < buffers.size(); ++i)
    *buffers[i].value = c.buffers[i];
  return net;
}

void restore_optimizer(const NetCheckpoint& c, nn::Adam& opt) {
  if (!c.has_optimizer)
    throw InputError("checkpoint carries no optimizer state");
  if (opt.moment1().size() != c.opt_m.size())
    throw InputError("optimizer state does not match parameter count");
  opt.moment1() = c.opt_m;
  opt.moment2() = c.opt_v;
  opt.restore_clock(c.opt_steps, c.opt_lr);
}

void save_checkpoint(const std::string& path, const NetCheckpoint& c) {
  Writer w;
  w.u32(kVersion);
  w.u32(std::uint32_t(c.specs.size()));
  for (const auto& s : c.specs) {
    w.u32(std::uint32_t(s.kind));
    w.i64(s.in_ch);
    w.i64(s.out_ch);
    w.i64(s.kernel);
    w.i64(s.width);
    w.f64(s.prob);
  }
  write_mats(w, c.params);
  write_mats(w, c.buffers);
  w.u32(c.has_optimizer ? 1 : 0);
  if (c.has_optimizer) {
    write_mats(w, c.opt_m);
    write_mats(w, c.opt_v);
    w.i64(c.opt_steps);
    w.f64(c.opt_lr);
  }

  std::uint32_t crc = std::uint32_t(
      crc32(0, reinterpret_cast<const Bytef*>(w.buf.data()),
            uInt(w.buf.size())));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open checkpoint for writing: " + path);
  f.write(kMagic, 4);
  f.write(w.buf.data(), std::streamsize(w.buf.size()));
  f.write(reinterpret_cast<const char*>(&crc), 4);
  if (!f) throw InputError("failed writing checkpoint: " + path);
}

NetCheckpoint load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw MissingArtifactError("checkpoint not found: " + path);
  std::ifstream f(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (data.size() < 12) throw InputError("checkpoint truncated: " + path);
  if (std::memcmp(data.data(), kMagic, 4) != 0)
    throw InputError("not a checkpoint file: " + path);

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
  std::uint32_t crc = std::uint32_t(
      crc32(0, reinterpret_cast<const Bytef*>(data.data() + 4),
            uInt(data.size() - 8)));
  if (crc != stored_crc)
    throw InputError("checkpoint checksum mismatch: " + path);

  Reader r{data.data() + 4, data.data() + data.size() - 4};
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw InputError("unsupported checkpoint version " +
                     std::to_string(version));
  NetCheckpoint c;
  std::uint32_t n_layers = r.u32();
  if (n_layers > 1024) throw InputError("checkpoint has implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    nn::LayerSpec s;
    std::uint32_t kind = r.u32();
    if (kind > std::uint32_t(nn::LayerKind::dropout))
      throw InputError("checkpoint has unknown layer kind");
    s.kind = nn::LayerKind(kind);
    s.in_ch = r.i64();
    s.out_ch = r.i64();
    s.kernel = r.i64();
    s.width = r.i64();
    s.prob = r.f64();
    c.specs.push_back(s);
  }
  c.params = read_mats(r);
  c.buffers = read_mats(r);
  c.has_optimizer = r.u32() != 0;
  if (c.has_optimizer) {
    c.opt_m = read_mats(r);
    c.opt_v = read_mats(r);
    c.opt_steps = r.i64();
    c.opt_lr = r.f64();
  }
  if (r.p != r.end) throw InputError("checkpoint has trailing bytes: " + path);
  return c;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw InputError("failed writing: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw MissingArtifactError("file not found: " + path);
  std::ifstream f(path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid JSON in " + path + ": " + e.what());
  }
}

}  // namespace ltgeo
