#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltgeo/nn.hpp"

namespace ltgeo {

// Serializable snapshot of a net and (optionally) its optimizer. The binary
// layout is versioned and checksummed; floats are little-endian f64.
struct NetCheckpoint {
  std::vector<nn::LayerSpec> specs;
  std::vector<Mat> params;
  std::vector<Mat> buffers;
  bool has_optimizer = false;
  std::vector<Mat> opt_m, opt_v;
  std::int64_t opt_steps = 0;
  double opt_lr = 0.0;
};

NetCheckpoint snapshot(nn::Net& net, const nn::Adam* opt = nullptr);

// Rebuilds a net with the checkpointed architecture and weights. The seed
// only affects layers' future stochastic draws (dropout), not the restored
// parameters.
nn::Net restore_net(const NetCheckpoint& c, std::uint64_t seed = 0);

// Restores optimizer moments into an Adam bound to the target net's params.
void restore_optimizer(const NetCheckpoint& c, nn::Adam& opt);

void save_checkpoint(const std::string& path, const NetCheckpoint& c);
NetCheckpoint load_checkpoint(const std::string& path);

// Deterministic JSON sidecar helpers (sorted keys, trailing newline).
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace ltgeo
