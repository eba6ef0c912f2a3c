#pragma once

#include <stdexcept>
#include <string>

namespace ltgeo {

// Exit-code contract: 0 success, 2 input error, 3 missing artifact,
// 4 numerical failure.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return 2;
  if (dynamic_cast<const MissingArtifactError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

}  // namespace ltgeo
