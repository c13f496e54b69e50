#pragma once

#include <map>
#include <string>

#include "svos/arch.hpp"
#include "svos/rng.hpp"
#include "svos/tensor.hpp"

namespace svos {
namespace net {

inline constexpr const char* kCheckpointVersion = "svos-ckpt-1";

// Named parameter tensors for all three networks, stored as float32 in map
// order (names are unique by construction).
struct ModelParams {
  std::string version = kCheckpointVersion;
  ArchDescriptor arch;
  std::map<std::string, Tensor<float>> tensors;

  bool operator==(const ModelParams& o) const {
    if (!(arch == o.arch) || version != o.version) return false;
    if (tensors.size() != o.tensors.size()) return false;
    for (const auto& [k, v] : tensors) {
      auto it = o.tensors.find(k);
      if (it == o.tensors.end() || it->second.shape != v.shape || it->second.v != v.v)
        return false;
    }
    return true;
  }
};

// Deterministic fan-in-scaled init; biases start at zero.
ModelParams init_parameters(const ArchDescriptor& arch, uint64_t seed);

// Versioned container: text manifest, then raw little-endian float32 payload.
void save_checkpoint(const ModelParams& p, const std::string& path);
ModelParams load_checkpoint(const std::string& path);
// Same, but the tensors must match `expected`'s shapes exactly.
ModelParams load_checkpoint(const std::string& path, const ArchDescriptor& expected);

}  // namespace net
}  // namespace svos
