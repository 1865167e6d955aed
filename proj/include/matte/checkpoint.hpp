#ifndef MATTE_CHECKPOINT_HPP
#define MATTE_CHECKPOINT_HPP

// Little-endian binary checkpoint: magic "MTLT", u32 version, length-prefixed
// JSON config snapshot, u32 tensor count, per-tensor records (u32 name
// length, name, u32 rank, u32 dims, raw 32-bit floats), then an optimizer
// state section with the same record layout (count 0 when absent).
// save -> load -> save is byte identical.

#include <cstdint>
#include <string>
#include <vector>

#include "matte/layers.hpp"

namespace matte {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config_json;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    std::vector<std::pair<std::string, std::vector<float>>> optimizer_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace matte

#endif  // MATTE_CHECKPOINT_HPP
