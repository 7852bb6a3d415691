#pragma once

#include <filesystem>
#include <utility>

#include "s2sr/network.hpp"

namespace s2sr {

// Self-describing weight checkpoint: header with magic "S2CK", version,
// the full NetworkConfig and the declared parameter total, followed by the
// tensors in declaration order (first, block pairs, last), each prefixed by
// its shape. All scalars little-endian, weights float32.
void save_weights(const NetworkConfig& config, const NetworkWeights& weights,
                  const std::filesystem::path& path);

std::pair<NetworkConfig, NetworkWeights> load_weights(
    const std::filesystem::path& path);

// Throws ShapeMismatch when the checkpoint disagrees with an expected config.
void check_config(const NetworkConfig& expected, const NetworkConfig& loaded);

}  // namespace s2sr
