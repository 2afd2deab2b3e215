#pragma once

#include "harmonika/discnet.hpp"

#include <cstdint>
#include <filesystem>

namespace harmonika {

// Binary checkpoint layout:
//   "UNIVHD01"                       8 bytes
//   header length                    uint64 little-endian
//   JSON header                      {version, seed, config, gamma, layers[]}
//   payload                          float32 LE, per layer: weights then bias,
//                                    in the order listed in the header
struct Checkpoint {
  DiscriminatorParams params;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const DiscriminatorParams& params,
                     std::uint64_t seed);

// Throws FormatError on a bad magic, truncated payload or inconsistent header.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace harmonika
